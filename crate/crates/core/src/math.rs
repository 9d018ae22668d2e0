//! Numerical primitives shared by the likelihood and solver code.
//!
//! Everything here works in log space; probabilities close to 0 or 1 are the
//! common case throughout the crate.

use std::f64::consts::PI;
use std::sync::OnceLock;

// Lanczos approximation, g = 7, n = 9; published coefficients kept verbatim.
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for z > 0.
pub fn ln_gamma(z: f64) -> f64 {
    assert!(z > 0.0, "ln_gamma requires a positive argument, got {z}");
    if z < 0.5 {
        // reflection formula
        PI.ln() - (PI * z).sin().ln() - ln_gamma(1.0 - z)
    } else {
        let z = z - 1.0;
        let mut x = LANCZOS[0];
        for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
            x += c / (z + i as f64);
        }
        let t = z + 7.5;
        0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
    }
}

const LN_FACTORIAL_TABLE_LEN: usize = 1024;

fn ln_factorial_table() -> &'static [f64; LN_FACTORIAL_TABLE_LEN] {
    static TABLE: OnceLock<[f64; LN_FACTORIAL_TABLE_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0; LN_FACTORIAL_TABLE_LEN];
        for n in 2..LN_FACTORIAL_TABLE_LEN {
            t[n] = t[n - 1] + (n as f64).ln();
        }
        t
    })
}

/// ln(n!), exact accumulation for small n, Lanczos beyond the table.
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < LN_FACTORIAL_TABLE_LEN {
        ln_factorial_table()[n as usize]
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// ln C(n, k). Requires k <= n.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    assert!(k <= n, "ln_choose requires k <= n, got n={n} k={k}");
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// ln(1 - e^s) for s <= 0, stable near both ends.
///
/// Returns -inf at s = 0 (the argument of the log vanishes).
pub fn log1mexp(s: f64) -> f64 {
    if s >= 0.0 {
        return f64::NEG_INFINITY;
    }
    if s > -std::f64::consts::LN_2 {
        (-s.exp_m1()).ln()
    } else {
        (-s.exp()).ln_1p()
    }
}

/// log(sum(exp(x))) with the usual max shift; empty input gives -inf.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + sum.ln()
}

/// Log-pmf of Binomial(trials, gamma) at `successes`, parameterized by
/// log_q = ln(1 - gamma) <= 0.
///
/// gamma = 0 (log_q = 0) is a point mass at zero successes; gamma = 1
/// (log_q = -inf) is a point mass at `trials`.
pub fn binomial_logpmf_from_log_q(trials: u64, successes: u64, log_q: f64) -> f64 {
    debug_assert!(successes <= trials);
    debug_assert!(log_q <= 0.0);
    if log_q == 0.0 {
        return if successes == 0 {
            0.0
        } else {
            f64::NEG_INFINITY
        };
    }
    if log_q == f64::NEG_INFINITY {
        return if successes == trials {
            0.0
        } else {
            f64::NEG_INFINITY
        };
    }
    ln_choose(trials, successes)
        + successes as f64 * log1mexp(log_q)
        + (trials - successes) as f64 * log_q
}

/// Log-pmf of Binomial(trials, gamma) at `successes` for gamma in [0, 1].
pub fn binomial_logpmf(trials: u64, successes: u64, gamma: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&gamma));
    if gamma >= 1.0 {
        return if successes == trials {
            0.0
        } else {
            f64::NEG_INFINITY
        };
    }
    binomial_logpmf_from_log_q(trials, successes, (-gamma).ln_1p())
}
