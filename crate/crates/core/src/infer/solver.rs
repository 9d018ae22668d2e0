//! Projected gradient ascent on the box `[q_hat_min, 0]^d`.
//!
//! Barzilai-Borwein step lengths with monotone Armijo backtracking. The
//! objective is concave on the box, so any point with zero projected
//! gradient is a global maximizer.

use crate::error::{Error, Result};

use super::problem::NodeProblem;

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const LAMBDA_MIN: f64 = 1e-30;
const LAMBDA_MAX: f64 = 1e30;
// Stop after this many consecutive iterations whose objective improvement
// is below floating-point resolution; the gradient tolerance can sit below
// what f64 arithmetic can certify on large problems.
const STALL_LIMIT: usize = 5;
const STALL_REL: f64 = 1e-13;

/// Solver and structure-discovery settings.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Sparsity weight of the `-rho * sum_j e^{-q_hat_j}` penalty.
    pub rho: f64,
    /// Convergence tolerance on the infinity norm of the projected gradient.
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    /// Detection threshold on p: candidates with `p_hat >= edge_threshold`
    /// count as discovered edges.
    pub edge_threshold: f64,
    /// Uniform initialization probability (interior of the box).
    pub init_probability: f64,
    /// Lower bound on q_hat; `ln(1 - 0.999)` by default, which caps
    /// estimated probabilities at 0.999.
    pub q_hat_min: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: 1.0,
            gradient_tolerance: 1e-6,
            max_iterations: 5000,
            edge_threshold: 1e-4,
            init_probability: 1e-3,
            q_hat_min: 0.001f64.ln(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::parameter(format!(
                "rho must be >= 0, got {}",
                self.rho
            )));
        }
        if self.gradient_tolerance.is_nan() || self.gradient_tolerance <= 0.0 {
            return Err(Error::parameter("gradient tolerance must be > 0"));
        }
        if self.max_iterations == 0 {
            return Err(Error::parameter("max_iterations must be >= 1"));
        }
        if self.edge_threshold.is_nan() || self.edge_threshold < 0.0 {
            return Err(Error::parameter("edge threshold must be >= 0"));
        }
        if !(self.init_probability > 0.0 && self.init_probability < 1.0) {
            return Err(Error::parameter("init probability must lie in (0, 1)"));
        }
        if !(self.q_hat_min < 0.0 && self.q_hat_min.is_finite()) {
            return Err(Error::parameter("q_hat_min must be finite and negative"));
        }
        if (1.0 - self.init_probability).ln() < self.q_hat_min {
            return Err(Error::parameter(
                "init probability lies outside the q_hat box",
            ));
        }
        Ok(())
    }
}

/// Result of one node solve.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// One entry per candidate parent, each in `[q_hat_min, 0]`.
    pub q_hat: Vec<f64>,
    pub objective: f64,
    /// Infinity norm of the projected gradient at `q_hat`.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SolverState {
    /// Estimated probabilities `1 - e^{q_hat}`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.q_hat.iter().map(|&q| -q.exp_m1()).collect()
    }
}

fn projected_gradient_norm(x: &[f64], g: &[f64], lo: f64) -> f64 {
    x.iter()
        .zip(g)
        .map(|(&xk, &gk)| ((xk + gk).clamp(lo, 0.0) - xk).abs())
        .fold(0.0, f64::max)
}

/// Maximize a node objective over the box. The accepted-iterate objective
/// sequence is non-decreasing; iteration stops at the gradient tolerance,
/// the iteration cap, or when no ascent step is representable.
pub fn solve_node(problem: &NodeProblem, config: &SolverConfig) -> Result<SolverState> {
    solve(problem, config, None)
}

/// As [`solve_node`], additionally returning the objective value at every
/// accepted iterate (for diagnostics and monotonicity checks).
pub fn solve_node_with_trace(
    problem: &NodeProblem,
    config: &SolverConfig,
) -> Result<(SolverState, Vec<f64>)> {
    let mut trace = Vec::new();
    let state = solve(problem, config, Some(&mut trace))?;
    Ok((state, trace))
}

fn solve(
    problem: &NodeProblem,
    config: &SolverConfig,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<SolverState> {
    config.validate()?;
    let d = problem.dimension();
    if d == 0 {
        return Ok(SolverState {
            q_hat: Vec::new(),
            objective: 0.0,
            gradient_norm: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let lo = config.q_hat_min;
    let rho = config.rho;

    let mut x = vec![(1.0 - config.init_probability).ln(); d];
    let mut g = vec![0.0; d];
    let mut f = problem.eval_unchecked(&x, rho, Some(&mut g));
    if !f.is_finite() {
        return Err(Error::solver(format!(
            "node {}: objective not finite at the initial point",
            problem.node()
        )));
    }
    if let Some(t) = trace.as_deref_mut() {
        t.push(f);
    }

    let mut pg_norm = projected_gradient_norm(&x, &g, lo);
    let mut lambda = if pg_norm > 0.0 {
        (1.0 / pg_norm).clamp(LAMBDA_MIN, LAMBDA_MAX)
    } else {
        1.0
    };

    let mut x_new = vec![0.0; d];
    let mut g_new = vec![0.0; d];
    let mut dir = vec![0.0; d];
    let mut iterations = 0;
    let mut stalled = 0;

    while pg_norm > config.gradient_tolerance && iterations < config.max_iterations {
        iterations += 1;
        for k in 0..d {
            dir[k] = (x[k] + lambda * g[k]).clamp(lo, 0.0) - x[k];
        }
        let ascent: f64 = g.iter().zip(&dir).map(|(&gk, &dk)| gk * dk).sum();
        if ascent.is_nan() || ascent <= 0.0 {
            break; // projection fixed point at this precision
        }

        let mut step = 1.0;
        let mut f_new = f64::NEG_INFINITY;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            for k in 0..d {
                x_new[k] = x[k] + step * dir[k];
            }
            f_new = problem.objective_unchecked(&x_new, rho);
            if f_new.is_finite() && f_new >= f + ARMIJO_C1 * step * ascent {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break; // no representable ascent step left
        }

        let f_check = problem.eval_unchecked(&x_new, rho, Some(&mut g_new));
        debug_assert_eq!(f_check, f_new);

        let mut sy = 0.0;
        let mut ss = 0.0;
        for k in 0..d {
            let s = x_new[k] - x[k];
            let y = g_new[k] - g[k];
            sy += s * y;
            ss += s * s;
        }
        // concave objective: s'y <= 0 along an ascent step
        lambda = if sy < 0.0 {
            (ss / -sy).clamp(LAMBDA_MIN, LAMBDA_MAX)
        } else {
            LAMBDA_MAX
        };

        let improvement = f_new - f;
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        if let Some(t) = trace.as_deref_mut() {
            t.push(f);
        }
        pg_norm = projected_gradient_norm(&x, &g, lo);
        if improvement <= STALL_REL * (1.0 + f.abs()) {
            stalled += 1;
            if stalled >= STALL_LIMIT {
                break;
            }
        } else {
            stalled = 0;
        }
    }

    Ok(SolverState {
        converged: pg_norm <= config.gradient_tolerance,
        q_hat: x,
        objective: f,
        gradient_norm: pg_norm,
        iterations,
    })
}
