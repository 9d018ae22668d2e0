//! Seed derivation and PCG substreams.
//!
//! All randomness in the crate flows through a single user-supplied seed.
//! Independent parts of a computation (each cascade in a batch, each run of
//! an experiment) get their own PCG64 stream so results do not depend on
//! scheduling order.

use rand_pcg::Pcg64;

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a list of tags.
///
/// Used to give every (network size, cascade count, run) cell of an
/// experiment its own independent seed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix64(master ^ 0x6C62_272E_07BB_0142);
    for &t in tags {
        s = splitmix64(s.rotate_left(17) ^ splitmix64(t.wrapping_add(0xA076_1D64_78BD_642F)));
    }
    s
}

/// PCG64 generator on stream `stream` of the generator family keyed by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> Pcg64 {
    let hi = splitmix64(seed) as u128;
    let lo = splitmix64(seed ^ 0x9E6C_63D0_876A_46BB) as u128;
    Pcg64::new((hi << 64) | lo, stream as u128)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let mut a = stream_rng(7, 0);
        let mut b = stream_rng(7, 0);
        let mut c = stream_rng(7, 1);
        let xa: u64 = a.gen();
        let xb: u64 = b.gen();
        let xc: u64 = c.gen();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn derive_seed_sensitive_to_tags() {
        let base = derive_seed(1, &[2, 3]);
        assert_ne!(base, derive_seed(1, &[3, 2]));
        assert_ne!(base, derive_seed(1, &[2, 3, 0]));
        assert_ne!(base, derive_seed(2, &[2, 3]));
        assert_eq!(base, derive_seed(1, &[2, 3]));
    }
}
