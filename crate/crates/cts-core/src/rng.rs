//! Seed derivation and counter-based sampling.
//!
//! All randomness in the pipeline flows from one master seed. Stage and
//! stream seeds are derived with splitmix64, so any unit of work (a week,
//! a walk, a tensor entry) can be re-generated in isolation and in any
//! order without touching shared RNG state.
//!
//! Derivation rule: `derive_seed(master, stream)` advances a splitmix64
//! state initialized at `master` by `stream + 1` golden-ratio increments
//! and returns the mixed output. Two-level streams chain the rule.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 output function (Stafford variant 13 finalizer).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Advance a splitmix64 state and return the next output.
#[inline]
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    mix64(*state)
}

/// Derive the seed for sub-stream `stream` of `master`.
#[inline]
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    mix64(master.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Derive a seed from two stream indices (e.g. walk round and start node).
#[inline]
pub fn derive_seed2(master: u64, a: u64, b: u64) -> u64 {
    derive_seed(derive_seed(master, a), b)
}

/// Deterministic RNG for a derived seed.
pub fn seeded_rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Map a u64 to a uniform double in the open interval (0, 1).
#[inline]
fn u64_to_open01(x: u64) -> f64 {
    // 53 mantissa bits, offset by half an ulp so 0 is never produced.
    ((x >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal deviate keyed by (seed, i, j, alpha, beta).
///
/// Counter-based: the value depends only on the key, never on generation
/// order, so tensors can be sampled in parallel or re-materialized
/// slice-by-slice without storing them.
#[inline]
pub fn gaussian_entry(seed: u64, i: usize, j: usize, alpha: usize, beta: usize) -> f64 {
    let mut s = derive_seed2(seed, alpha as u64, beta as u64);
    s = derive_seed2(s, i as u64, j as u64);
    let u1 = u64_to_open01(splitmix64(&mut s));
    let u2 = u64_to_open01(splitmix64(&mut s));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_vectors() {
        // Published splitmix64 outputs for seed 0.
        let mut s = 0u64;
        assert_eq!(splitmix64(&mut s), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(&mut s), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(splitmix64(&mut s), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn derive_seed_is_stream_indexed_splitmix() {
        let mut s = 42u64;
        let first = splitmix64(&mut s);
        let second = splitmix64(&mut s);
        assert_eq!(derive_seed(42, 0), first);
        assert_eq!(derive_seed(42, 1), second);
    }

    #[test]
    fn derived_streams_differ() {
        let a = derive_seed(7, 0);
        let b = derive_seed(7, 1);
        let c = derive_seed(8, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(derive_seed2(7, 1, 2), derive_seed2(7, 2, 1));
    }

    #[test]
    fn gaussian_entry_is_order_independent_and_sane() {
        let x = gaussian_entry(9, 3, 5, 1, 0);
        let y = gaussian_entry(9, 3, 5, 1, 0);
        assert_eq!(x.to_bits(), y.to_bits());
        assert!(x.is_finite());

        // Moments over a modest sample.
        let n = 40_000usize;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for i in 0..200 {
            for j in 0..200 {
                let v = gaussian_entry(123, i, j, 0, 0);
                sum += v;
                sq += v * v;
            }
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }
}
