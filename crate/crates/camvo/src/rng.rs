//! Deterministic random streams.
//!
//! Every random draw in the crate comes from a ChaCha12 stream keyed by
//! mixing the run seed with a purpose tag (and, where relevant, the round
//! and subset). Streams for different purposes never interleave, so turning
//! one consumer on or off cannot perturb the draws seen by another.

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::numeric::inv_std_normal_cdf;

/// Purpose tags for derived streams. Arbitrary distinct constants.
pub mod purpose {
    pub const SHUFFLE: u64 = 0x01;
    pub const MC_CONFIDENCE: u64 = 0x02;
    pub const SYNTH_WEIGHTS: u64 = 0x03;
    pub const SYNTH_ROUNDS: u64 = 0x04;
    pub const SYNTH_LABELS: u64 = 0x05;
    pub const COPULA_SAMPLE: u64 = 0x06;
}

/// SplitMix64 finalizer; a solid 64-bit mixer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Fold a seed and a list of tags into one stream key.
pub fn derive_key(seed: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix64(seed);
    for &t in tags {
        h = splitmix64(h ^ t);
    }
    h
}

/// A ChaCha12 stream for (seed, tags).
pub fn stream(seed: u64, tags: &[u64]) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_key(seed, tags))
}

/// Uniform f64 in the open interval (0, 1).
pub fn unit_open(rng: &mut ChaCha12Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw via the inverse CDF.
pub fn std_normal(rng: &mut ChaCha12Rng) -> f64 {
    inv_std_normal_cdf(unit_open(rng))
}

/// Unbiased integer in [0, n) (Lemire's method with rejection).
pub fn below(rng: &mut ChaCha12Rng, n: u64) -> u64 {
    debug_assert!(n > 0);
    let mut x = rng.next_u64();
    let mut m = (x as u128) * (n as u128);
    let mut low = m as u64;
    if low < n {
        let threshold = n.wrapping_neg() % n;
        while low < threshold {
            x = rng.next_u64();
            m = (x as u128) * (n as u128);
            low = m as u64;
        }
    }
    (m >> 64) as u64
}
