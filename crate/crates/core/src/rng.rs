//! Deterministic random streams.
//!
//! Every random quantity in the laboratory is keyed by a tuple of integers
//! (master seed, sample size, replication, row, imputation index, ...), so a
//! result never depends on the order in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep the draws of different pipeline stages disjoint.
pub mod tag {
    pub const GENERATE: u64 = 0x67656e;
    pub const IMPUTE: u64 = 0x696d70;
    pub const IMPUTE_PS: u64 = 0x697073;
}

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a seed and an ordered list of integers into a single stream key.
pub fn derive_key(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(mix64(seed), |acc, &p| mix64(acc.rotate_left(17) ^ mix64(p)))
}

/// A sequential generator for the stream identified by `(seed, parts)`.
pub fn stream(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_key(seed, parts))
}

/// Counter-based uniform on [0, 1) for draw `(row, index)` of stream `key`.
#[inline]
pub fn counter_uniform(key: u64, row: u64, index: u64) -> f64 {
    let h = mix64(mix64(key ^ mix64(row)).wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03)));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
