//! Seed derivation for reproducible parallel sampling.
//!
//! Every unit of random work (a realization at a given training-set size, a
//! point draw, a field draw) gets its own counter-derived stream, so results
//! are independent of scheduling and thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; mixes a 64-bit value into an uncorrelated one.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream seed for realization `r` of a sweep point with `p` training samples.
pub fn stream_seed(base_seed: u64, p: usize, r: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(p as u64) ^ splitmix64(r.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// Sub-seed for a named role within one stream (points, field, ...).
pub fn substream(seed: u64, role: u64) -> u64 {
    splitmix64(seed ^ splitmix64(role.wrapping_add(0xda94_2042_e4dd_58b5)))
}

/// Seed to use when retrying a failed realization once.
pub fn retry_seed(seed: u64) -> u64 {
    splitmix64(seed ^ 0x9e6c_63d0_876a_68e5)
}

pub const ROLE_POINTS: u64 = 1;
pub const ROLE_FIELD: u64 = 2;

/// The crate-wide generator: portable, fast, seekable.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
