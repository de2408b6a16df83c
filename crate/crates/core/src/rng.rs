//! Counter-based random numbers for reproducible shot sampling.
//!
//! Every draw is a pure function of `(key, counter)`:
//!
//! ```text
//! u64(key, n) = mix64(key + (n + 1) · GOLDEN_GAMMA)      (wrapping)
//! f64(key, n) = (u64(key, n) >> 11) · 2⁻⁵³                in [0, 1)
//! ```
//!
//! which is exactly the `n`-th output of a SplitMix64 stream seeded with
//! `key`. Shots are grouped into blocks of [`BLOCK_SHOTS`]; block `b` of a
//! run with master seed `s` uses `key = block_key(s, b)`. Blocks can therefore
//! be drawn in any order, or in parallel, without changing the result.

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Shots per independently keyed block.
pub const BLOCK_SHOTS: u64 = 1 << 16;

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn counter_u64(key: u64, counter: u64) -> u64 {
    mix64(key.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

#[inline]
pub fn counter_f64(key: u64, counter: u64) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    (counter_u64(key, counter) >> 11) as f64 * SCALE
}

/// Key of shot block `block` under `master_seed`.
#[inline]
pub fn block_key(master_seed: u64, block: u64) -> u64 {
    mix64(master_seed ^ counter_u64(0x5EED_B10C_0000_0000, block))
}

/// Independent child seed, used when one run spawns several sampled sub-runs.
#[inline]
pub fn derive_seed(master_seed: u64, stream: u64) -> u64 {
    mix64(master_seed ^ counter_u64(0xC41D_5EED_0000_0000, stream))
}
