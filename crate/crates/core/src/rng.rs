//! Counter-based uniform generator for weight initialization.
//!
//! Each draw is SplitMix64's output function applied to a key derived from
//! `(seed, index)`, so entry `i` never depends on how many other entries were
//! drawn or in which order. The mapping is simple enough to reimplement
//! bit-for-bit in any language.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64 random bits for position `index` of stream `seed`.
pub fn keyed_u64(seed: u64, index: u64) -> u64 {
    let stream = splitmix64(seed.wrapping_add(GAMMA));
    splitmix64(stream.wrapping_add(index.wrapping_add(1).wrapping_mul(GAMMA)))
}

/// Uniform on `[0, 1)` with 53 bits of resolution.
pub fn keyed_unit(seed: u64, index: u64) -> f64 {
    (keyed_u64(seed, index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on `[lo, hi)`.
pub fn keyed_uniform(seed: u64, index: u64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * keyed_unit(seed, index)
}
