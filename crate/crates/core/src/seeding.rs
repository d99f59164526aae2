//! Counter-based seed derivation.
//!
//! Every random stream in a run is derived from a master seed plus a short
//! path of integer tags (solver kind, purpose, counters). Streams never depend
//! on the order in which other streams were consumed, so parallel evaluation
//! and reruns reproduce the same bytes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every stream in the crate.
pub type Rng = ChaCha8Rng;

/// Purpose tags for sub-streams of a (solver, seed) run.
pub mod purpose {
    pub const PROPOSALS: u64 = 0x50524f50;
    pub const RENDER: u64 = 0x52454e44;
    pub const SHOTS: u64 = 0x53484f54;
    pub const SURROGATE: u64 = 0x53555252;
    pub const NOISE: u64 = 0x4e4f4953;
    pub const SPLITS: u64 = 0x53504c54;
    pub const FOREST: u64 = 0x46525354;
}

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable hash of a path of integers.
pub fn mix(parts: &[u64]) -> u64 {
    let mut h = 0x6A09_E667_F3BC_C908u64 ^ parts.len() as u64;
    for &p in parts {
        h = splitmix64(h ^ splitmix64(p));
    }
    h
}

/// Stable hash of a name, for folding string identifiers into seed paths.
pub fn name_tag(name: &str) -> u64 {
    // FNV-1a, then finalized.
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(h)
}

/// Seeded stream for a path of tags.
pub fn stream(parts: &[u64]) -> Rng {
    Rng::seed_from_u64(mix(parts))
}

/// Maps a hash to a uniform double in `[0, 1)`.
#[inline]
pub fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
