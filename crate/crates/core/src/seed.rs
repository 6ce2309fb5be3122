//! Seed derivation.
//!
//! Every random draw in the crate comes from a ChaCha8 generator seeded with a
//! 64-bit value derived here, so a run is reproducible bit-for-bit across
//! platforms. The mixing function is SplitMix64's finalizer:
//!
//! ```text
//! z = x + 0x9E3779B97F4A7C15
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z ^ (z >> 31)
//! ```
//!
//! with wrapping arithmetic. Per-episode seeds are
//! `splitmix64(master_seed + episode_index)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of episode `index` in an experiment with `master` seed.
pub fn episode_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index))
}

/// Independent sub-stream of `seed` for a (tag, index) pair.
pub fn derive(seed: u64, tag: Stream, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64((tag as u64) << 48 ^ index))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Named sub-streams used by the closed loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Reset = 1,
    Env = 2,
    Measure = 3,
    Action = 4,
    Sense = 5,
    Candidates = 6,
    Final = 7,
    Training = 8,
}
