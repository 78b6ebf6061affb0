//! Seed derivation and the crate's RNG type.
//!
//! Every random stream is a `ChaCha8Rng` seeded from a 64-bit value that is
//! derived by hashing a tuple of integers, so the stream for (global seed,
//! category, instance) never depends on the order in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes an ordered tuple of integers into a single seed.
pub fn derive(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream tags, so streams derived from the same parent seed never alias.
pub(crate) mod tag {
    pub const SEARCH: u64 = 1;
    pub const CATEGORY: u64 = 2;
    pub const INSTANCE: u64 = 3;
    pub const COLOR: u64 = 4;
    pub const INIT: u64 = 6;
    pub const SHUFFLE: u64 = 7;
    pub const AUGMENT: u64 = 8;
    pub const HEAD: u64 = 9;
}
