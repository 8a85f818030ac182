//! Counter-based random substreams.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by a seed
//! plus a path of integers (a tag and an index). Work split across threads
//! or reordered therefore produces the same values as a sequential run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Tags separating the independent uses of one seed.
pub mod tag {
    pub const SAMPLE: u64 = 1;
    pub const TRAIN_SPLIT: u64 = 2;
    pub const TEST_SPLIT: u64 = 3;
    pub const TEST_MORPH: u64 = 4;
    pub const COUNTERFACTUAL: u64 = 5;
    pub const ALPHA_CAP: u64 = 6;
    pub const PATCHMIX: u64 = 7;
    pub const REPLICATE: u64 = 8;
    pub const INIT: u64 = 9;
    pub const SHUFFLE: u64 = 10;
    pub const RANDOM_MODEL: u64 = 11;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a 64-bit key from a seed and a path.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019))))
}

/// An independent generator for `(seed, path)`.
pub fn substream(seed: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive(seed, path))
}
