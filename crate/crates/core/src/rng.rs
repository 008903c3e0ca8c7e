//! Seed derivation for reproducible parallel Monte Carlo.
//!
//! Every random draw in the crate comes from a ChaCha8 stream seeded by a
//! 64-bit value. Independent streams are derived from a base seed with
//! [`mix`], a SplitMix64-based combiner, so a trial's stream depends only on
//! `(base_seed, indices)` and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name and version of the generator contract. Pinned regression values in
/// the tests are valid for this contract only.
pub const GENERATOR_ID: &str = "chacha8+splitmix64-mix/v1";

pub type Generator = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of sub-stream `index` from `seed`.
pub fn mix(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_mul(GOLDEN_GAMMA) ^ 0x5851_f42d_4c95_7f2d))
}

/// Folds a path of indices into a seed: `mix(mix(seed, a), b)...`.
pub fn mix_path(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |acc, &i| mix(acc, i))
}

pub fn generator(seed: u64) -> Generator {
    ChaCha8Rng::seed_from_u64(seed)
}
