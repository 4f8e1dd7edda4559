//! Seed stream splitting.
//!
//! A child seed is computed from a parent seed and a path of labels with the
//! SplitMix64 finaliser: `derive(seed, &[a, b])` folds each label into the
//! state as `state = mix(state ^ mix(label + GOLDEN))`. Distinct label paths
//! give statistically independent ChaCha streams, and the scheme is stable
//! across platforms and thread counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a label path.
pub fn derive(seed: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(mix(seed), |state, &label| mix(state ^ mix(label.wrapping_add(GOLDEN))))
}

/// Well-known stream labels used by the pipelines.
pub mod stream {
    pub const FOREST: u64 = 1;
    pub const SKETCH: u64 = 2;
    pub const KMEANS: u64 = 3;
    pub const BASE_GRAPH: u64 = 4;
    pub const INJECT: u64 = 5;
    pub const DECOY: u64 = 6;
    pub const BURST: u64 = 7;
    pub const EXPERIMENT: u64 = 8;
    pub const SCALING: u64 = 9;
}

/// A ChaCha8 generator seeded from `derive(seed, labels)`.
pub fn chacha(seed: u64, labels: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, labels))
}
