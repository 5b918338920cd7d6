//! Shared inputs for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vesseltopo::synth::{vessel_tree, TreeFixture};
use vesseltopo::{Grid, ProbMap};

/// The 64x64 synthetic tree with its corrupted copies.
pub fn tree() -> TreeFixture {
    vessel_tree(64, 6)
}

/// Soft prediction around `truth`: high on vessels, low elsewhere, with
/// seeded jitter so no two pixels tie.
pub fn soft_prediction(truth: &vesseltopo::BinaryMask, seed: u64) -> ProbMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = truth
        .data()
        .iter()
        .map(|&v| {
            let base = if v { 0.8 } else { 0.15 };
            base + rng.random_range(-0.1..0.1)
        })
        .collect();
    ProbMap::new(truth.width(), truth.height(), values).expect("values stay in [0, 1]")
}
