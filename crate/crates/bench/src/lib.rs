//! Seeded workloads shared by the runtime benchmarks.

use memtrack_core::linalg::random_tensor;
use memtrack_core::metrics::Sequence;
use memtrack_core::tim::{TimParams, TrackBatch};
use memtrack_core::{generate, oracle, Layout, Model, Scenario, ScenarioConfig, ScenarioKind, StructuredConfig, TimVariant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn cost_matrix(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).collect()
}

/// Random ground truth with a perturbed prediction.
pub fn metric_pair(targets: usize, frames: u32, seed: u64) -> (Sequence, Sequence) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    oracle::random_instance(&mut rng, targets, frames)
}

pub fn dance(targets: usize, frames: u32, seed: u64) -> Scenario {
    generate(&ScenarioConfig::new(ScenarioKind::Dance, targets, frames, seed)).expect("valid scenario")
}

pub fn structured_model() -> Model {
    Model::structured(&Layout::new(64).expect("valid width"), &StructuredConfig::default(), TimVariant::Full)
        .expect("structured model")
}

pub fn tim_batch(n: usize, d: usize, seed: u64) -> (TimParams, TrackBatch) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = TimParams::random(&mut rng, d, 4);
    let b = TrackBatch::new(
        (1..=n as u64).collect(),
        random_tensor(&mut rng, n, d, 1.0),
        random_tensor(&mut rng, n, d, 1.0),
        random_tensor(&mut rng, n, d, 1.0),
    )
    .expect("consistent batch");
    (p, b)
}
