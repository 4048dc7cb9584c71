//! Instance generators and independent checks shared by the integration tests.
#![allow(dead_code)]

use esv_core::engine::AttributionResult;
use esv_core::model::synthetic::{random_features, SyntheticModel};
use esv_core::model::{load_model, CallCounter, ModelKind, Scorer};
use esv_core::sequence::{FeatureSequence, SubsequenceIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random model of `kind` with randomised sizes, and a random input of length `n`.
pub fn instance(kind: ModelKind, n: usize, seed: u64) -> (Scorer<f64>, FeatureSequence<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut synth = SyntheticModel::new(kind, seed);
    synth.classes = rng.random_range(1..=4);
    synth.feature_dim = rng.random_range(1..=5);
    synth.hidden = rng.random_range(2..=8);
    synth.n_max = rng.random_range(1..=4);
    synth.normalize = rng.random_bool(0.5);
    let model = load_model(&synth.spec()).expect("synthetic spec loads");
    let x = random_features(n, synth.feature_dim, seed.wrapping_mul(31).wrapping_add(7)).expect("features");
    (model, x)
}

/// Largest `|sum_i phi_i - (f(X) - f(empty))|` over the result's classes,
/// with both scores taken straight from the model.
pub fn efficiency_gap(model: &Scorer<f64>, x: &FeatureSequence<f64>, r: &AttributionResult<f64>) -> f64 {
    let calls = CallCounter::new();
    let full = model.evaluate(x, &SubsequenceIndex::full(x.len()), &calls).unwrap();
    let empty = model.evaluate(x, &SubsequenceIndex::empty(), &calls).unwrap();
    r.classes
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let total: f64 = r.phi.iter().map(|row| row[k]).sum();
            (total - (full.get(c) - empty.get(c))).abs()
        })
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn column(r: &AttributionResult<f64>, class: usize) -> Vec<f64> {
    r.phi_for(class).unwrap()
}

pub fn all_classes(model: &Scorer<f64>) -> Vec<usize> {
    (0..model.num_classes()).collect()
}
