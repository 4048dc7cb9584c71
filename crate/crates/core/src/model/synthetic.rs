//! Randomly parameterised model descriptions and feature sequences for tests,
//! demos and the approximation-quality harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::spec::{ModelKind, ModelSpec, ParameterArray, PriorSpec, MODEL_FORMAT};
use crate::error::Result;
use crate::sequence::FeatureSequence;

#[derive(Debug, Clone)]
pub struct SyntheticModel {
    pub kind: ModelKind,
    pub classes: usize,
    pub feature_dim: usize,
    pub hidden: usize,
    /// Only used by `per-scale-mlp`.
    pub n_max: usize,
    pub normalize: bool,
    /// Standard deviation multiplier applied to `1/sqrt(fan_in)`.
    pub weight_scale: f64,
    pub seed: u64,
}

impl SyntheticModel {
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        Self {
            kind,
            classes: 3,
            feature_dim: 4,
            hidden: 8,
            n_max: 4,
            normalize: false,
            weight_scale: 1.0,
            seed,
        }
    }

    pub fn spec(&self) -> ModelSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (c, d, h) = (self.classes, self.feature_dim, self.hidden);
        let mut params = Vec::new();
        let mut push = |name: String, shape: Vec<usize>, fan_in: usize, rng: &mut ChaCha8Rng| {
            let std = self.weight_scale / (fan_in as f64).sqrt();
            let len = shape.iter().product();
            let data = (0..len).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
            params.push(ParameterArray { name, shape, data });
        };
        let mut mlp = |prefix: &str, input: usize, rng: &mut ChaCha8Rng| {
            push(format!("{prefix}w1"), vec![h, input], input, rng);
            push(format!("{prefix}b1"), vec![h], input, rng);
            push(format!("{prefix}w2"), vec![c, h], h, rng);
            push(format!("{prefix}b2"), vec![c], h, rng);
        };
        match self.kind {
            ModelKind::LinearAdditive => {
                let std = self.weight_scale / (d as f64).sqrt();
                let data = (0..c * d).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
                params.push(ParameterArray {
                    name: "weights".into(),
                    shape: vec![c, d],
                    data,
                });
            }
            ModelKind::MeanPoolMlp => mlp("", d, &mut rng),
            ModelKind::PairwiseRelational => {
                let std = self.weight_scale / (d as f64).sqrt();
                let data = (0..c * d).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
                let unary = ParameterArray {
                    name: "unary".into(),
                    shape: vec![c, d],
                    data,
                };
                mlp("pair.", 2 * d, &mut rng);
                params.insert(0, unary);
            }
            ModelKind::PerScaleMlp => {
                for s in 1..=self.n_max {
                    mlp(&format!("scale{s}."), s * d, &mut rng);
                }
            }
        }
        let empty_prior = if self.normalize {
            PriorSpec {
                scores: vec![1.0 / c as f64; c],
                distribution: true,
            }
        } else {
            PriorSpec {
                scores: vec![0.0; c],
                distribution: false,
            }
        };
        ModelSpec {
            format: MODEL_FORMAT.into(),
            kind: self.kind.as_str().into(),
            classes: c,
            feature_dim: d,
            n_max: (self.kind == ModelKind::PerScaleMlp).then_some(self.n_max),
            normalize: self.normalize,
            parameters: params,
            empty_prior,
        }
    }
}

/// `n x dim` standard-normal features.
pub fn random_features(n: usize, dim: usize, seed: u64) -> Result<FeatureSequence<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    FeatureSequence::from_flat(data, n, dim)
}
