//! Scoring models: the pluggable scorer abstraction, the multi-scale
//! aggregate, built-in synthetic kinds and their on-disk description.

mod builtin;
mod combine;
mod multiscale;
mod spec;
pub mod synthetic;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub use builtin::{Dense, LinearAdditive, MeanPoolMlp, Mlp, PairwiseRelational, ScaleMlp};
pub use combine::{CombinedFixedScale, CombinedModel};
pub use multiscale::{multiscale_direct, multiscale_recurrent, MultiScaleModel, ScoreTable, HARD_EXHAUSTIVE_LIMIT};
pub use spec::{load_model, ModelKind, ModelSpec, ParameterArray, PriorSpec, MODEL_FORMAT};

use crate::error::{EsvError, Result};
use crate::scalar::Scalar;
use crate::sequence::{FeatureSequence, SubsequenceIndex};

/// Per-class model output.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores<T>(Vec<T>);

impl<T: Scalar> ClassScores<T> {
    pub fn new(scores: Vec<T>) -> Result<Self> {
        if scores.is_empty() {
            return Err(EsvError::validation("scores", "at least one class is required"));
        }
        if let Some(c) = scores.iter().position(|v| !v.is_finite()) {
            return Err(EsvError::validation(
                format!("scores[{c}]"),
                "class scores must be finite",
            ));
        }
        Ok(ClassScores(scores))
    }

    pub(crate) fn from_vec_unchecked(scores: Vec<T>) -> Self {
        ClassScores(scores)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, class: usize) -> T {
        self.0[class]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    /// Index of the largest score; ties go to the lowest class index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (c, v) in self.0.iter().enumerate() {
            if *v > self.0[best] {
                best = c;
            }
        }
        best
    }
}

/// Model output on the empty sequence, `f(∅)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmptyPrior<T> {
    scores: ClassScores<T>,
    distribution: bool,
}

impl<T: Scalar> EmptyPrior<T> {
    /// `distribution = true` additionally requires nonnegative entries summing to one.
    pub fn new(scores: Vec<T>, distribution: bool) -> Result<Self> {
        let scores = ClassScores::new(scores)?;
        if distribution {
            if scores.0.iter().any(|v| *v < T::zero()) {
                return Err(EsvError::validation(
                    "empty_prior.scores",
                    "distribution entries must be nonnegative",
                ));
            }
            let total = crate::scalar::compensated_sum(scores.0.iter().copied());
            let tol = T::lit(1e-9).max(T::epsilon() * T::from_count(4 * scores.len()));
            if (total - T::one()).abs() > tol {
                return Err(EsvError::validation(
                    "empty_prior.scores",
                    format!("distribution must sum to 1, sums to {total}"),
                ));
            }
        }
        Ok(Self { scores, distribution })
    }

    pub fn zeros(classes: usize) -> Self {
        Self {
            scores: ClassScores(vec![T::zero(); classes]),
            distribution: false,
        }
    }

    pub fn uniform(classes: usize) -> Self {
        Self {
            scores: ClassScores(vec![T::one() / T::from_count(classes); classes]),
            distribution: true,
        }
    }

    pub fn scores(&self) -> &ClassScores<T> {
        &self.scores
    }

    pub fn is_distribution(&self) -> bool {
        self.distribution
    }
}

/// Monotonic count of non-empty model evaluations.
///
/// For multi-scale models every single-scale call counts once.
#[derive(Debug, Default)]
pub struct CallCounter(AtomicU64);

impl CallCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn record(&self, calls: u64) {
        self.0.fetch_add(calls, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// A model that accepts any nonempty, order-preserving selection of elements.
pub trait VariableLengthModel<T: Scalar>: Send + Sync {
    fn num_classes(&self) -> usize;
    fn feature_dim(&self) -> usize;
    /// `elements` is nonempty and in sequence order.
    fn forward(&self, elements: &[&[T]]) -> Vec<T>;
}

/// A model that only accepts inputs of exactly `scale()` elements.
pub trait FixedScaleModel<T: Scalar>: Send + Sync {
    fn scale(&self) -> usize;
    fn num_classes(&self) -> usize;
    fn feature_dim(&self) -> usize;
    fn forward(&self, elements: &[&[T]]) -> Vec<T>;
}

/// A variable-length model together with its empty prior.
#[derive(Clone)]
pub struct DirectScorer<T> {
    model: Arc<dyn VariableLengthModel<T>>,
    prior: EmptyPrior<T>,
    normalize: bool,
}

impl<T: Scalar> DirectScorer<T> {
    pub fn new(model: Arc<dyn VariableLengthModel<T>>, prior: EmptyPrior<T>, normalize: bool) -> Result<Self> {
        if prior.scores().len() != model.num_classes() {
            return Err(EsvError::validation(
                "empty_prior.scores",
                format!(
                    "expected {} classes, found {}",
                    model.num_classes(),
                    prior.scores().len()
                ),
            ));
        }
        Ok(Self {
            model,
            prior,
            normalize,
        })
    }

    pub fn model(&self) -> &Arc<dyn VariableLengthModel<T>> {
        &self.model
    }

    /// Scores a nonempty subsequence; one model call.
    pub fn score(&self, x: &FeatureSequence<T>, sub: &SubsequenceIndex, calls: &CallCounter) -> Result<ClassScores<T>> {
        calls.record(1);
        let out = self.model.forward(&x.select(sub));
        finish_scores(out, self.normalize)
    }
}

/// Anything the attribution engine can explain.
///
/// Variable-length models are scored directly on every subsequence; fixed-scale
/// models are combined into a [`MultiScaleModel`].
#[derive(Clone)]
pub enum Scorer<T> {
    VariableLength(DirectScorer<T>),
    MultiScale(MultiScaleModel<T>),
}

impl<T: Scalar> Scorer<T> {
    pub fn num_classes(&self) -> usize {
        match self {
            Scorer::VariableLength(d) => d.model.num_classes(),
            Scorer::MultiScale(m) => m.num_classes(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            Scorer::VariableLength(d) => d.model.feature_dim(),
            Scorer::MultiScale(m) => m.feature_dim(),
        }
    }

    pub fn empty_prior(&self) -> &EmptyPrior<T> {
        match self {
            Scorer::VariableLength(d) => &d.prior,
            Scorer::MultiScale(m) => m.empty_prior(),
        }
    }

    pub fn is_variable_length(&self) -> bool {
        matches!(self, Scorer::VariableLength(_))
    }

    pub fn as_multiscale(&self) -> Option<&MultiScaleModel<T>> {
        match self {
            Scorer::MultiScale(m) => Some(m),
            Scorer::VariableLength(_) => None,
        }
    }

    /// Checks that `x` has the model's feature dimension.
    pub fn check_input(&self, x: &FeatureSequence<T>) -> Result<()> {
        if x.dim() != self.feature_dim() {
            return Err(EsvError::validation(
                "features",
                format!(
                    "model expects {} features per element, input has {}",
                    self.feature_dim(),
                    x.dim()
                ),
            ));
        }
        Ok(())
    }

    pub fn check_class(&self, class: usize) -> Result<()> {
        if class >= self.num_classes() {
            return Err(EsvError::validation(
                "class",
                format!(
                    "class {class} out of range for a model with {} classes",
                    self.num_classes()
                ),
            ));
        }
        Ok(())
    }

    /// Scores `sub` of `x`. The empty subsequence returns the prior without a model call.
    ///
    /// Multi-scale models use the exhaustive direct form here.
    pub fn evaluate(
        &self,
        x: &FeatureSequence<T>,
        sub: &SubsequenceIndex,
        calls: &CallCounter,
    ) -> Result<ClassScores<T>> {
        self.check_input(x)?;
        x.check_subsequence(sub)?;
        if sub.is_empty() {
            return Ok(self.empty_prior().scores().clone());
        }
        match self {
            Scorer::VariableLength(d) => d.score(x, sub, calls),
            Scorer::MultiScale(m) => multiscale_direct(m, sub, x, calls),
        }
    }

    /// The one-class scorer `sum_k w_k f_{c_k}`.
    /// Restricts a multi-scale model to scales `1..=n_max`.
    pub fn with_max_scale(&self, n_max: usize) -> Result<Scorer<T>> {
        match self {
            Scorer::MultiScale(m) => Ok(Scorer::MultiScale(m.truncated(n_max)?)),
            Scorer::VariableLength(_) => Err(EsvError::validation("nmax", "only multi-scale models have scales")),
        }
    }

    pub fn class_combination(&self, terms: &[(usize, T)]) -> Result<Scorer<T>> {
        for &(c, _) in terms {
            self.check_class(c)?;
        }
        if terms.is_empty() {
            return Err(EsvError::validation(
                "terms",
                "class combination needs at least one term",
            ));
        }
        combine::combine(self, terms)
    }
}

/// Scores of all `2^n` subsequences of `x`.
///
/// Multi-scale models use the bottom-up recurrence; variable-length models are
/// evaluated directly on every nonempty subsequence.
pub fn score_table<T: Scalar>(
    model: &Scorer<T>,
    x: &FeatureSequence<T>,
    calls: &CallCounter,
    limit: usize,
) -> Result<ScoreTable<T>> {
    use rayon::prelude::*;

    model.check_input(x)?;
    match model {
        Scorer::MultiScale(m) => multiscale_recurrent(m, x, calls, limit),
        Scorer::VariableLength(d) => {
            let n = x.len();
            multiscale::check_exhaustive(n, limit)?;
            let c = d.model.num_classes();
            let mut data = vec![T::zero(); (1usize << n) * c];
            data.par_chunks_mut(c)
                .enumerate()
                .try_for_each(|(mask, out)| -> Result<()> {
                    if mask == 0 {
                        out.copy_from_slice(d.prior.scores().as_slice());
                    } else {
                        let scores = d.score(x, &SubsequenceIndex::from_mask(mask as u64), calls)?;
                        out.copy_from_slice(scores.as_slice());
                    }
                    Ok(())
                })?;
            Ok(ScoreTable::from_parts(n, c, data))
        }
    }
}

pub(crate) fn finish_scores<T: Scalar>(mut out: Vec<T>, normalize: bool) -> Result<ClassScores<T>> {
    if normalize {
        softmax_in_place(&mut out);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(EsvError::Contract("model produced a non-finite score".into()));
    }
    Ok(ClassScores::from_vec_unchecked(out))
}

pub(crate) fn softmax_in_place<T: Scalar>(v: &mut [T]) {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        total = total + *x;
    }
    for x in v.iter_mut() {
        *x = *x / total;
    }
}
