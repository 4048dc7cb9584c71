use std::sync::Arc;

use rayon::prelude::*;

use super::{finish_scores, CallCounter, ClassScores, EmptyPrior, FixedScaleModel};
use crate::error::{EsvError, Result};
use crate::scalar::{CompensatedSum, Scalar};
use crate::sequence::{enumerate_subsequences, FeatureSequence, SubsequenceIndex};

/// Equal-weight aggregate of single-scale models `f^1 .. f^{n_max}`.
///
/// On an input of length `k` the output is the mean over scales
/// `s = 1..=min(k, n_max)` of the mean of `f^s` over all size-`s`
/// subsequences of the input.
#[derive(Clone)]
pub struct MultiScaleModel<T> {
    scales: Vec<Arc<dyn FixedScaleModel<T>>>,
    prior: EmptyPrior<T>,
    normalize: bool,
    classes: usize,
    dim: usize,
}

impl<T: Scalar> MultiScaleModel<T> {
    /// `scales[s - 1]` must accept exactly `s` elements.
    pub fn new(scales: Vec<Arc<dyn FixedScaleModel<T>>>, prior: EmptyPrior<T>, normalize: bool) -> Result<Self> {
        let first = scales
            .first()
            .ok_or_else(|| EsvError::validation("scales", "at least one scale is required"))?;
        let classes = first.num_classes();
        let dim = first.feature_dim();
        for (k, f) in scales.iter().enumerate() {
            if f.scale() != k + 1 {
                return Err(EsvError::validation(
                    format!("scales[{k}]"),
                    format!("expected a scale-{} model, found scale {}", k + 1, f.scale()),
                ));
            }
            if f.num_classes() != classes || f.feature_dim() != dim {
                return Err(EsvError::validation(
                    format!("scales[{k}]"),
                    "all scales must share class count and feature dimension",
                ));
            }
        }
        if prior.scores().len() != classes {
            return Err(EsvError::validation(
                "empty_prior.scores",
                format!("expected {classes} classes, found {}", prior.scores().len()),
            ));
        }
        Ok(Self {
            scales,
            prior,
            normalize,
            classes,
            dim,
        })
    }

    pub fn n_max(&self) -> usize {
        self.scales.len()
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn feature_dim(&self) -> usize {
        self.dim
    }

    pub fn empty_prior(&self) -> &EmptyPrior<T> {
        &self.prior
    }

    pub fn normalize(&self) -> bool {
        self.normalize
    }

    pub fn scale_models(&self) -> &[Arc<dyn FixedScaleModel<T>>] {
        &self.scales
    }

    /// The same model restricted to scales `1..=n_max`.
    pub fn truncated(&self, n_max: usize) -> Result<Self> {
        if n_max == 0 || n_max > self.n_max() {
            return Err(EsvError::validation(
                "nmax",
                format!("must be between 1 and the model's largest scale {}", self.n_max()),
            ));
        }
        Ok(Self {
            scales: self.scales[..n_max].to_vec(),
            ..self.clone()
        })
    }

    /// Runs `f^s` with `s = elements.len()`.
    pub fn single_scale(&self, elements: &[&[T]], calls: &CallCounter) -> Result<ClassScores<T>> {
        let s = elements.len();
        if s == 0 || s > self.n_max() {
            return Err(EsvError::Contract(format!(
                "no single-scale model accepts {s} elements (n_max = {})",
                self.n_max()
            )));
        }
        calls.record(1);
        finish_scores(self.scales[s - 1].forward(elements), self.normalize)
    }

    fn single_scale_sub(
        &self,
        x: &FeatureSequence<T>,
        sub: &SubsequenceIndex,
        calls: &CallCounter,
    ) -> Result<ClassScores<T>> {
        self.single_scale(&x.select(sub), calls)
    }
}

/// Multi-scale score of `sub` by exhaustive enumeration (exponential in `|sub|`).
pub fn multiscale_direct<T: Scalar>(
    msm: &MultiScaleModel<T>,
    sub: &SubsequenceIndex,
    x: &FeatureSequence<T>,
    calls: &CallCounter,
) -> Result<ClassScores<T>> {
    if sub.is_empty() {
        return Err(EsvError::Contract(
            "the empty subsequence is scored by the empty prior, not the multi-scale model".into(),
        ));
    }
    x.check_subsequence(sub)?;
    let positions = sub.to_vec();
    let k = positions.len();
    let top = k.min(msm.n_max());
    let c = msm.num_classes();
    let mut across_scales = vec![CompensatedSum::<T>::new(); c];
    for s in 1..=top {
        let mut within = vec![CompensatedSum::<T>::new(); c];
        let mut count = 0usize;
        for combo in enumerate_subsequences(k, s, None)? {
            let elements: Vec<&[T]> = combo.positions().map(|j| x.element(positions[j])).collect();
            let scores = msm.single_scale(&elements, calls)?;
            for (acc, v) in within.iter_mut().zip(scores.as_slice()) {
                acc.add(*v);
            }
            count += 1;
        }
        let denom = T::from_count(count);
        for (acc, w) in across_scales.iter_mut().zip(&within) {
            acc.add(w.value() / denom);
        }
    }
    let denom = T::from_count(top);
    Ok(ClassScores::from_vec_unchecked(
        across_scales.iter().map(|a| a.value() / denom).collect(),
    ))
}

/// Scores of every subsequence of a sequence, indexed by bitmask.
///
/// Entry `0` is the empty prior.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable<T> {
    n: usize,
    classes: usize,
    data: Vec<T>,
}

impl<T: Scalar> ScoreTable<T> {
    pub(crate) fn from_parts(n: usize, classes: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), (1usize << n) * classes);
        Self { n, classes, data }
    }

    pub fn sequence_len(&self) -> usize {
        self.n
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, mask: u64) -> &[T] {
        let at = mask as usize * self.classes;
        &self.data[at..at + self.classes]
    }

    pub fn get_sub(&self, sub: &SubsequenceIndex) -> Option<&[T]> {
        sub.as_mask()
            .filter(|m| (*m as u128) < (1u128 << self.n))
            .map(|m| self.get(m))
    }

    /// `(mask, scores)` for every subsequence, in mask order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &[T])> {
        self.data
            .chunks_exact(self.classes)
            .enumerate()
            .map(|(m, s)| (m as u64, s))
    }
}

/// Largest sequence the exhaustive table routines accept regardless of configuration.
pub const HARD_EXHAUSTIVE_LIMIT: usize = 26;

pub(crate) fn check_exhaustive(n: usize, limit: usize) -> Result<()> {
    let limit = limit.min(HARD_EXHAUSTIVE_LIMIT);
    if n > limit {
        return Err(EsvError::Capacity {
            what: "sequence length",
            requested: n,
            limit,
        });
    }
    Ok(())
}

/// Bottom-up multi-scale scores for all `2^n` subsequences.
///
/// Size-1 entries are `f^1`; a size-`k` entry with `k <= n_max` is
/// `(f^k + (k - 1) * mean_children) / k`; beyond `n_max` it is the plain mean of
/// its one-element-smaller children. Each `f^s` runs once per size-`s`
/// subsequence.
pub fn multiscale_recurrent<T: Scalar>(
    msm: &MultiScaleModel<T>,
    x: &FeatureSequence<T>,
    calls: &CallCounter,
    limit: usize,
) -> Result<ScoreTable<T>> {
    let n = x.len();
    check_exhaustive(n, limit)?;
    if x.dim() != msm.feature_dim() {
        return Err(EsvError::validation(
            "features",
            format!(
                "model expects {} features per element, input has {}",
                msm.feature_dim(),
                x.dim()
            ),
        ));
    }
    let c = msm.num_classes();
    let n_max = msm.n_max();
    let mut data = vec![T::zero(); (1usize << n) * c];

    // single-scale outputs are independent of each other
    data.par_chunks_mut(c)
        .enumerate()
        .try_for_each(|(mask, out)| -> Result<()> {
            let sub = SubsequenceIndex::from_mask(mask as u64);
            let k = sub.len();
            if mask == 0 {
                out.copy_from_slice(msm.empty_prior().scores().as_slice());
            } else if k <= n_max {
                out.copy_from_slice(msm.single_scale_sub(x, &sub, calls)?.as_slice());
            }
            Ok(())
        })?;

    // children of a mask are numerically smaller, so one ascending pass suffices
    let mut mean = vec![CompensatedSum::<T>::new(); c];
    for mask in 1usize..(1usize << n) {
        let k = mask.count_ones() as usize;
        if k == 1 {
            continue;
        }
        mean.iter_mut().for_each(|m| *m = CompensatedSum::new());
        let mut rest = mask;
        while rest != 0 {
            let bit = rest & rest.wrapping_neg();
            rest ^= bit;
            let child = (mask ^ bit) * c;
            for (acc, v) in mean.iter_mut().zip(&data[child..child + c]) {
                acc.add(*v);
            }
        }
        let kk = T::from_count(k);
        let at = mask * c;
        for (j, acc) in mean.iter().enumerate() {
            let children = acc.value() / kk;
            data[at + j] = if k <= n_max {
                (data[at + j] + (kk - T::one()) * children) / kk
            } else {
                children
            };
        }
    }
    Ok(ScoreTable::from_parts(n, c, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::synthetic::{random_features, SyntheticModel};
    use crate::model::{load_model, ModelKind};

    /// `f^s` returns `s * 100 + sum of first features`, one class.
    struct Tagged(usize);

    impl FixedScaleModel<f64> for Tagged {
        fn scale(&self) -> usize {
            self.0
        }
        fn num_classes(&self) -> usize {
            1
        }
        fn feature_dim(&self) -> usize {
            1
        }
        fn forward(&self, elements: &[&[f64]]) -> Vec<f64> {
            vec![self.0 as f64 * 100.0 + elements.iter().map(|e| e[0]).sum::<f64>()]
        }
    }

    fn tagged(n_max: usize) -> MultiScaleModel<f64> {
        let scales = (1..=n_max)
            .map(|s| Arc::new(Tagged(s)) as Arc<dyn FixedScaleModel<f64>>)
            .collect();
        MultiScaleModel::new(scales, EmptyPrior::zeros(1), false).unwrap()
    }

    #[test]
    fn pair_is_half_joint_plus_quarter_singles() {
        let msm = tagged(2);
        let x = FeatureSequence::new(vec![vec![1.0], vec![2.0]]).unwrap();
        let calls = CallCounter::new();
        let out = multiscale_direct(&msm, &SubsequenceIndex::full(2), &x, &calls).unwrap();
        let expected = 0.5 * (200.0 + 3.0) + 0.25 * (101.0 + 102.0);
        assert!((out.get(0) - expected).abs() < 1e-12);
        assert_eq!(calls.get(), 3);
        let single = multiscale_direct(&msm, &SubsequenceIndex::singleton(1), &x, &calls).unwrap();
        assert_eq!(single.get(0), 102.0);
    }

    #[test]
    fn rejects_empty_and_oversized_inputs() {
        let msm = tagged(2);
        let x = FeatureSequence::new(vec![vec![1.0]; 3]).unwrap();
        let calls = CallCounter::new();
        assert!(multiscale_direct(&msm, &SubsequenceIndex::empty(), &x, &calls).is_err());
        let e = [1.0];
        assert!(msm.single_scale(&[&e, &e, &e], &calls).is_err());
        assert!(msm.single_scale(&[], &calls).is_err());
    }

    #[test]
    fn truncation_keeps_leading_scales() {
        let msm = tagged(3);
        let short = msm.truncated(2).unwrap();
        assert_eq!(short.n_max(), 2);
        assert_eq!(short.scale_models()[1].scale(), 2);
        assert!(msm.truncated(0).is_err() && msm.truncated(4).is_err());
    }

    #[test]
    fn scales_must_be_consecutive() {
        let scales: Vec<Arc<dyn FixedScaleModel<f64>>> = vec![Arc::new(Tagged(1)), Arc::new(Tagged(3))];
        assert!(MultiScaleModel::new(scales, EmptyPrior::zeros(1), false).is_err());
    }

    #[test]
    fn recurrence_matches_direct_every_subsequence() {
        for (n, n_max) in [(5, 2), (6, 3), (4, 4), (5, 1)] {
            let mut synth = SyntheticModel::new(ModelKind::PerScaleMlp, 40 + n as u64);
            synth.n_max = n_max;
            let model = load_model::<f64>(&synth.spec()).unwrap();
            let msm = model.as_multiscale().unwrap();
            let x = random_features(n, synth.feature_dim, 9).unwrap();
            let calls = CallCounter::new();
            let table = multiscale_recurrent(msm, &x, &calls, 16).unwrap();
            let leaves: u64 = (1..=n_max.min(n)).map(|s| crate::sequence::binomial(n, s) as u64).sum();
            assert_eq!(calls.get(), leaves);
            for (mask, row) in table.iter().skip(1) {
                let direct =
                    multiscale_direct(msm, &SubsequenceIndex::from_mask(mask), &x, &CallCounter::new()).unwrap();
                for (a, b) in row.iter().zip(direct.as_slice()) {
                    assert!(
                        (a - b).abs() <= 1e-12 * (1.0 + b.abs()),
                        "n={n} mask={mask:b}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn table_respects_capacity() {
        let msm = tagged(1);
        let x = FeatureSequence::new(vec![vec![0.0]; 8]).unwrap();
        let err = multiscale_recurrent(&msm, &x, &CallCounter::new(), 7).unwrap_err();
        assert!(matches!(
            err,
            EsvError::Capacity {
                requested: 8,
                limit: 7,
                ..
            }
        ));
    }
}
