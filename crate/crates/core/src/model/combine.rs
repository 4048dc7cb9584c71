use std::sync::Arc;

use super::{
    softmax_in_place, DirectScorer, EmptyPrior, FixedScaleModel, MultiScaleModel, Scorer, VariableLengthModel,
};
use crate::error::Result;
use crate::scalar::Scalar;

fn mix<T: Scalar>(mut raw: Vec<T>, normalize: bool, terms: &[(usize, T)]) -> Vec<T> {
    if normalize {
        softmax_in_place(&mut raw);
    }
    vec![terms.iter().fold(T::zero(), |acc, &(c, w)| acc + w * raw[c])]
}

/// One-class model `sum_k w_k f_{c_k}` over a variable-length model.
pub struct CombinedModel<T> {
    inner: Arc<dyn VariableLengthModel<T>>,
    normalize: bool,
    terms: Vec<(usize, T)>,
}

impl<T: Scalar> VariableLengthModel<T> for CombinedModel<T> {
    fn num_classes(&self) -> usize {
        1
    }

    fn feature_dim(&self) -> usize {
        self.inner.feature_dim()
    }

    fn forward(&self, elements: &[&[T]]) -> Vec<T> {
        mix(self.inner.forward(elements), self.normalize, &self.terms)
    }
}

/// One-class single-scale model `sum_k w_k f^s_{c_k}`.
pub struct CombinedFixedScale<T> {
    inner: Arc<dyn FixedScaleModel<T>>,
    normalize: bool,
    terms: Vec<(usize, T)>,
}

impl<T: Scalar> FixedScaleModel<T> for CombinedFixedScale<T> {
    fn scale(&self) -> usize {
        self.inner.scale()
    }

    fn num_classes(&self) -> usize {
        1
    }

    fn feature_dim(&self) -> usize {
        self.inner.feature_dim()
    }

    fn forward(&self, elements: &[&[T]]) -> Vec<T> {
        mix(self.inner.forward(elements), self.normalize, &self.terms)
    }
}

pub(super) fn combine<T: Scalar>(scorer: &Scorer<T>, terms: &[(usize, T)]) -> Result<Scorer<T>> {
    let prior_scores = scorer.empty_prior().scores().as_slice();
    let prior = EmptyPrior::new(mix(prior_scores.to_vec(), false, terms), false)?;
    match scorer {
        Scorer::VariableLength(d) => {
            let model = CombinedModel {
                inner: d.model.clone(),
                normalize: d.normalize,
                terms: terms.to_vec(),
            };
            Ok(Scorer::VariableLength(DirectScorer::new(
                Arc::new(model),
                prior,
                false,
            )?))
        }
        Scorer::MultiScale(m) => {
            let scales = m
                .scale_models()
                .iter()
                .map(|f| {
                    Arc::new(CombinedFixedScale {
                        inner: f.clone(),
                        normalize: m.normalize(),
                        terms: terms.to_vec(),
                    }) as Arc<dyn FixedScaleModel<T>>
                })
                .collect();
            Ok(Scorer::MultiScale(MultiScaleModel::new(scales, prior, false)?))
        }
    }
}
