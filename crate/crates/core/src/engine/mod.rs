//! Exact and sampled Element Shapley Values, class-contrastive attributions
//! and supporting/distracting labels.

mod approx;
mod exact;

pub use approx::{approx_esv, candidate_pool, grow_candidates, ApproxConfig, SamplePool, ScaleAccumulators};
pub use exact::{exact_esv, ExactConfig};

use std::fmt;

use crate::error::{EsvError, Result};
use crate::model::Scorer;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Exact,
    Approx,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Approx => "approx",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a result was produced. `m`, `iterations` and `seed` are set in approx mode only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub mode: Mode,
    pub n: usize,
    pub m: Option<usize>,
    pub iterations: Option<usize>,
    pub seed: Option<u64>,
    pub strict_alg1: bool,
}

/// Per-element, per-class attributions.
///
/// `phi[i][k]` is the attribution of element `i` to class `classes[k]`;
/// `evidential[k]` is `f_c(X) - f_c(∅)` for the same class.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionResult<T> {
    pub classes: Vec<usize>,
    pub phi: Vec<Vec<T>>,
    pub evidential: Vec<T>,
    pub provenance: Provenance,
    pub model_calls: u64,
}

impl<T: Scalar> AttributionResult<T> {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn class_slot(&self, class: usize) -> Option<usize> {
        self.classes.iter().position(|&c| c == class)
    }

    /// Attribution column for `class`.
    pub fn phi_for(&self, class: usize) -> Result<Vec<T>> {
        let k = self
            .class_slot(class)
            .ok_or_else(|| EsvError::validation("class", format!("class {class} is not covered by this result")))?;
        Ok(self.phi.iter().map(|row| row[k]).collect())
    }

    pub fn evidential_for(&self, class: usize) -> Result<T> {
        let k = self
            .class_slot(class)
            .ok_or_else(|| EsvError::validation("class", format!("class {class} is not covered by this result")))?;
        Ok(self.evidential[k])
    }
}

/// Checks a class list against a model: nonempty, in range.
pub(crate) fn check_classes<T: Scalar>(model: &Scorer<T>, classes: &[usize]) -> Result<()> {
    if classes.is_empty() {
        return Err(EsvError::validation("classes", "at least one class is required"));
    }
    classes.iter().try_for_each(|&c| model.check_class(c))
}

/// `phi^gt - phi^pt` per element: the attribution of the score difference
/// `f_gt - f_pt`. Both results must come from the same run configuration.
pub fn contrastive_esv<T: Scalar>(
    result_gt: &AttributionResult<T>,
    result_pt: &AttributionResult<T>,
    gt: usize,
    pt: usize,
) -> Result<Vec<T>> {
    if result_gt.provenance != result_pt.provenance || result_gt.len() != result_pt.len() {
        return Err(EsvError::Contract(
            "contrastive attribution needs results from the same sequence, model and mode".into(),
        ));
    }
    let a = result_gt.phi_for(gt)?;
    let b = result_pt.phi_for(pt)?;
    Ok(a.iter().zip(&b).map(|(x, y)| *x - *y).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementRole {
    /// Strictly positive attribution.
    Supporting,
    /// Zero or negative attribution.
    Distracting,
}

pub fn classify_elements<T: Scalar>(result: &AttributionResult<T>, class: usize) -> Result<Vec<ElementRole>> {
    Ok(result
        .phi_for(class)?
        .into_iter()
        .map(|v| {
            if v > T::zero() {
                ElementRole::Supporting
            } else {
                ElementRole::Distracting
            }
        })
        .collect())
}
