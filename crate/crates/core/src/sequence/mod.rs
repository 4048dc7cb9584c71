//! Sequences, coalitions of their elements, Shapley weights and the
//! brute-force attribution oracle.

mod enumerate;
mod oracle;
mod subsequence;
mod weights;

pub use enumerate::{enumerate_subsequences, Subsequences};
pub use oracle::{brute_force_esv, marginal_contribution, DEFAULT_EXHAUSTIVE_LIMIT};
pub use subsequence::{Positions, SubsequenceIndex};
pub use weights::{binomial, shapley_weight, ShapleyWeight};

use crate::error::{EsvError, Result};
use crate::scalar::Scalar;

/// An ordered, immutable list of `n >= 1` feature vectors of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence<T> {
    data: Vec<T>,
    len: usize,
    dim: usize,
}

impl<T: Scalar> FeatureSequence<T> {
    pub fn new(elements: Vec<Vec<T>>) -> Result<Self> {
        let len = elements.len();
        if len == 0 {
            return Err(EsvError::validation(
                "elements",
                "a sequence needs at least one element",
            ));
        }
        let dim = elements[0].len();
        if dim == 0 {
            return Err(EsvError::validation(
                "elements[0]",
                "feature dimension must be at least 1",
            ));
        }
        let mut data = Vec::with_capacity(len * dim);
        for (i, e) in elements.into_iter().enumerate() {
            if e.len() != dim {
                return Err(EsvError::validation(
                    format!("elements[{i}]"),
                    format!("expected {dim} features, found {}", e.len()),
                ));
            }
            data.extend(e);
        }
        Self::from_flat(data, len, dim)
    }

    /// Row-major `len x dim` buffer.
    pub fn from_flat(data: Vec<T>, len: usize, dim: usize) -> Result<Self> {
        if len == 0 || dim == 0 {
            return Err(EsvError::validation(
                "elements",
                "sequence length and dimension must be positive",
            ));
        }
        if data.len() != len * dim {
            return Err(EsvError::validation(
                "elements",
                format!("buffer holds {} values, expected {len} x {dim}", data.len()),
            ));
        }
        if let Some(at) = data.iter().position(|v| !v.is_finite()) {
            return Err(EsvError::validation(
                format!("elements[{}][{}]", at / dim, at % dim),
                "feature values must be finite",
            ));
        }
        Ok(Self { data, len, dim })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn element(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn elements(&self) -> impl ExactSizeIterator<Item = &[T]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    /// The selected elements in sequence order.
    pub fn select(&self, sub: &SubsequenceIndex) -> Vec<&[T]> {
        sub.positions().map(|p| self.element(p)).collect()
    }

    /// Checks that every position of `sub` lies inside the sequence.
    pub fn check_subsequence(&self, sub: &SubsequenceIndex) -> Result<()> {
        match sub.last() {
            Some(p) if p >= self.len => Err(EsvError::validation(
                "subsequence",
                format!("position {p} out of range for a sequence of {} elements", self.len),
            )),
            _ => Ok(()),
        }
    }

    pub fn cast<U: Scalar>(&self) -> FeatureSequence<U> {
        FeatureSequence {
            data: self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
            len: self.len,
            dim: self.dim,
        }
    }
}
