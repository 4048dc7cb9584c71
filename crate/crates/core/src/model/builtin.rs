use super::{FixedScaleModel, VariableLengthModel};
use crate::error::{EsvError, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(EsvError::validation(
                "data",
                format!("{} values do not fill a {rows} x {cols} matrix", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `out += self * input`
    pub fn mul_add(&self, input: &[T], out: &mut [T]) {
        debug_assert_eq!(input.len(), self.cols);
        for (row, o) in self.data.chunks_exact(self.cols).zip(out.iter_mut()) {
            let mut acc = *o;
            for (w, v) in row.iter().zip(input) {
                acc = acc + *w * *v;
            }
            *o = acc;
        }
    }
}

/// One hidden layer with ReLU: `w2 * max(0, w1 * x + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    w1: Dense<T>,
    b1: Vec<T>,
    w2: Dense<T>,
    b2: Vec<T>,
}

impl<T: Scalar> Mlp<T> {
    pub fn new(w1: Dense<T>, b1: Vec<T>, w2: Dense<T>, b2: Vec<T>) -> Result<Self> {
        if b1.len() != w1.rows() || w2.cols() != w1.rows() || b2.len() != w2.rows() {
            return Err(EsvError::validation("mlp", "inconsistent layer shapes"));
        }
        Ok(Self { w1, b1, w2, b2 })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.rows()
    }

    pub fn forward(&self, input: &[T]) -> Vec<T> {
        let mut hidden = self.b1.clone();
        self.w1.mul_add(input, &mut hidden);
        for h in hidden.iter_mut() {
            *h = h.max(T::zero());
        }
        let mut out = self.b2.clone();
        self.w2.mul_add(&hidden, &mut out);
        out
    }
}

/// `offset + sum_i W x_i`; its Shapley values are `W x_i` in closed form.
#[derive(Debug, Clone)]
pub struct LinearAdditive<T> {
    weights: Dense<T>,
    offset: Vec<T>,
}

impl<T: Scalar> LinearAdditive<T> {
    /// `weights` is `classes x dim`; `offset` is the output on the empty input.
    pub fn new(weights: Dense<T>, offset: Vec<T>) -> Result<Self> {
        if offset.len() != weights.rows() {
            return Err(EsvError::validation(
                "offset",
                "offset length must equal the class count",
            ));
        }
        Ok(Self { weights, offset })
    }

    /// Per-class score contributed by one element.
    pub fn element_scores(&self, element: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.weights.rows()];
        self.weights.mul_add(element, &mut out);
        out
    }
}

impl<T: Scalar> VariableLengthModel<T> for LinearAdditive<T> {
    fn num_classes(&self) -> usize {
        self.weights.rows()
    }

    fn feature_dim(&self) -> usize {
        self.weights.cols()
    }

    fn forward(&self, elements: &[&[T]]) -> Vec<T> {
        let mut out = self.offset.clone();
        for e in elements {
            self.weights.mul_add(e, &mut out);
        }
        out
    }
}

/// MLP on the mean of the selected elements; invariant to their order.
#[derive(Debug, Clone)]
pub struct MeanPoolMlp<T> {
    mlp: Mlp<T>,
}

impl<T: Scalar> MeanPoolMlp<T> {
    pub fn new(mlp: Mlp<T>) -> Self {
        Self { mlp }
    }
}

impl<T: Scalar> VariableLengthModel<T> for MeanPoolMlp<T> {
    fn num_classes(&self) -> usize {
        self.mlp.output_dim()
    }

    fn feature_dim(&self) -> usize {
        self.mlp.input_dim()
    }

    fn forward(&self, elements: &[&[T]]) -> Vec<T> {
        let d = self.feature_dim();
        let mut mean = vec![T::zero(); d];
        for e in elements {
            for (m, v) in mean.iter_mut().zip(e.iter()) {
                *m = *m + *v;
            }
        }
        let k = T::from_count(elements.len());
        mean.iter_mut().for_each(|m| *m = *m / k);
        self.mlp.forward(&mean)
    }
}

/// Unary terms plus a learned function of every ordered element pair.
///
/// `f(X') = sum_i U x_i + sum_{i < j} g([x_i; x_j])`, where pairs keep
/// sequence order, so swapping two distinct elements changes the output.
#[derive(Debug, Clone)]
pub struct PairwiseRelational<T> {
    unary: Dense<T>,
    pair: Mlp<T>,
}

impl<T: Scalar> PairwiseRelational<T> {
    pub fn new(unary: Dense<T>, pair: Mlp<T>) -> Result<Self> {
        if pair.input_dim() != 2 * unary.cols() || pair.output_dim() != unary.rows() {
            return Err(EsvError::validation(
                "pair",
                "pair network must map 2D features to the class count",
            ));
        }
        Ok(Self { unary, pair })
    }
}

impl<T: Scalar> VariableLengthModel<T> for PairwiseRelational<T> {
    fn num_classes(&self) -> usize {
        self.unary.rows()
    }

    fn feature_dim(&self) -> usize {
        self.unary.cols()
    }

    fn forward(&self, elements: &[&[T]]) -> Vec<T> {
        let mut out = vec![T::zero(); self.num_classes()];
        for e in elements {
            self.unary.mul_add(e, &mut out);
        }
        let mut joined = Vec::with_capacity(2 * self.feature_dim());
        for (i, a) in elements.iter().enumerate() {
            for b in &elements[i + 1..] {
                joined.clear();
                joined.extend_from_slice(a);
                joined.extend_from_slice(b);
                for (o, v) in out.iter_mut().zip(self.pair.forward(&joined)) {
                    *o = *o + v;
                }
            }
        }
        out
    }
}

/// Single-scale MLP over the concatenation of exactly `scale` elements.
#[derive(Debug, Clone)]
pub struct ScaleMlp<T> {
    scale: usize,
    dim: usize,
    mlp: Mlp<T>,
}

impl<T: Scalar> ScaleMlp<T> {
    pub fn new(scale: usize, mlp: Mlp<T>) -> Result<Self> {
        if scale == 0 || !mlp.input_dim().is_multiple_of(scale) {
            return Err(EsvError::validation(
                "w1",
                "input width must be a multiple of the scale",
            ));
        }
        Ok(Self {
            scale,
            dim: mlp.input_dim() / scale,
            mlp,
        })
    }
}

impl<T: Scalar> FixedScaleModel<T> for ScaleMlp<T> {
    fn scale(&self) -> usize {
        self.scale
    }

    fn num_classes(&self) -> usize {
        self.mlp.output_dim()
    }

    fn feature_dim(&self) -> usize {
        self.dim
    }

    fn forward(&self, elements: &[&[T]]) -> Vec<T> {
        assert_eq!(
            elements.len(),
            self.scale,
            "scale-{} model called with {} elements",
            self.scale,
            elements.len()
        );
        let input: Vec<T> = elements.iter().flat_map(|e| e.iter().copied()).collect();
        self.mlp.forward(&input)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_mlp(input: usize) -> Mlp<f64> {
        let w1 = Dense::new(2, input, (0..2 * input).map(|k| (k as f64 * 0.37).sin()).collect()).unwrap();
        let w2 = Dense::new(2, 2, vec![1.0, -0.5, 0.25, 0.75]).unwrap();
        Mlp::new(w1, vec![0.1, -0.2], w2, vec![0.0, 0.05]).unwrap()
    }

    #[test]
    fn mean_pool_of_duplicates_equals_single() {
        let m = MeanPoolMlp::new(tiny_mlp(3));
        let e = [0.3, -1.2, 0.8];
        let one = m.forward(&[&e]);
        let three = m.forward(&[&e, &e, &e]);
        for (a, b) in one.iter().zip(&three) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn pairwise_single_element_is_unary_only() {
        let unary = Dense::new(2, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let m = PairwiseRelational::new(unary, tiny_mlp(6)).unwrap();
        assert_eq!(m.forward(&[&[0.5, 0.25, 9.0]]), vec![0.5, 0.25]);
    }

    #[test]
    fn pairwise_is_order_sensitive() {
        let unary = Dense::zeros(2, 3);
        let m = PairwiseRelational::new(unary, tiny_mlp(6)).unwrap();
        let a = [1.0, 0.0, -1.0];
        let b = [0.2, 0.9, 0.4];
        assert_ne!(m.forward(&[&a, &b]), m.forward(&[&b, &a]));
    }

    #[test]
    fn linear_additive_sums_elements() {
        let m = LinearAdditive::new(Dense::new(1, 1, vec![2.0]).unwrap(), vec![0.5]).unwrap();
        assert_eq!(m.forward(&[&[1.0], &[3.0]]), vec![8.5]);
    }
}
