use crate::error::{EsvError, Result};
use crate::scalar::Scalar;

/// Probability mass of one coalition of size `s` drawn from the other `n - 1`
/// elements: `(n - s - 1)! s! / n!`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ShapleyWeight<T>(T);

impl<T: Scalar> ShapleyWeight<T> {
    pub fn value(self) -> T {
        self.0
    }
}

/// Shapley weight for a size-`s` coalition of a length-`n` sequence.
///
/// Evaluated as `1/n * prod_{k=1..r} k / (n - 1 - r + k)` with
/// `r = min(s, n - 1 - s)`, so no factorial is ever formed.
pub fn shapley_weight<T: Scalar>(n: usize, s: usize) -> Result<ShapleyWeight<T>> {
    if n == 0 || s >= n {
        return Err(EsvError::validation(
            "subset_size",
            format!("need 0 <= s < n, got n = {n}, s = {s}"),
        ));
    }
    let r = s.min(n - 1 - s);
    let mut w = T::one() / T::from_count(n);
    for k in 1..=r {
        w = w * T::from_count(k) / T::from_count(n - 1 - r + k);
    }
    Ok(ShapleyWeight(w))
}

/// `n choose k`, exact for every `n <= 64` and saturating beyond `u128`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        // acc * (n - k + i) is divisible by i after the multiplication
        acc = match acc.checked_mul(n as u128 - k as u128 + i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    acc
}
