use crate::error::{EsvError, Result};
use crate::model::{CallCounter, Scorer};
use crate::scalar::{CompensatedSum, Scalar};
use crate::sequence::{shapley_weight, FeatureSequence, SubsequenceIndex};

/// Default cap on `n` for routines that visit all `2^n` subsequences.
pub const DEFAULT_EXHAUSTIVE_LIMIT: usize = 16;

/// `f_c(Xp ∪ {x_i}) - f_c(Xp)`.
pub fn marginal_contribution<T: Scalar>(
    model: &Scorer<T>,
    x: &FeatureSequence<T>,
    element: usize,
    coalition: &SubsequenceIndex,
    class: usize,
    calls: &CallCounter,
) -> Result<T> {
    model.check_class(class)?;
    if element >= x.len() {
        return Err(EsvError::validation(
            "element",
            format!("element {element} out of range"),
        ));
    }
    if coalition.contains(element) {
        return Err(EsvError::Contract(format!(
            "element {element} is already in the coalition"
        )));
    }
    let with = model.evaluate(x, &coalition.with(element), calls)?;
    let without = model.evaluate(x, coalition, calls)?;
    Ok(with.get(class) - without.get(class))
}

/// Shapley values by the weighted sum of marginal contributions over every
/// coalition, with the model evaluated independently on each of the `2^n`
/// subsequences.
///
/// This is the reference every faster path is tested against.
pub fn brute_force_esv<T: Scalar>(
    model: &Scorer<T>,
    x: &FeatureSequence<T>,
    class: usize,
    limit: usize,
) -> Result<Vec<T>> {
    let n = x.len();
    if n > limit || n > 30 {
        return Err(EsvError::Capacity {
            what: "sequence length",
            requested: n,
            limit: limit.min(30),
        });
    }
    model.check_class(class)?;
    let calls = CallCounter::new();
    let scores = (0u64..1 << n)
        .map(|mask| {
            Ok(model
                .evaluate(x, &SubsequenceIndex::from_mask(mask), &calls)?
                .get(class))
        })
        .collect::<Result<Vec<T>>>()?;
    let weights = (0..n)
        .map(|s| shapley_weight::<T>(n, s).map(|w| w.value()))
        .collect::<Result<Vec<T>>>()?;
    Ok((0..n)
        .map(|i| {
            let bit = 1u64 << i;
            let mut acc = CompensatedSum::new();
            for mask in (0u64..1 << n).filter(|m| m & bit == 0) {
                let delta = scores[(mask | bit) as usize] - scores[mask as usize];
                acc.add(weights[mask.count_ones() as usize] * delta);
            }
            acc.value()
        })
        .collect())
}
