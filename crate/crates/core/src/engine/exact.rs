use super::{check_classes, AttributionResult, Mode, Provenance};
use crate::error::Result;
use crate::model::{score_table, CallCounter, Scorer};
use crate::scalar::{CompensatedSum, Scalar};
use crate::sequence::{binomial, FeatureSequence, DEFAULT_EXHAUSTIVE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactConfig {
    /// Largest sequence length attributed exhaustively.
    pub exhaustive_limit: usize,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            exhaustive_limit: DEFAULT_EXHAUSTIVE_LIMIT,
        }
    }
}

/// Exact attributions from the scale-wise expectation form:
///
/// `phi_i = 1/n * sum_{s=1..n} [ mean f over size-s subsequences containing i
///                             - mean f over size-(s-1) subsequences without i ]`
///
/// Every subsequence is scored once (multi-scale models through the bottom-up
/// recurrence), so the cost is `2^n` scores plus `n * 2^n` additions per class.
pub fn exact_esv<T: Scalar>(
    model: &Scorer<T>,
    x: &FeatureSequence<T>,
    classes: &[usize],
    config: &ExactConfig,
) -> Result<AttributionResult<T>> {
    check_classes(model, classes)?;
    let calls = CallCounter::new();
    let table = score_table(model, x, &calls, config.exhaustive_limit)?;
    let n = x.len();
    let k = classes.len();

    // sums indexed by (size, element, class slot)
    let at = |s: usize, i: usize, slot: usize| (s * n + i) * k + slot;
    let mut with = vec![CompensatedSum::<T>::new(); (n + 1) * n * k];
    let mut without = vec![CompensatedSum::<T>::new(); (n + 1) * n * k];
    for (mask, row) in table.iter() {
        let s = mask.count_ones() as usize;
        for i in 0..n {
            let target = if mask >> i & 1 == 1 { &mut with } else { &mut without };
            for (slot, &c) in classes.iter().enumerate() {
                target[at(s, i, slot)].add(row[c]);
            }
        }
    }

    let nn = T::from_count(n);
    let phi = (0..n)
        .map(|i| {
            (0..k)
                .map(|slot| {
                    let mut total = CompensatedSum::new();
                    for s in 1..=n {
                        // both halves average over C(n-1, s-1) subsequences
                        let count = T::from_count(binomial(n - 1, s - 1) as usize);
                        total.add((with[at(s, i, slot)].value() - without[at(s - 1, i, slot)].value()) / count);
                    }
                    total.value() / nn
                })
                .collect()
        })
        .collect();

    let full = table.get(if n == 64 { u64::MAX } else { (1u64 << n) - 1 });
    let empty = table.get(0);
    Ok(AttributionResult {
        classes: classes.to_vec(),
        phi,
        evidential: classes.iter().map(|&c| full[c] - empty[c]).collect(),
        provenance: Provenance {
            mode: Mode::Exact,
            n,
            m: None,
            iterations: None,
            seed: None,
            strict_alg1: false,
        },
        model_calls: calls.get(),
    })
}
