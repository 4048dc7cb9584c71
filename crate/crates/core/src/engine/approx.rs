use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{check_classes, AttributionResult, Mode, Provenance};
use crate::error::{EsvError, Result};
use crate::model::{CallCounter, Scorer};
use crate::scalar::{CompensatedSum, Scalar};
use crate::sequence::{FeatureSequence, SubsequenceIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ApproxConfig {
    /// Maximum number of subsequences kept per scale and iteration.
    pub m: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Scale parent means by `(s - 1) / s` above `n_max`. Off by default: the
    /// unscaled mean is the one that agrees with the multi-scale definition.
    pub strict_alg1: bool,
}

impl ApproxConfig {
    pub fn new(m: usize, iterations: usize, seed: u64) -> Self {
        Self {
            m,
            iterations,
            seed,
            strict_alg1: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(EsvError::validation("m", "sample cap must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(EsvError::validation("iterations", "need at least one iteration"));
        }
        Ok(())
    }
}

/// Deduplicated subsequences sampled at one scale, plus the generator that
/// draws the next scale.
#[derive(Debug, Clone)]
pub struct SamplePool {
    scale: usize,
    m: usize,
    current: Vec<SubsequenceIndex>,
    rng: ChaCha8Rng,
}

impl SamplePool {
    /// Scale-1 pool holding every single-element subsequence of a length-`n` sequence.
    pub fn singletons(n: usize, m: usize, rng: ChaCha8Rng) -> Self {
        Self {
            scale: 1,
            m,
            current: (0..n).map(SubsequenceIndex::singleton).collect(),
            rng,
        }
    }

    pub fn seeded_singletons(n: usize, m: usize, seed: u64) -> Self {
        Self::singletons(n, m, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn cap(&self) -> usize {
        self.m
    }

    pub fn members(&self) -> &[SubsequenceIndex] {
        &self.current
    }

    pub fn into_rng(self) -> ChaCha8Rng {
        self.rng
    }

    /// Next-scale pool: at most `m` candidates drawn uniformly without replacement.
    pub fn grow(mut self, n: usize) -> Result<SamplePool> {
        if self.current.is_empty() {
            return Err(EsvError::Contract("cannot grow an empty pool".into()));
        }
        if self.scale >= n {
            return Err(EsvError::Contract(format!(
                "pool at scale {} cannot grow past a sequence of {n}",
                self.scale
            )));
        }
        let candidates = candidate_pool(&self.current, n);
        let next = if candidates.len() <= self.m {
            candidates
        } else {
            let mut picked = rand::seq::index::sample(&mut self.rng, candidates.len(), self.m).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|j| candidates[j].clone()).collect()
        };
        Ok(SamplePool {
            scale: self.scale + 1,
            m: self.m,
            current: next,
            rng: self.rng,
        })
    }
}

/// Every pool member extended by every element it lacks, deduplicated and in
/// canonical order.
pub fn candidate_pool(current: &[SubsequenceIndex], n: usize) -> Vec<SubsequenceIndex> {
    let mut out: Vec<SubsequenceIndex> = current
        .iter()
        .flat_map(|sub| (0..n).filter(|&p| !sub.contains(p)).map(move |p| sub.with(p)))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

pub fn grow_candidates<T: Scalar>(pool: SamplePool, x: &FeatureSequence<T>) -> Result<SamplePool> {
    pool.grow(x.len())
}

/// Running per-scale sums and counts of subsequence scores, split by whether
/// each element is present. Persist across iterations.
#[derive(Debug, Clone)]
pub struct ScaleAccumulators<T> {
    n: usize,
    slots: usize,
    with_sum: Vec<CompensatedSum<T>>,
    without_sum: Vec<CompensatedSum<T>>,
    with_count: Vec<u64>,
    without_count: Vec<u64>,
}

impl<T: Scalar> ScaleAccumulators<T> {
    /// Scale 0 is seeded with the empty prior, counted once.
    pub fn new(n: usize, prior: &[T]) -> Self {
        let slots = prior.len();
        let mut acc = Self {
            n,
            slots,
            with_sum: vec![CompensatedSum::new(); (n + 1) * n * slots],
            without_sum: vec![CompensatedSum::new(); (n + 1) * n * slots],
            with_count: vec![0; (n + 1) * n],
            without_count: vec![0; (n + 1) * n],
        };
        for i in 0..n {
            acc.without_count[i] = 1;
            for (k, v) in prior.iter().enumerate() {
                acc.without_sum[i * slots + k].add(*v);
            }
        }
        acc
    }

    pub fn add(&mut self, sub: &SubsequenceIndex, scores: &[T]) {
        let s = sub.len();
        for i in 0..self.n {
            let cell = s * self.n + i;
            let (sums, counts) = if sub.contains(i) {
                (&mut self.with_sum, &mut self.with_count)
            } else {
                (&mut self.without_sum, &mut self.without_count)
            };
            counts[cell] += 1;
            for (k, v) in scores.iter().enumerate() {
                sums[cell * self.slots + k].add(*v);
            }
        }
    }

    /// `(N, N̄)` at scale `s` for element `i`.
    pub fn counts(&self, s: usize, i: usize) -> (u64, u64) {
        let cell = s * self.n + i;
        (self.with_count[cell], self.without_count[cell])
    }

    fn mean_with(&self, s: usize, i: usize, slot: usize) -> Option<T> {
        let cell = s * self.n + i;
        let count = self.with_count[cell];
        (count > 0).then(|| self.with_sum[cell * self.slots + slot].value() / T::from_count(count as usize))
    }

    fn mean_without(&self, s: usize, i: usize, slot: usize) -> Option<T> {
        let cell = s * self.n + i;
        let count = self.without_count[cell];
        (count > 0).then(|| self.without_sum[cell * self.slots + slot].value() / T::from_count(count as usize))
    }

    /// `1/n * sum_s (S^s_i / N^s_i - S̄^{s-1}_i / N̄^{s-1}_i)`; a scale whose
    /// two means are not both observed contributes nothing.
    pub fn attributions(&self) -> Vec<Vec<T>> {
        let nn = T::from_count(self.n);
        (0..self.n)
            .map(|i| {
                (0..self.slots)
                    .map(|slot| {
                        let mut total = CompensatedSum::new();
                        for s in 1..=self.n {
                            if let (Some(a), Some(b)) = (self.mean_with(s, i, slot), self.mean_without(s - 1, i, slot))
                            {
                                total.add(a - b);
                            }
                        }
                        total.value() / nn
                    })
                    .collect()
            })
            .collect()
    }

    /// Mean score of the full sequence observed so far.
    fn full_mean(&self, slot: usize) -> Option<T> {
        self.mean_with(self.n, 0, slot)
    }
}

/// Sampled attributions.
///
/// Each iteration walks scales `1..=n`: scale 1 holds every element, each
/// later scale samples at most `m` subsequences from the one-element
/// extensions of the previous scale's sample. Multi-scale models score a
/// sampled subsequence from its own single-scale output and the mean of its
/// sampled parents; variable-length models score it directly. Running sums
/// persist across iterations; pools do not.
///
/// With `m >= max_k C(n, k)` and one iteration every pool is complete and the
/// result equals [`exact_esv`](super::exact_esv) up to summation order.
pub fn approx_esv<T: Scalar>(
    model: &Scorer<T>,
    x: &FeatureSequence<T>,
    classes: &[usize],
    config: &ApproxConfig,
) -> Result<AttributionResult<T>> {
    config.validate()?;
    check_classes(model, classes)?;
    model.check_input(x)?;
    let n = x.len();
    let calls = CallCounter::new();
    let prior: Vec<T> = classes.iter().map(|&c| model.empty_prior().scores().get(c)).collect();
    let slots = classes.len();
    let mut acc = ScaleAccumulators::new(n, &prior);
    // leaf outputs (f^s or f) keyed by subsequence; models are deterministic
    let mut cache: HashMap<SubsequenceIndex, Vec<T>> = HashMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let leaf = |sub: &SubsequenceIndex| -> Result<Vec<T>> {
        let scores = match model {
            Scorer::VariableLength(d) => d.score(x, sub, &calls)?,
            Scorer::MultiScale(m) => m.single_scale(&x.select(sub), &calls)?,
        };
        Ok(classes.iter().map(|&c| scores.get(c)).collect())
    };

    for _ in 0..config.iterations {
        let mut pool = SamplePool::singletons(n, config.m, rng);
        let mut parents: HashMap<SubsequenceIndex, usize> = HashMap::new();
        let mut parent_scores: Vec<T> = Vec::new();
        for s in 1..=n {
            if s > 1 {
                pool = pool.grow(n)?;
            }
            let needs_leaf = match model {
                Scorer::VariableLength(_) => true,
                Scorer::MultiScale(m) => s <= m.n_max(),
            };
            if needs_leaf {
                let missing: Vec<&SubsequenceIndex> =
                    pool.members().iter().filter(|sub| !cache.contains_key(*sub)).collect();
                let fresh = missing.par_iter().map(|sub| leaf(sub)).collect::<Result<Vec<_>>>()?;
                for (sub, scores) in missing.into_iter().zip(fresh) {
                    cache.insert(sub.clone(), scores);
                }
            }

            let mut kept: HashMap<SubsequenceIndex, usize> = HashMap::with_capacity(pool.members().len());
            let mut scores_here: Vec<T> = Vec::with_capacity(pool.members().len() * slots);
            for sub in pool.members() {
                let f: Vec<T> = match model {
                    Scorer::VariableLength(_) => cache[sub].clone(),
                    Scorer::MultiScale(m) => {
                        if s == 1 {
                            cache[sub].clone()
                        } else {
                            let mut sums = vec![CompensatedSum::<T>::new(); slots];
                            let mut z = 0usize;
                            for p in sub.positions() {
                                if let Some(&k) = parents.get(&sub.without(p)) {
                                    z += 1;
                                    for (a, v) in sums.iter_mut().zip(&parent_scores[k * slots..(k + 1) * slots]) {
                                        a.add(*v);
                                    }
                                }
                            }
                            if z == 0 {
                                // orphan: no sampled parent to average over
                                continue;
                            }
                            let zz = T::from_count(z);
                            let ss = T::from_count(s);
                            sums.iter()
                                .enumerate()
                                .map(|(slot, a)| {
                                    let mean = a.value() / zz;
                                    if s <= m.n_max() {
                                        (cache[sub][slot] + (ss - T::one()) * mean) / ss
                                    } else if config.strict_alg1 {
                                        (ss - T::one()) / ss * mean
                                    } else {
                                        mean
                                    }
                                })
                                .collect()
                        }
                    }
                };
                acc.add(sub, &f);
                kept.insert(sub.clone(), kept.len());
                scores_here.extend(f);
            }
            parents = kept;
            parent_scores = scores_here;
        }
        rng = pool.into_rng();
    }

    let evidential = (0..slots)
        .map(|slot| acc.full_mean(slot).unwrap_or(prior[slot]) - prior[slot])
        .collect();
    Ok(AttributionResult {
        classes: classes.to_vec(),
        phi: acc.attributions(),
        evidential,
        provenance: Provenance {
            mode: Mode::Approx,
            n,
            m: Some(config.m),
            iterations: Some(config.iterations),
            seed: Some(config.seed),
            strict_alg1: config.strict_alg1,
        },
        model_calls: calls.get(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lists(pool: &[SubsequenceIndex]) -> Vec<Vec<usize>> {
        pool.iter().map(|s| s.to_vec()).collect()
    }

    #[test]
    fn singletons_grow_into_all_pairs() {
        let pool = SamplePool::seeded_singletons(3, 10, 1);
        let next = pool.grow(3).unwrap();
        assert_eq!(next.scale(), 2);
        assert_eq!(lists(next.members()), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
    }

    #[test]
    fn cap_limits_pool_and_is_deterministic() {
        let grow = || {
            SamplePool::seeded_singletons(10, 7, 99)
                .grow(10)
                .unwrap()
                .grow(10)
                .unwrap()
        };
        let a = grow();
        let b = grow();
        assert_eq!(a.members().len(), 7);
        assert_eq!(a.members(), b.members());
        let distinct: std::collections::HashSet<_> = a.members().iter().collect();
        assert_eq!(distinct.len(), 7);
        // every member of the capped pool is a legitimate candidate
        let prev = SamplePool::seeded_singletons(10, 7, 99).grow(10).unwrap();
        let candidates = candidate_pool(prev.members(), 10);
        assert!(candidates.len() > 7);
        assert!(a.members().iter().all(|s| candidates.binary_search(s).is_ok()));
    }

    #[test]
    fn cannot_grow_past_n() {
        let pool = SamplePool::seeded_singletons(1, 4, 0);
        assert!(pool.grow(1).is_err());
    }

    #[test]
    fn accumulator_counts_partition_each_scale() {
        let mut acc = ScaleAccumulators::new(4, &[0.0]);
        for sub in candidate_pool(&(0..4).map(SubsequenceIndex::singleton).collect::<Vec<_>>(), 4) {
            acc.add(&sub, &[1.0]);
        }
        for i in 0..4 {
            let (with, without) = acc.counts(2, i);
            assert_eq!(with + without, 6);
        }
    }
}
