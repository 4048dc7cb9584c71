use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::AttributionResult;
use crate::error::{EsvError, Result};
use crate::model::{CallCounter, Scorer};
use crate::scalar::Scalar;
use crate::sequence::{FeatureSequence, SubsequenceIndex};

/// Policy deciding which element is discarded next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemovalOrder {
    /// Highest attribution first.
    EsvDescending,
    /// Lowest attribution first.
    EsvAscending,
    /// Middle element first, then alternating right and left of it.
    CenterOut,
    /// First, last, second, second-to-last, ...
    EdgesIn,
    /// Keep survivors evenly spread.
    Uniform,
    /// Seeded shuffle.
    Random,
}

impl RemovalOrder {
    pub const ALL: [RemovalOrder; 6] = [
        RemovalOrder::EsvDescending,
        RemovalOrder::EsvAscending,
        RemovalOrder::CenterOut,
        RemovalOrder::EdgesIn,
        RemovalOrder::Uniform,
        RemovalOrder::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RemovalOrder::EsvDescending => "esv-descending",
            RemovalOrder::EsvAscending => "esv-ascending",
            RemovalOrder::CenterOut => "center-out",
            RemovalOrder::EdgesIn => "edges-in",
            RemovalOrder::Uniform => "uniform",
            RemovalOrder::Random => "random",
        }
    }

    pub fn needs_attribution(self) -> bool {
        matches!(self, RemovalOrder::EsvDescending | RemovalOrder::EsvAscending)
    }
}

impl fmt::Display for RemovalOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RemovalOrder {
    type Err = EsvError;

    fn from_str(s: &str) -> Result<Self> {
        RemovalOrder::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| EsvError::validation("order", format!("unknown removal order '{s}'")))
    }
}

/// Permutation of `0..n` giving the removal sequence; the last entry is the
/// element that survives to the end.
pub fn removal_order<T: Scalar>(order: RemovalOrder, n: usize, phi: Option<&[T]>, seed: u64) -> Result<Vec<usize>> {
    let ranked = |descending: bool| -> Result<Vec<usize>> {
        let phi = phi.ok_or_else(|| EsvError::validation("result", format!("{order} needs attributions")))?;
        if phi.len() != n {
            return Err(EsvError::validation(
                "result",
                "attribution length differs from the sequence",
            ));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        // stable: ties keep the lower index first
        idx.sort_by(|&a, &b| {
            let ord = phi[a].partial_cmp(&phi[b]).unwrap_or(std::cmp::Ordering::Equal);
            if descending {
                ord.reverse()
            } else {
                ord
            }
        });
        Ok(idx)
    };
    match order {
        RemovalOrder::EsvDescending => ranked(true),
        RemovalOrder::EsvAscending => ranked(false),
        RemovalOrder::CenterOut => Ok(center_out(n)),
        RemovalOrder::EdgesIn => Ok(edges_in(n)),
        RemovalOrder::Uniform => Ok(uniform(n)),
        RemovalOrder::Random => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            Ok(idx)
        }
    }
}

fn center_out(n: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    // 0-based index of position ceil(n/2)
    let center = n.div_ceil(2) - 1;
    let mut out = vec![center];
    for d in 1..n {
        if center + d < n {
            out.push(center + d);
        }
        if d <= center {
            out.push(center - d);
        }
    }
    out
}

fn edges_in(n: usize) -> Vec<usize> {
    let (mut lo, mut hi) = (0usize, n);
    let mut out = Vec::with_capacity(n);
    while lo < hi {
        out.push(lo);
        lo += 1;
        if lo < hi {
            hi -= 1;
            out.push(hi);
        }
    }
    out
}

/// Greedy removal maximising the smallest gap between consecutive survivors,
/// then minimising how many gaps attain it; ties go to the lowest index.
fn uniform(n: usize) -> Vec<usize> {
    let mut survivors: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n);
    while survivors.len() > 1 {
        let mut best: Option<((usize, usize), usize)> = None;
        for k in 0..survivors.len() {
            let mut min_gap = usize::MAX;
            let mut at_min = 0usize;
            let rest = survivors.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &p)| p);
            let mut prev: Option<usize> = None;
            for p in rest {
                if let Some(q) = prev {
                    let gap = p - q;
                    match gap.cmp(&min_gap) {
                        std::cmp::Ordering::Less => {
                            min_gap = gap;
                            at_min = 1;
                        }
                        std::cmp::Ordering::Equal => at_min += 1,
                        std::cmp::Ordering::Greater => {}
                    }
                }
                prev = Some(p);
            }
            // larger min gap wins, then fewer gaps at the minimum
            let key = (min_gap, usize::MAX - at_min);
            if best.is_none_or(|(b, _)| key > b) {
                best = Some((key, k));
            }
        }
        let (_, k) = best.expect("at least two survivors");
        out.push(survivors.remove(k));
    }
    out.extend(survivors);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationPoint<T> {
    pub remaining: usize,
    pub score: T,
    /// Whether the arg-max class equals the supplied label.
    pub correct: bool,
}

/// Scores as elements are discarded one at a time: `n` points, from the full
/// sequence down to a single element.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationCurve<T> {
    pub order: RemovalOrder,
    pub removal: Vec<usize>,
    pub points: Vec<AblationPoint<T>>,
}

/// Re-evaluates the model on the survivors after each removal.
pub fn ablate_by_rank<T: Scalar>(
    model: &Scorer<T>,
    x: &FeatureSequence<T>,
    result: Option<&AttributionResult<T>>,
    class: usize,
    label: usize,
    order: RemovalOrder,
    seed: u64,
) -> Result<AblationCurve<T>> {
    model.check_class(class)?;
    model.check_class(label)?;
    let n = x.len();
    let phi = match (order.needs_attribution(), result) {
        (true, Some(r)) => Some(r.phi_for(class)?),
        (true, None) => {
            return Err(EsvError::validation(
                "result",
                format!("{order} needs an attribution result"),
            ))
        }
        (false, _) => None,
    };
    let removal = removal_order(order, n, phi.as_deref(), seed)?;
    let calls = CallCounter::new();
    let mut survivors = SubsequenceIndex::full(n);
    let mut points = Vec::with_capacity(n);
    for step in 0..n {
        if step > 0 {
            survivors = survivors.without(removal[step - 1]);
        }
        let scores = model.evaluate(x, &survivors, &calls)?;
        points.push(AblationPoint {
            remaining: n - step,
            score: scores.get(class),
            correct: scores.argmax() == label,
        });
    }
    Ok(AblationCurve { order, removal, points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanAblationPoint<T> {
    pub remaining: usize,
    pub mean_score: T,
    pub accuracy: T,
}

/// Pointwise average of curves that share a sequence length.
pub fn mean_curve<T: Scalar>(curves: &[AblationCurve<T>]) -> Result<Vec<MeanAblationPoint<T>>> {
    let Some(first) = curves.first() else {
        return Ok(Vec::new());
    };
    let len = first.points.len();
    if curves.iter().any(|c| c.points.len() != len) {
        return Err(EsvError::validation("curves", "curves must share a sequence length"));
    }
    let count = T::from_count(curves.len());
    Ok((0..len)
        .map(|k| MeanAblationPoint {
            remaining: first.points[k].remaining,
            mean_score: crate::scalar::compensated_sum(curves.iter().map(|c| c.points[k].score)) / count,
            accuracy: T::from_count(curves.iter().filter(|c| c.points[k].correct).count()) / count,
        })
        .collect())
}
