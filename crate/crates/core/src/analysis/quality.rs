use rayon::prelude::*;

use super::metrics::{lad_slope, pearson_r, relative_error};
use crate::engine::{approx_esv, exact_esv, ApproxConfig, ExactConfig};
use crate::error::Result;
use crate::model::Scorer;
use crate::scalar::Scalar;
use crate::sequence::{binomial, FeatureSequence};

/// One input of an evaluation set: a model, a sequence and the class to explain.
#[derive(Clone, Copy)]
pub struct EvalItem<'a, T> {
    pub model: &'a Scorer<T>,
    pub x: &'a FeatureSequence<T>,
    pub class: usize,
}

#[derive(Debug, Clone)]
pub struct QualityGrid<T> {
    pub m_grid: Vec<usize>,
    pub iteration_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Keep only inputs whose evidential score for their class reaches this value.
    pub min_evidential: Option<T>,
    pub strict_alg1: bool,
    pub exact: ExactConfig,
}

/// Metrics of one input, averaged over seeds. `None` marks an undefined metric.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoMetrics<T> {
    pub input: usize,
    pub relative_error: Option<T>,
    pub lad_slope: Option<T>,
    pub pearson_r: Option<T>,
}

/// Metrics averaged over the inputs of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxQualityReport<T> {
    pub relative_error: Option<T>,
    pub lad_slope: Option<T>,
    pub pearson_r: Option<T>,
    pub per_video: Vec<VideoMetrics<T>>,
    /// Number of (input, seed) metric evaluations that were undefined.
    pub gaps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityCell<T> {
    pub m: usize,
    pub iterations: usize,
    /// Mean over inputs of the percentage of all subsequences scored per iteration.
    pub sampled_percent: f64,
    pub report: ApproxQualityReport<T>,
}

/// Percentage of the `2^n` subsequences visited by one sampling iteration
/// with cap `m`: `100 * sum_{s=0..n} min(m, C(n, s)) / 2^n`.
pub fn sampled_fraction_percent(n: usize, m: usize) -> f64 {
    let visited: f64 = (0..=n).map(|s| binomial(n, s).min(m as u128) as f64).sum();
    100.0 * visited / 2f64.powi(n as i32)
}

fn mean<T: Scalar>(values: impl Iterator<Item = T>) -> Option<T> {
    let v: Vec<T> = values.collect();
    (!v.is_empty()).then(|| crate::scalar::compensated_sum(v.iter().copied()) / T::from_count(v.len()))
}

/// Exact attributions once per input, then sampled attributions for every
/// `(m, iterations, seed)` combination, summarised per grid cell.
pub fn batch_quality<T: Scalar>(items: &[EvalItem<'_, T>], grid: &QualityGrid<T>) -> Result<Vec<QualityCell<T>>> {
    let exact = items
        .par_iter()
        .map(|item| exact_esv(item.model, item.x, &[item.class], &grid.exact))
        .collect::<Result<Vec<_>>>()?;
    let kept: Vec<(usize, &EvalItem<'_, T>, Vec<T>)> = items
        .iter()
        .zip(exact)
        .enumerate()
        .filter(|(_, (_, r))| grid.min_evidential.is_none_or(|t| r.evidential[0] >= t))
        .map(|(k, (item, r))| (k, item, r.phi.iter().map(|row| row[0]).collect()))
        .collect();

    let mut cells = Vec::new();
    for &m in &grid.m_grid {
        for &iterations in &grid.iteration_grid {
            let per_input = kept
                .par_iter()
                .map(|(k, item, phi)| -> Result<(VideoMetrics<T>, usize)> {
                    let mut rel = Vec::new();
                    let mut slope = Vec::new();
                    let mut r = Vec::new();
                    let mut gaps = 0;
                    for &seed in &grid.seeds {
                        let config = ApproxConfig {
                            m,
                            iterations,
                            seed,
                            strict_alg1: grid.strict_alg1,
                        };
                        let approx = approx_esv(item.model, item.x, &[item.class], &config)?;
                        let phi_hat: Vec<T> = approx.phi.iter().map(|row| row[0]).collect();
                        for (metric, sink) in [
                            (relative_error(&phi_hat, phi), &mut rel),
                            (lad_slope(&phi_hat, phi), &mut slope),
                            (pearson_r(&phi_hat, phi), &mut r),
                        ] {
                            match metric {
                                Ok(v) => sink.push(v),
                                Err(_) => gaps += 1,
                            }
                        }
                    }
                    Ok((
                        VideoMetrics {
                            input: *k,
                            relative_error: mean(rel.into_iter()),
                            lad_slope: mean(slope.into_iter()),
                            pearson_r: mean(r.into_iter()),
                        },
                        gaps,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let gaps = per_input.iter().map(|(_, g)| g).sum();
            let per_video: Vec<VideoMetrics<T>> = per_input.into_iter().map(|(v, _)| v).collect();
            let sampled_percent = if kept.is_empty() {
                0.0
            } else {
                kept.iter()
                    .map(|(_, item, _)| sampled_fraction_percent(item.x.len(), m))
                    .sum::<f64>()
                    / kept.len() as f64
            };
            cells.push(QualityCell {
                m,
                iterations,
                sampled_percent,
                report: ApproxQualityReport {
                    relative_error: mean(per_video.iter().filter_map(|v| v.relative_error)),
                    lad_slope: mean(per_video.iter().filter_map(|v| v.lad_slope)),
                    pearson_r: mean(per_video.iter().filter_map(|v| v.pearson_r)),
                    per_video,
                    gaps,
                },
            });
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampled_fraction_small_cases() {
        // n = 3, cap not binding: every subsequence
        assert!((sampled_fraction_percent(3, 3) - 100.0).abs() < 1e-12);
        // n = 3, m = 1: one per scale, 4 of 8
        assert!((sampled_fraction_percent(3, 1) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn empty_evaluation_set() {
        let grid = QualityGrid::<f64> {
            m_grid: vec![4],
            iteration_grid: vec![1],
            seeds: vec![0],
            min_evidential: None,
            strict_alg1: false,
            exact: ExactConfig::default(),
        };
        let cells = batch_quality(&[], &grid).unwrap();
        assert_eq!(cells.len(), 1);
        assert!(cells[0].report.per_video.is_empty());
        assert_eq!(cells[0].report.pearson_r, None);
    }
}
