mod common;

use common::{all_classes, instance};
use esv_core::analysis::{
    ablate_by_rank, batch_quality, lad_fit, lad_slope, mean_curve, pearson_r, relative_error, removal_order, EvalItem,
    QualityGrid, RemovalOrder,
};
use esv_core::engine::{exact_esv, ExactConfig};
use esv_core::model::{CallCounter, ModelKind};
use esv_core::sequence::{FeatureSequence, SubsequenceIndex};
use esv_core::EsvError;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exhaustive LAD: some optimal line passes through two of the points.
fn lad_oracle(y: &[f64], x: &[f64]) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            if x[i] == x[j] {
                continue;
            }
            let b = (y[j] - y[i]) / (x[j] - x[i]);
            let a = y[i] - b * x[i];
            let loss: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).abs()).sum();
            if loss < best.0 {
                best = (loss, b);
            }
        }
    }
    best
}

#[test]
fn lad_resists_a_gross_outlier() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
    let clean: Vec<f64> = x
        .iter()
        .map(|v| 0.8 * v + 0.1 + rng.random_range(-0.05..0.05))
        .collect();
    let mut dirty = clean.clone();
    dirty[37] += 50.0;

    let (_, clean_slope) = lad_oracle(&clean, &x);
    let (oracle_loss, _) = lad_oracle(&dirty, &x);
    let fit = lad_fit(&dirty, &x).unwrap();
    let loss: f64 = x
        .iter()
        .zip(&dirty)
        .map(|(xi, yi)| (yi - fit.intercept - fit.slope * xi).abs())
        .sum();
    assert!(
        loss <= oracle_loss * (1.0 + 1e-9),
        "IRLS loss {loss} vs optimum {oracle_loss}"
    );
    assert!((fit.slope - clean_slope).abs() < 0.01, "{} vs {clean_slope}", fit.slope);
}

#[test]
fn undefined_metrics_are_reported() {
    let zeros = [0.0; 4];
    let phi = [1.0, 2.0, 3.0, 4.0];
    assert!(matches!(
        relative_error(&phi, &zeros),
        Err(EsvError::UndefinedMetric(_))
    ));
    assert!(matches!(pearson_r(&phi, &zeros), Err(EsvError::UndefinedMetric(_))));
    assert!(matches!(lad_slope(&phi, &zeros), Err(EsvError::UndefinedMetric(_))));
    assert!(pearson_r(&[1.0], &[1.0]).is_err());
    assert!(relative_error(&[1.0], &[1.0, 2.0]).is_err());
}

#[test]
fn additive_ascending_removal_follows_values() {
    let spec = esv_core::model::ModelSpec::from_json(
        r#"{"format": "esv-model/1", "kind": "linear-additive", "classes": 1, "feature_dim": 1,
            "parameters": [{"name": "weights", "shape": [1, 1], "data": [1]}],
            "empty_prior": {"scores": [0]}}"#,
    )
    .unwrap();
    let model = esv_core::model::load_model::<f64>(&spec).unwrap();
    let values = [0.4, -0.3, 0.9, 0.1, -0.8];
    let x = FeatureSequence::new(values.iter().map(|v| vec![*v]).collect()).unwrap();
    let r = exact_esv(&model, &x, &[0], &ExactConfig::default()).unwrap();
    let curve = ablate_by_rank(&model, &x, Some(&r), 0, 0, RemovalOrder::EsvAscending, 0).unwrap();
    assert_eq!(curve.removal, vec![4, 1, 3, 0, 2]);
    // removing the most negative element first raises the score
    assert!(curve.points[1].score > curve.points[0].score);
    let desc = ablate_by_rank(&model, &x, Some(&r), 0, 0, RemovalOrder::EsvDescending, 0).unwrap();
    assert_eq!(desc.removal, vec![2, 0, 3, 1, 4]);
}

#[test]
fn curves_agree_at_both_ends() {
    let (model, x) = instance(ModelKind::PairwiseRelational, 9, 4);
    let r = exact_esv(&model, &x, &all_classes(&model), &ExactConfig::default()).unwrap();
    let full = model
        .evaluate(&x, &SubsequenceIndex::full(9), &CallCounter::new())
        .unwrap()
        .get(0);
    let curves: Vec<_> = RemovalOrder::ALL
        .iter()
        .map(|&order| ablate_by_rank(&model, &x, Some(&r), 0, 0, order, 5).unwrap())
        .collect();
    for c in &curves {
        assert_eq!(c.points.len(), 9);
        assert_eq!(c.points[0].score, full);
        assert!(c.points.windows(2).all(|w| w[1].remaining + 1 == w[0].remaining));
        assert_eq!(c.points[8].remaining, 1);
        let mut sorted = c.removal.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..9).collect::<Vec<_>>());
    }
    let mean = mean_curve(&curves).unwrap();
    assert_eq!(mean[0].mean_score, full);
    assert!(mean_curve::<f64>(&[]).unwrap().is_empty());
}

#[test]
fn attribution_orders_need_a_result() {
    let (model, x) = instance(ModelKind::MeanPoolMlp, 4, 4);
    assert!(ablate_by_rank(&model, &x, None, 0, 0, RemovalOrder::EsvDescending, 0).is_err());
    assert!(ablate_by_rank(&model, &x, None, 0, 0, RemovalOrder::EdgesIn, 0).is_ok());
}

#[test]
fn random_order_is_reproducible() {
    let a = removal_order::<f64>(RemovalOrder::Random, 20, None, 99).unwrap();
    let b = removal_order::<f64>(RemovalOrder::Random, 20, None, 99).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, removal_order::<f64>(RemovalOrder::Random, 20, None, 100).unwrap());
}

#[test]
fn saturating_cell_is_perfect_and_empty_set_is_empty() {
    let (model, x) = instance(ModelKind::PerScaleMlp, 6, 8);
    let items = [EvalItem {
        model: &model,
        x: &x,
        class: 0,
    }];
    let grid = QualityGrid {
        m_grid: vec![20],
        iteration_grid: vec![1],
        seeds: vec![0, 1],
        min_evidential: None,
        strict_alg1: false,
        exact: ExactConfig::default(),
    };
    let cells = batch_quality(&items, &grid).unwrap();
    let report = &cells[0].report;
    assert!(report.relative_error.unwrap() < 1e-12);
    assert!((report.lad_slope.unwrap() - 1.0).abs() < 1e-9);
    assert!((report.pearson_r.unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(report.gaps, 0);

    let empty = batch_quality::<f64>(&[], &grid).unwrap();
    assert!(empty
        .iter()
        .all(|c| c.report.per_video.is_empty() && c.report.pearson_r.is_none()));
}

fn spread() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-10.0f64..10.0, 3..30).prop_filter("needs spread", |v| {
        let (lo, hi) = v.iter().fold((f64::MAX, f64::MIN), |(a, b), x| (a.min(*x), b.max(*x)));
        hi - lo > 1e-3
    })
}

proptest! {
    #[test]
    fn metric_identities(phi in spread(), a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], b in -3.0f64..3.0) {
        let mapped: Vec<f64> = phi.iter().map(|v| a * v + b).collect();
        prop_assert!((pearson_r(&mapped, &phi).unwrap() - a.signum()).abs() < 1e-9);
        prop_assert!((lad_slope(&mapped, &phi).unwrap() - a).abs() < 1e-6 * a.abs().max(1.0));
        if phi.iter().any(|v| *v != 0.0) {
            prop_assert_eq!(relative_error(&phi, &phi).unwrap(), 0.0);
        }
    }

    #[test]
    fn metrics_stay_in_range(phi in spread(), noise in proptest::collection::vec(-1.0f64..1.0, 30)) {
        let hat: Vec<f64> = phi.iter().zip(&noise).map(|(p, e)| p + e).collect();
        if let Ok(r) = pearson_r(&hat, &phi) {
            prop_assert!((-1.0..=1.0).contains(&r));
        }
        if let Ok(e) = relative_error(&hat, &phi) {
            prop_assert!(e >= 0.0);
        }
    }

    #[test]
    fn every_order_is_a_permutation(n in 1usize..40, seed in any::<u64>(), order in 0usize..6) {
        let phi: Vec<f64> = (0..n).map(|i| ((i as u64 ^ seed) % 7) as f64).collect();
        let mut removal = removal_order(RemovalOrder::ALL[order], n, Some(&phi), seed).unwrap();
        removal.sort_unstable();
        prop_assert_eq!(removal, (0..n).collect::<Vec<_>>());
    }
}
