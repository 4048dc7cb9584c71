mod common;

use common::{all_classes, column, efficiency_gap, instance, max_abs_diff};
use esv_core::analysis::relative_error;
use esv_core::engine::{
    approx_esv, candidate_pool, classify_elements, contrastive_esv, exact_esv, ApproxConfig, ElementRole, ExactConfig,
    Mode, SamplePool,
};
use esv_core::model::synthetic::{random_features, SyntheticModel};
use esv_core::model::{load_model, CallCounter, ModelKind, ModelSpec, Scorer};
use esv_core::sequence::{brute_force_esv, FeatureSequence, SubsequenceIndex};
use esv_core::EsvError;
use proptest::prelude::*;

fn additive(weights: &[f64], classes: usize) -> Scorer<f64> {
    let spec = ModelSpec::from_json(&format!(
        r#"{{"format": "esv-model/1", "kind": "linear-additive", "classes": {classes}, "feature_dim": 1,
            "parameters": [{{"name": "weights", "shape": [{classes}, 1], "data": {weights:?}}}],
            "empty_prior": {{"scores": {:?}}}}}"#,
        vec![0.0; classes]
    ))
    .unwrap();
    load_model(&spec).unwrap()
}

fn column_sequence(values: &[f64]) -> FeatureSequence<f64> {
    FeatureSequence::new(values.iter().map(|v| vec![*v]).collect()).unwrap()
}

#[test]
fn additive_model_attributes_element_values() {
    let model = additive(&[1.0], 1);
    let x = column_sequence(&[0.1, 0.2, 0.3]);
    let r = exact_esv(&model, &x, &[0], &ExactConfig::default()).unwrap();
    assert!(max_abs_diff(&column(&r, 0), &[0.1, 0.2, 0.3]) < 1e-12);
    assert_eq!(r.provenance.mode, Mode::Exact);
}

#[test]
fn contrast_of_additive_classes_is_score_difference() {
    let model = additive(&[1.0, -2.0], 2);
    let x = column_sequence(&[0.5, -1.0, 2.0]);
    let r = exact_esv(&model, &x, &[0, 1], &ExactConfig::default()).unwrap();
    let delta = contrastive_esv(&r, &r, 0, 1).unwrap();
    let expected: Vec<f64> = [0.5, -1.0, 2.0].iter().map(|v| v * 1.0 - v * -2.0).collect();
    assert!(max_abs_diff(&delta, &expected) < 1e-12);
}

#[test]
fn constant_model_gives_zero_everywhere() {
    let model = additive(&[0.0], 1);
    let x = column_sequence(&[0.3, -0.7, 1.1, 0.0, 2.5, 4.0]);
    for seed in 0..5 {
        for m in [1, 3, 20] {
            let r = approx_esv(&model, &x, &[0], &ApproxConfig::new(m, 2, seed)).unwrap();
            assert!(column(&r, 0).iter().all(|v| *v == 0.0));
            assert!(classify_elements(&r, 0)
                .unwrap()
                .iter()
                .all(|l| *l == ElementRole::Distracting));
        }
    }
}

#[test]
fn eight_elements_saturating_cap_is_exact() {
    for kind in ModelKind::ALL {
        let (model, x) = instance(kind, 8, 77);
        let classes = all_classes(&model);
        let exact = exact_esv(&model, &x, &classes, &ExactConfig::default()).unwrap();
        let approx = approx_esv(&model, &x, &classes, &ApproxConfig::new(70, 1, 4)).unwrap();
        for c in classes {
            assert!(max_abs_diff(&column(&approx, c), &column(&exact, c)) < 1e-9, "{kind}");
        }
    }
}

#[test]
fn duplicated_elements_share_attribution() {
    for kind in [ModelKind::MeanPoolMlp, ModelKind::LinearAdditive] {
        let synth = SyntheticModel::new(kind, 21);
        let model = load_model::<f64>(&synth.spec()).unwrap();
        let base = random_features(5, synth.feature_dim, 3).unwrap();
        let mut rows: Vec<Vec<f64>> = base.elements().map(|e| e.to_vec()).collect();
        rows[3] = rows[1].clone();
        let x = FeatureSequence::new(rows).unwrap();
        let r = exact_esv(&model, &x, &all_classes(&model), &ExactConfig::default()).unwrap();
        assert!(max_abs_diff(&r.phi[1], &r.phi[3]) < 1e-9, "{kind}");
    }
}

#[test]
fn strict_flag_only_matters_above_largest_scale() {
    let mut synth = SyntheticModel::new(ModelKind::PerScaleMlp, 5);
    synth.n_max = 2;
    let model = load_model::<f64>(&synth.spec()).unwrap();
    let mut strict = ApproxConfig::new(1000, 1, 0);
    strict.strict_alg1 = true;

    let short = random_features(2, synth.feature_dim, 1).unwrap();
    let a = approx_esv(&model, &short, &[0], &strict).unwrap();
    let e = exact_esv(&model, &short, &[0], &ExactConfig::default()).unwrap();
    assert!(max_abs_diff(&column(&a, 0), &column(&e, 0)) < 1e-12);

    let long = random_features(5, synth.feature_dim, 1).unwrap();
    let a = approx_esv(&model, &long, &[0], &strict).unwrap();
    let e = exact_esv(&model, &long, &[0], &ExactConfig::default()).unwrap();
    assert!(a.provenance.strict_alg1);
    assert!(max_abs_diff(&column(&a, 0), &column(&e, 0)) > 1e-6);
}

#[test]
fn invalid_configuration_is_a_validation_error() {
    let (model, x) = instance(ModelKind::MeanPoolMlp, 4, 1);
    for config in [ApproxConfig::new(0, 1, 0), ApproxConfig::new(4, 0, 0)] {
        assert!(matches!(
            approx_esv(&model, &x, &[0], &config),
            Err(EsvError::Validation { .. })
        ));
    }
    let too_long = random_features(17, model.feature_dim(), 0).unwrap();
    assert!(matches!(
        exact_esv(&model, &too_long, &[0], &ExactConfig::default()),
        Err(EsvError::Capacity { .. })
    ));
    // approximation has no length limit
    approx_esv(&model, &too_long, &[0], &ApproxConfig::new(8, 1, 0)).unwrap();
}

#[test]
fn long_sequences_beyond_bitmask_width() {
    let (model, x) = instance(ModelKind::PairwiseRelational, 70, 2);
    let r = approx_esv(&model, &x, &[0], &ApproxConfig::new(4, 1, 9)).unwrap();
    assert_eq!(r.len(), 70);
    assert!(r.phi.iter().all(|row| row[0].is_finite()));
    assert!(r.model_calls as usize <= 4 * 70 + 70);
}

#[test]
fn candidate_pool_of_three_singletons() {
    let singles: Vec<SubsequenceIndex> = (0..3).map(SubsequenceIndex::singleton).collect();
    let pairs = candidate_pool(&singles, 3);
    let expected: Vec<SubsequenceIndex> = [0b011u64, 0b101, 0b110]
        .into_iter()
        .map(SubsequenceIndex::from_mask)
        .collect();
    assert_eq!(pairs, expected);
}

#[test]
fn sampled_pools_are_reproducible() {
    let draw = || {
        let mut pool = SamplePool::seeded_singletons(9, 10, 42);
        let mut seen = Vec::new();
        while pool.scale() < 9 {
            pool = pool.grow(9).unwrap();
            assert!(pool.members().len() <= 10);
            seen.push(pool.members().to_vec());
        }
        seen
    };
    assert_eq!(draw(), draw());
}

#[test]
fn mean_correlation_at_moderate_budget_over_thirty_seeds() {
    let mut synth = SyntheticModel::new(ModelKind::PerScaleMlp, 11);
    synth.normalize = true;
    let model = load_model::<f64>(&synth.spec()).unwrap();
    let x = random_features(16, synth.feature_dim, 12).unwrap();
    let class = model
        .evaluate(&x, &SubsequenceIndex::full(16), &CallCounter::new())
        .unwrap()
        .argmax();
    let exact = column(
        &exact_esv(&model, &x, &[class], &ExactConfig::default()).unwrap(),
        class,
    );
    let mut total = 0.0;
    for seed in 0..30 {
        let approx = approx_esv(&model, &x, &[class], &ApproxConfig::new(256, 4, seed)).unwrap();
        total += esv_core::analysis::pearson_r(&column(&approx, class), &exact).unwrap();
    }
    assert!(total / 30.0 >= 0.95, "mean r = {}", total / 30.0);
}

#[test]
fn error_shrinks_as_cap_doubles() {
    let mut synth = SyntheticModel::new(ModelKind::PerScaleMlp, 13);
    synth.normalize = true;
    let model = load_model::<f64>(&synth.spec()).unwrap();
    let x = random_features(16, synth.feature_dim, 14).unwrap();
    let exact = column(&exact_esv(&model, &x, &[0], &ExactConfig::default()).unwrap(), 0);
    let errors: Vec<f64> = [32, 64, 128, 256, 512]
        .iter()
        .map(|&m| {
            (0..30)
                .map(|seed| {
                    let approx = approx_esv(&model, &x, &[0], &ApproxConfig::new(m, 2, seed)).unwrap();
                    relative_error(&column(&approx, 0), &exact).unwrap()
                })
                .sum::<f64>()
                / 30.0
        })
        .collect();
    let inversions = errors.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "mean relative errors {errors:?}");
}

#[test]
fn scalar_type_is_interchangeable() {
    let synth = SyntheticModel::new(ModelKind::PerScaleMlp, 3);
    let m64 = load_model::<f64>(&synth.spec()).unwrap();
    let m32 = load_model::<f32>(&synth.spec()).unwrap();
    let x64 = random_features(7, synth.feature_dim, 3).unwrap();
    let x32 = x64.cast::<f32>();
    let r64 = exact_esv(&m64, &x64, &[1], &ExactConfig::default()).unwrap();
    let r32 = exact_esv(&m32, &x32, &[1], &ExactConfig::default()).unwrap();
    for (a, b) in r64.phi.iter().zip(&r32.phi) {
        assert!((a[0] - f64::from(b[0])).abs() < 1e-4);
    }
    let total: f32 = r32.phi.iter().map(|r| r[0]).sum();
    assert!((total - r32.evidential[0]).abs() < 1e-5);
    let a32 = approx_esv(&m32, &x32, &[1], &ApproxConfig::new(35, 1, 0)).unwrap();
    for (a, b) in a32.phi.iter().zip(&r32.phi) {
        assert!((a[0] - b[0]).abs() < 1e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_matches_oracle_and_is_efficient(kind in 0usize..4, n in 1usize..9, seed in any::<u64>()) {
        let (model, x) = instance(ModelKind::ALL[kind], n, seed);
        let classes = all_classes(&model);
        let r = exact_esv(&model, &x, &classes, &ExactConfig::default()).unwrap();
        prop_assert!(efficiency_gap(&model, &x, &r) < 1e-9);
        for &c in &classes {
            let oracle = brute_force_esv(&model, &x, c, 16).unwrap();
            prop_assert!(max_abs_diff(&column(&r, c), &oracle) < 1e-9);
        }
    }

    #[test]
    fn approx_is_deterministic_and_within_budget(
        kind in 0usize..4, n in 1usize..14, m in 1usize..40, iterations in 1usize..4, seed in any::<u64>()
    ) {
        let (model, x) = instance(ModelKind::ALL[kind], n, seed);
        let config = ApproxConfig::new(m, iterations, seed);
        let a = approx_esv(&model, &x, &[0], &config).unwrap();
        let b = approx_esv(&model, &x, &[0], &config).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.model_calls as usize <= m * iterations * n + n);
        prop_assert!(a.phi.iter().all(|row| row[0].is_finite()));
    }

    #[test]
    fn contrast_matches_difference_model(kind in 0usize..4, n in 1usize..7, seed in any::<u64>()) {
        let (model, x) = instance(ModelKind::ALL[kind], n, seed);
        let classes = all_classes(&model);
        let r = exact_esv(&model, &x, &classes, &ExactConfig::default()).unwrap();
        let (gt, pt) = (0, classes.len() - 1);
        let delta = contrastive_esv(&r, &r, gt, pt).unwrap();
        let diff = model.class_combination(&[(gt, 1.0), (pt, -1.0)]).unwrap();
        let direct = exact_esv(&diff, &x, &[0], &ExactConfig::default()).unwrap();
        prop_assert!(max_abs_diff(&delta, &column(&direct, 0)) < 1e-9);
    }
}
