use esv_core::engine::{approx_esv, exact_esv, ApproxConfig, ExactConfig};
use esv_core::io::{
    parse_result, read_features, render_result, write_atomic, write_features_binary, write_features_text,
    ContrastColumn, FeatureFile, ResultDocument,
};
use esv_core::model::synthetic::{random_features, SyntheticModel};
use esv_core::model::{load_model, ModelKind, ModelSpec};

#[test]
fn feature_files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let file = FeatureFile {
        sequence: random_features(5, 3, 1).unwrap(),
        timestamps: Some(vec![0.0, 0.04, 0.08, 0.12, 0.16]),
    };
    let text = dir.path().join("x.csv");
    let binary = dir.path().join("x.esvf");
    write_atomic(&text, write_features_text(&file).as_bytes()).unwrap();
    write_atomic(&binary, &write_features_binary(&file)).unwrap();
    assert_eq!(read_features(&text).unwrap(), file);
    assert_eq!(read_features(&binary).unwrap(), file);
    assert_eq!(read_features(&dir.path().join("missing")).unwrap_err().class(), "io");
}

#[test]
fn results_round_trip_exactly() {
    let synth = SyntheticModel::new(ModelKind::PerScaleMlp, 6);
    let model = load_model::<f64>(&synth.spec()).unwrap();
    let x = random_features(9, synth.feature_dim, 2).unwrap();
    let exact = exact_esv(&model, &x, &[0, 2], &ExactConfig::default()).unwrap();
    let approx = approx_esv(&model, &x, &[1], &ApproxConfig::new(12, 3, 77)).unwrap();
    let delta: Vec<f64> = exact.phi.iter().map(|r| r[0] - r[1]).collect();
    for doc in [
        ResultDocument {
            result: exact.clone(),
            contrast: Some(ContrastColumn { gt: 0, pt: 2, delta }),
        },
        ResultDocument {
            result: approx,
            contrast: None,
        },
    ] {
        let text = render_result(&doc);
        assert_eq!(parse_result::<f64>(&text).unwrap(), doc);
        assert_eq!(render_result(&parse_result::<f64>(&text).unwrap()), text);
    }
}

#[test]
fn atomic_write_replaces_whole_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    write_atomic(&path, b"first version, longer").unwrap();
    write_atomic(&path, b"second").unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), b"second");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    assert!(write_atomic(&dir.path().join("no/such/dir/out"), b"x").is_err());
}

#[test]
fn model_documents_survive_disk() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ModelKind::ALL {
        let spec = SyntheticModel::new(kind, 3).spec();
        let path = dir.path().join(format!("{kind}.json"));
        write_atomic(&path, spec.to_json().as_bytes()).unwrap();
        let back = ModelSpec::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
