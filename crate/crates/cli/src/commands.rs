use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use esv_core::analysis::{ablate_by_rank, batch_quality, EvalItem, QualityCell, QualityGrid};
use esv_core::engine::{approx_esv, contrastive_esv, exact_esv, ApproxConfig, AttributionResult, ExactConfig};
use esv_core::io::{
    read_features_bytes, render_result, write_atomic, write_features_binary, write_features_text, ContrastColumn,
    FeatureFile, ResultDocument,
};
use esv_core::model::synthetic::{random_features, SyntheticModel};
use esv_core::model::{load_model, CallCounter, ModelSpec};
use esv_core::sequence::{FeatureSequence, SubsequenceIndex};
use esv_core::{EsvError, Model, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::args::{
    AblateArgs, AttributeArgs, ContrastArgs, EngineArgs, EvalApproxArgs, GenFeaturesArgs, GenModelArgs, InputArgs,
    ModeArg, RerunArgs,
};
use crate::manifest::{digest, Manifest};

/// What a command produced, before anything touches the output path.
pub struct Product {
    pub command: &'static str,
    pub flags: Value,
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, String>,
    pub model_calls: Option<u64>,
    pub body: Vec<u8>,
    pub output: Option<PathBuf>,
    /// Tracks whether a manifest is written beside the output.
    pub reproducible: bool,
    pub summary: Map<String, Value>,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| EsvError::io(path.display().to_string(), e))
}

struct Inputs {
    model: Model,
    x: FeatureSequence<f64>,
    digests: BTreeMap<String, String>,
}

fn load_model_file(path: &Path, nmax: Option<usize>, digests: &mut BTreeMap<String, String>) -> Result<Model> {
    let bytes = read_bytes(path)?;
    digests.insert(path.display().to_string(), digest(&bytes));
    let text = String::from_utf8(bytes).map_err(|_| EsvError::validation("model", "not UTF-8 text"))?;
    let model = load_model(&ModelSpec::from_json(&text)?)?;
    match nmax {
        Some(k) => model.with_max_scale(k),
        None => Ok(model),
    }
}

fn load_features_file(path: &Path, digests: &mut BTreeMap<String, String>) -> Result<FeatureSequence<f64>> {
    let bytes = read_bytes(path)?;
    digests.insert(path.display().to_string(), digest(&bytes));
    Ok(read_features_bytes(&bytes)?.sequence)
}

fn load(input: &InputArgs, engine: &EngineArgs) -> Result<Inputs> {
    let mut digests = BTreeMap::new();
    let model = load_model_file(&input.model, engine.nmax, &mut digests)?;
    let x = load_features_file(&input.features, &mut digests)?;
    model.check_input(&x)?;
    Ok(Inputs { model, x, digests })
}

fn parse_classes(spec: &str, model: &Model) -> Result<Vec<usize>> {
    if spec.trim() == "all" {
        return Ok((0..model.num_classes()).collect());
    }
    let mut classes = Vec::new();
    for part in spec.split(',') {
        let c: usize = part
            .trim()
            .parse()
            .map_err(|_| EsvError::validation("classes", format!("'{}' is not a class index", part.trim())))?;
        if classes.contains(&c) {
            return Err(EsvError::validation("classes", format!("class {c} listed twice")));
        }
        classes.push(c);
    }
    Ok(classes)
}

fn attribute_with(
    engine: &EngineArgs,
    model: &Model,
    x: &FeatureSequence<f64>,
    classes: &[usize],
) -> Result<AttributionResult<f64>> {
    match engine.mode {
        ModeArg::Exact => {
            for (flag, set) in [
                ("m", engine.m.is_some()),
                ("iterations", engine.iterations.is_some()),
                ("strict-alg1", engine.strict_alg1),
            ] {
                if set {
                    return Err(EsvError::validation(flag, "only used with --mode approx"));
                }
            }
            exact_esv(
                model,
                x,
                classes,
                &ExactConfig {
                    exhaustive_limit: engine.exhaustive_limit,
                },
            )
        }
        ModeArg::Approx => {
            let need = |v: Option<usize>, flag: &str| {
                v.ok_or_else(|| EsvError::validation(flag, "required with --mode approx"))
            };
            let config = ApproxConfig {
                m: need(engine.m, "m")?,
                iterations: need(engine.iterations, "iterations")?,
                seed: engine
                    .seed
                    .ok_or_else(|| EsvError::validation("seed", "required with --mode approx"))?,
                strict_alg1: engine.strict_alg1,
            };
            approx_esv(model, x, classes, &config)
        }
    }
}

fn flags<A: Serialize>(args: &A) -> Value {
    serde_json::to_value(args).expect("flags serialize")
}

fn summary(pairs: &[(&str, Value)]) -> Map<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

pub fn attribute(args: &AttributeArgs) -> Result<Product> {
    let inputs = load(&args.input, &args.engine)?;
    let classes = parse_classes(&args.classes, &inputs.model)?;
    let result = attribute_with(&args.engine, &inputs.model, &inputs.x, &classes)?;
    let calls = result.model_calls;
    let doc = ResultDocument { result, contrast: None };
    Ok(Product {
        command: "attribute",
        flags: flags(args),
        seed: args.engine.seed,
        inputs: inputs.digests,
        model_calls: Some(calls),
        body: render_result(&doc).into_bytes(),
        output: Some(args.output.clone()),
        reproducible: true,
        summary: summary(&[
            ("n", json!(inputs.x.len())),
            ("classes", json!(classes)),
            ("model_calls", json!(calls)),
        ]),
    })
}

pub fn contrast(args: &ContrastArgs) -> Result<Product> {
    let inputs = load(&args.input, &args.engine)?;
    let mut classes = vec![args.gt];
    if args.pt != args.gt {
        classes.push(args.pt);
    }
    let result = attribute_with(&args.engine, &inputs.model, &inputs.x, &classes)?;
    let delta = contrastive_esv(&result, &result, args.gt, args.pt)?;
    let calls = result.model_calls;
    let doc = ResultDocument {
        result,
        contrast: Some(ContrastColumn {
            gt: args.gt,
            pt: args.pt,
            delta,
        }),
    };
    Ok(Product {
        command: "contrast",
        flags: flags(args),
        seed: args.engine.seed,
        inputs: inputs.digests,
        model_calls: Some(calls),
        body: render_result(&doc).into_bytes(),
        output: Some(args.output.clone()),
        reproducible: true,
        summary: summary(&[
            ("n", json!(inputs.x.len())),
            ("gt", json!(args.gt)),
            ("pt", json!(args.pt)),
            ("model_calls", json!(calls)),
        ]),
    })
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

pub fn ablate(args: &AblateArgs) -> Result<Product> {
    let inputs = load(&args.input, &args.engine)?;
    inputs.model.check_class(args.class)?;
    inputs.model.check_class(args.label)?;
    let result = if args.order.needs_attribution() {
        Some(attribute_with(&args.engine, &inputs.model, &inputs.x, &[args.class])?)
    } else {
        None
    };
    let seed = args.engine.seed.unwrap_or(0);
    let curve = ablate_by_rank(
        &inputs.model,
        &inputs.x,
        result.as_ref(),
        args.class,
        args.label,
        args.order,
        seed,
    )?;
    let rows = curve.points.iter().enumerate().map(|(step, p)| {
        vec![
            step.to_string(),
            p.remaining.to_string(),
            if step == 0 {
                String::new()
            } else {
                curve.removal[step - 1].to_string()
            },
            p.score.to_string(),
            p.correct.to_string(),
        ]
    });
    let body = csv_table(&["step", "elements_remaining", "removed", "score", "correct"], rows);
    Ok(Product {
        command: "ablate",
        flags: flags(args),
        seed: args.engine.seed,
        inputs: inputs.digests,
        model_calls: result.as_ref().map(|r| r.model_calls),
        body,
        output: args.output.clone(),
        reproducible: true,
        summary: summary(&[("n", json!(inputs.x.len())), ("order", json!(args.order.as_str()))]),
    })
}

fn feature_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| EsvError::io(dir.display().to_string(), e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| EsvError::io(dir.display().to_string(), e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if path.is_file() && (ext == "csv" || ext == "esvf") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn metric_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into())
}

pub fn eval_approx(args: &EvalApproxArgs) -> Result<Product> {
    let mut digests = BTreeMap::new();
    let model = load_model_file(&args.model, args.nmax, &mut digests)?;
    let mut sequences = Vec::new();
    for path in feature_files(&args.dir)? {
        let x = load_features_file(&path, &mut digests)?;
        model
            .check_input(&x)
            .map_err(|e| EsvError::validation(path.display().to_string(), e.to_string()))?;
        sequences.push(x);
    }
    let calls = CallCounter::new();
    let mut items = Vec::with_capacity(sequences.len());
    for x in &sequences {
        let class = match args.class {
            Some(c) => {
                model.check_class(c)?;
                c
            }
            None => model.evaluate(x, &SubsequenceIndex::full(x.len()), &calls)?.argmax(),
        };
        items.push(EvalItem {
            model: &model,
            x,
            class,
        });
    }
    let grid = QualityGrid {
        m_grid: args.m_grid.clone(),
        iteration_grid: args.iterations_grid.clone(),
        seeds: args.seeds.clone(),
        min_evidential: args.min_evidential,
        strict_alg1: args.strict_alg1,
        exact: ExactConfig {
            exhaustive_limit: args.exhaustive_limit,
        },
    };
    if grid.seeds.is_empty() || grid.m_grid.is_empty() || grid.iteration_grid.is_empty() {
        return Err(EsvError::validation(
            "grid",
            "m, iteration and seed lists must be nonempty",
        ));
    }
    let cells = batch_quality(&items, &grid)?;
    let kept = cells.first().map_or(0, |c| c.report.per_video.len());
    let rows = cells.iter().map(|c: &QualityCell<f64>| {
        vec![
            c.m.to_string(),
            c.iterations.to_string(),
            c.sampled_percent.to_string(),
            metric_field(c.report.relative_error),
            metric_field(c.report.lad_slope),
            metric_field(c.report.pearson_r),
            c.report.per_video.len().to_string(),
            c.report.gaps.to_string(),
        ]
    });
    let body = csv_table(
        &[
            "m",
            "iterations",
            "sampled_percent",
            "relative_error",
            "lad_slope",
            "pearson_r",
            "inputs",
            "gaps",
        ],
        rows,
    );
    Ok(Product {
        command: "eval-approx",
        flags: flags(args),
        seed: None,
        inputs: digests,
        model_calls: None,
        body,
        output: args.output.clone(),
        reproducible: true,
        summary: summary(&[
            ("inputs", json!(sequences.len())),
            ("kept", json!(kept)),
            ("cells", json!(cells.len())),
        ]),
    })
}

pub fn gen_model(args: &GenModelArgs) -> Result<Product> {
    let synth = SyntheticModel {
        kind: args.kind,
        classes: args.classes,
        feature_dim: args.feature_dim,
        hidden: args.hidden,
        n_max: args.nmax,
        normalize: args.normalize,
        weight_scale: args.weight_scale,
        seed: args.seed,
    };
    let spec = synth.spec();
    load_model::<f64>(&spec)?;
    let mut text = spec.to_json();
    text.push('\n');
    Ok(Product {
        command: "gen-model",
        flags: Value::Null,
        seed: Some(args.seed),
        inputs: BTreeMap::new(),
        model_calls: None,
        body: text.into_bytes(),
        output: Some(args.output.clone()),
        reproducible: false,
        summary: summary(&[("kind", json!(args.kind.as_str())), ("classes", json!(args.classes))]),
    })
}

pub fn gen_features(args: &GenFeaturesArgs) -> Result<Product> {
    if args.n == 0 || args.dim == 0 {
        return Err(EsvError::validation(
            "n",
            "sequence length and dimension must be at least 1",
        ));
    }
    let timestamps = match args.timestep {
        Some(dt) if !dt.is_finite() => return Err(EsvError::validation("timestep", "must be finite")),
        Some(dt) => Some((0..args.n).map(|i| i as f64 * dt).collect()),
        None => None,
    };
    let file = FeatureFile {
        sequence: random_features(args.n, args.dim, args.seed)?,
        timestamps,
    };
    let body = if args.binary {
        write_features_binary(&file)
    } else {
        write_features_text(&file).into_bytes()
    };
    Ok(Product {
        command: "gen-features",
        flags: Value::Null,
        seed: Some(args.seed),
        inputs: BTreeMap::new(),
        model_calls: None,
        body,
        output: Some(args.output.clone()),
        reproducible: false,
        summary: summary(&[("n", json!(args.n)), ("dim", json!(args.dim))]),
    })
}

fn recorded<A: DeserializeOwned>(manifest: &Manifest) -> Result<A> {
    serde_json::from_value(manifest.flags.clone()).map_err(|e| EsvError::validation("manifest.flags", e.to_string()))
}

pub fn rerun(args: &RerunArgs) -> Result<Product> {
    let manifest = Manifest::read(&args.manifest)?;
    for (path, expected) in &manifest.inputs {
        let actual = digest(&read_bytes(Path::new(path))?);
        if &actual != expected {
            return Err(EsvError::validation(
                path.clone(),
                "input changed since the manifest was written",
            ));
        }
    }
    let mut product = match manifest.command.as_str() {
        "attribute" => {
            let mut a: AttributeArgs = recorded(&manifest)?;
            if let Some(o) = &args.output {
                a.output = o.clone();
            }
            attribute(&a)?
        }
        "contrast" => {
            let mut a: ContrastArgs = recorded(&manifest)?;
            if let Some(o) = &args.output {
                a.output = o.clone();
            }
            contrast(&a)?
        }
        "ablate" => {
            let mut a: AblateArgs = recorded(&manifest)?;
            a.output = args.output.clone().or(a.output);
            ablate(&a)?
        }
        "eval-approx" => {
            let mut a: EvalApproxArgs = recorded(&manifest)?;
            a.output = args.output.clone().or(a.output);
            eval_approx(&a)?
        }
        other => {
            return Err(EsvError::validation(
                "manifest.command",
                format!("cannot rerun '{other}'"),
            ))
        }
    };
    product.summary.insert(
        "reproduced".into(),
        json!(digest(&product.body) == manifest.output_digest),
    );
    Ok(product)
}

/// Writes the output (or prints it) and the manifest; returns the summary.
pub fn finish(product: Product, started: std::time::Instant) -> Result<Map<String, Value>> {
    let mut summary = product.summary;
    summary.insert("command".into(), json!(product.command));
    match &product.output {
        Some(path) => {
            write_atomic(path, &product.body)?;
            summary.insert("output".into(), json!(path.display().to_string()));
            if product.reproducible {
                Manifest {
                    format: crate::manifest::MANIFEST_FORMAT.into(),
                    command: product.command.into(),
                    flags: product.flags,
                    seed: product.seed,
                    inputs: product.inputs,
                    output_digest: digest(&product.body),
                    model_calls: product.model_calls,
                    wall_time_seconds: started.elapsed().as_secs_f64(),
                    version: env!("CARGO_PKG_VERSION").into(),
                }
                .write(path)?;
            }
        }
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&product.body)
                .map_err(|e| EsvError::io("stdout", e))?;
        }
    }
    Ok(summary)
}
