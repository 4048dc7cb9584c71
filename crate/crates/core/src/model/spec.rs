use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::builtin::{Dense, LinearAdditive, MeanPoolMlp, Mlp, PairwiseRelational, ScaleMlp};
use super::{DirectScorer, EmptyPrior, FixedScaleModel, MultiScaleModel, Scorer};
use crate::error::{EsvError, Result};
use crate::scalar::Scalar;

/// Format tag every model document must carry.
pub const MODEL_FORMAT: &str = "esv-model/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    LinearAdditive,
    MeanPoolMlp,
    PerScaleMlp,
    PairwiseRelational,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::LinearAdditive,
        ModelKind::MeanPoolMlp,
        ModelKind::PerScaleMlp,
        ModelKind::PairwiseRelational,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::LinearAdditive => "linear-additive",
            ModelKind::MeanPoolMlp => "mean-pool-mlp",
            ModelKind::PerScaleMlp => "per-scale-mlp",
            ModelKind::PairwiseRelational => "pairwise-relational",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = EsvError;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| EsvError::validation("kind", format!("unknown model kind '{s}'")))
    }
}

/// A named, row-major parameter array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub scores: Vec<f64>,
    #[serde(default)]
    pub distribution: bool,
}

/// On-disk model description (JSON document).
///
/// Parameter names by kind, with `C` classes, `D` features and hidden width `H`:
///
/// | kind | parameters |
/// |------|------------|
/// | `linear-additive` | `weights [C, D]` |
/// | `mean-pool-mlp` | `w1 [H, D]`, `b1 [H]`, `w2 [C, H]`, `b2 [C]` |
/// | `pairwise-relational` | `unary [C, D]`, `pair.w1 [H, 2D]`, `pair.b1 [H]`, `pair.w2 [C, H]`, `pair.b2 [C]` |
/// | `per-scale-mlp` | `scale{s}.w1 [H, sD]`, `scale{s}.b1`, `scale{s}.w2`, `scale{s}.b2` for `s = 1..=n_max` |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub format: String,
    pub kind: String,
    pub classes: usize,
    pub feature_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    /// Softmax every leaf model output before aggregation.
    #[serde(default)]
    pub normalize: bool,
    pub parameters: Vec<ParameterArray>,
    pub empty_prior: PriorSpec,
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| EsvError::validation("model", e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model spec serializes")
    }

    pub fn model_kind(&self) -> Result<ModelKind> {
        self.kind.parse()
    }

    /// Structural checks that do not depend on the scalar type.
    pub fn validate(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(EsvError::validation(
                "format",
                format!("expected '{MODEL_FORMAT}', found '{}'", self.format),
            ));
        }
        let kind = self.model_kind()?;
        if self.classes == 0 {
            return Err(EsvError::validation("classes", "must be at least 1"));
        }
        if self.feature_dim == 0 {
            return Err(EsvError::validation("feature_dim", "must be at least 1"));
        }
        match (kind, self.n_max) {
            (ModelKind::PerScaleMlp, None) => return Err(EsvError::validation("n_max", "required for per-scale-mlp")),
            (ModelKind::PerScaleMlp, Some(0)) => return Err(EsvError::validation("n_max", "must be at least 1")),
            (ModelKind::PerScaleMlp, _) | (_, None) => {}
            (_, Some(_)) => return Err(EsvError::validation("n_max", format!("not used by {kind}"))),
        }
        if self.empty_prior.scores.len() != self.classes {
            return Err(EsvError::validation(
                "empty_prior.scores",
                format!(
                    "expected {} entries, found {}",
                    self.classes,
                    self.empty_prior.scores.len()
                ),
            ));
        }
        let mut seen = BTreeMap::new();
        for (k, p) in self.parameters.iter().enumerate() {
            let path = format!("parameters[{k}]");
            let expected: usize = p.shape.iter().product();
            if p.shape.is_empty() || expected != p.data.len() {
                return Err(EsvError::validation(
                    format!("{path}.data"),
                    format!("shape {:?} needs {expected} values, found {}", p.shape, p.data.len()),
                ));
            }
            if let Some(j) = p.data.iter().position(|v| !v.is_finite()) {
                return Err(EsvError::validation(
                    format!("{path}.data[{j}]"),
                    "parameters must be finite",
                ));
            }
            if seen.insert(p.name.as_str(), k).is_some() {
                return Err(EsvError::validation(
                    format!("{path}.name"),
                    format!("duplicate parameter '{}'", p.name),
                ));
            }
        }
        Ok(())
    }
}

struct Params<'a> {
    by_name: BTreeMap<&'a str, &'a ParameterArray>,
    used: Vec<&'a str>,
}

impl<'a> Params<'a> {
    fn new(spec: &'a ModelSpec) -> Self {
        Self {
            by_name: spec.parameters.iter().map(|p| (p.name.as_str(), p)).collect(),
            used: Vec::new(),
        }
    }

    fn take(&mut self, name: &str) -> Result<&'a ParameterArray> {
        let p = self
            .by_name
            .get(name)
            .copied()
            .ok_or_else(|| EsvError::validation(format!("parameters.{name}"), "missing parameter"))?;
        self.used.push(p.name.as_str());
        Ok(p)
    }

    fn matrix<T: Scalar>(&mut self, name: &str, rows: Option<usize>, cols: usize) -> Result<Dense<T>> {
        let p = self.take(name)?;
        let ok = p.shape.len() == 2 && rows.is_none_or(|r| p.shape[0] == r) && p.shape[1] == cols;
        if !ok {
            let want = match rows {
                Some(r) => format!("[{r}, {cols}]"),
                None => format!("[H, {cols}]"),
            };
            return Err(EsvError::validation(
                format!("parameters.{name}.shape"),
                format!("expected {want}, found {:?}", p.shape),
            ));
        }
        Dense::new(p.shape[0], p.shape[1], p.data.iter().map(|v| T::lit(*v)).collect())
    }

    fn vector<T: Scalar>(&mut self, name: &str, len: usize) -> Result<Vec<T>> {
        let p = self.take(name)?;
        if p.shape != [len] {
            return Err(EsvError::validation(
                format!("parameters.{name}.shape"),
                format!("expected [{len}], found {:?}", p.shape),
            ));
        }
        Ok(p.data.iter().map(|v| T::lit(*v)).collect())
    }

    fn mlp<T: Scalar>(&mut self, names: [&str; 4], input: usize, classes: usize) -> Result<Mlp<T>> {
        let w1 = self.matrix(names[0], None, input)?;
        let hidden = w1.rows();
        let b1 = self.vector(names[1], hidden)?;
        let w2 = self.matrix(names[2], Some(classes), hidden)?;
        let b2 = self.vector(names[3], classes)?;
        Mlp::new(w1, b1, w2, b2)
    }

    fn finish(self) -> Result<()> {
        for name in self.by_name.keys() {
            if !self.used.contains(name) {
                return Err(EsvError::validation(
                    format!("parameters.{name}"),
                    "unexpected parameter",
                ));
            }
        }
        Ok(())
    }
}

/// Builds an immutable scorer from a validated description.
///
/// `per-scale-mlp` becomes a [`MultiScaleModel`]; the other kinds accept any
/// input length and are scored directly.
pub fn load_model<T: Scalar>(spec: &ModelSpec) -> Result<Scorer<T>> {
    spec.validate()?;
    let kind = spec.model_kind()?;
    let (c, d) = (spec.classes, spec.feature_dim);
    let prior = EmptyPrior::new(
        spec.empty_prior.scores.iter().map(|v| T::lit(*v)).collect(),
        spec.empty_prior.distribution,
    )?;
    let mut params = Params::new(spec);
    let scorer = match kind {
        ModelKind::LinearAdditive => {
            let weights = params.matrix("weights", Some(c), d)?;
            let model = LinearAdditive::new(weights, prior.scores().as_slice().to_vec())?;
            Scorer::VariableLength(DirectScorer::new(Arc::new(model), prior, spec.normalize)?)
        }
        ModelKind::MeanPoolMlp => {
            let mlp = params.mlp(["w1", "b1", "w2", "b2"], d, c)?;
            Scorer::VariableLength(DirectScorer::new(
                Arc::new(MeanPoolMlp::new(mlp)),
                prior,
                spec.normalize,
            )?)
        }
        ModelKind::PairwiseRelational => {
            let unary = params.matrix("unary", Some(c), d)?;
            let pair = params.mlp(["pair.w1", "pair.b1", "pair.w2", "pair.b2"], 2 * d, c)?;
            let model = PairwiseRelational::new(unary, pair)?;
            Scorer::VariableLength(DirectScorer::new(Arc::new(model), prior, spec.normalize)?)
        }
        ModelKind::PerScaleMlp => {
            let n_max = spec.n_max.expect("validated");
            let names: Vec<[String; 4]> = (1..=n_max)
                .map(|s| {
                    [
                        format!("scale{s}.w1"),
                        format!("scale{s}.b1"),
                        format!("scale{s}.w2"),
                        format!("scale{s}.b2"),
                    ]
                })
                .collect();
            let mut scales: Vec<Arc<dyn FixedScaleModel<T>>> = Vec::with_capacity(n_max);
            for (k, n) in names.iter().enumerate() {
                let s = k + 1;
                let mlp = params.mlp([&n[0], &n[1], &n[2], &n[3]], s * d, c)?;
                scales.push(Arc::new(ScaleMlp::new(s, mlp)?));
            }
            params.finish()?;
            return Ok(Scorer::MultiScale(MultiScaleModel::new(scales, prior, spec.normalize)?));
        }
    };
    params.finish()?;
    Ok(scorer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::synthetic::SyntheticModel;

    fn linear() -> ModelSpec {
        ModelSpec::from_json(
            r#"{"format": "esv-model/1", "kind": "linear-additive", "classes": 2, "feature_dim": 1,
                "parameters": [{"name": "weights", "shape": [2, 1], "data": [1.0, -2.0]}],
                "empty_prior": {"scores": [0.5, 0.5], "distribution": true}}"#,
        )
        .unwrap()
    }

    fn path_of(spec: &ModelSpec) -> String {
        match load_model::<f64>(spec) {
            Err(EsvError::Validation { path, .. }) => path,
            other => panic!("expected a validation error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn loads_and_round_trips() {
        let spec = linear();
        let model = load_model::<f64>(&spec).unwrap();
        assert_eq!((model.num_classes(), model.feature_dim()), (2, 1));
        assert_eq!(ModelSpec::from_json(&spec.to_json()).unwrap(), spec);
        for kind in ModelKind::ALL {
            let s = SyntheticModel::new(kind, 0).spec();
            assert_eq!(ModelSpec::from_json(&s.to_json()).unwrap(), s);
            load_model::<f32>(&s).unwrap();
        }
    }

    #[test]
    fn errors_name_the_offending_field() {
        let mut s = linear();
        s.format = "esv-model/2".into();
        assert_eq!(path_of(&s), "format");

        let mut s = linear();
        s.kind = "lstm".into();
        assert_eq!(path_of(&s), "kind");

        let mut s = linear();
        s.parameters[0].shape = vec![1, 2];
        assert!(path_of(&s).starts_with("parameters"));

        let mut s = linear();
        s.parameters[0].data[1] = f64::NAN;
        assert!(path_of(&s).contains("data[1]"));

        let mut s = linear();
        s.empty_prior.scores = vec![0.7, 0.7];
        assert!(path_of(&s).starts_with("empty_prior"));

        let mut s = linear();
        s.n_max = Some(2);
        assert_eq!(path_of(&s), "n_max");

        let mut s = linear();
        s.parameters.push(ParameterArray {
            name: "extra".into(),
            shape: vec![1],
            data: vec![0.0],
        });
        assert_eq!(path_of(&s), "parameters.extra");

        let mut s = SyntheticModel::new(ModelKind::PerScaleMlp, 0).spec();
        s.n_max = None;
        assert_eq!(path_of(&s), "n_max");
    }

    #[test]
    fn eight_scale_model_has_eight_scales() {
        let mut synth = SyntheticModel::new(ModelKind::PerScaleMlp, 1);
        synth.n_max = 8;
        let model = load_model::<f64>(&synth.spec()).unwrap();
        assert_eq!(model.as_multiscale().unwrap().n_max(), 8);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = linear().to_json().replacen("{", "{\"bogus\": 1,", 1);
        assert!(ModelSpec::from_json(&text).is_err());
    }
}
