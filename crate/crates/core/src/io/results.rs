use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::engine::{AttributionResult, Mode, Provenance};
use crate::error::{EsvError, Result};
use crate::scalar::Scalar;

pub const RESULT_FORMAT: &str = "esv-result/1";

/// Class-contrastive column `phi[gt] - phi[pt]` stored alongside a result.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastColumn<T> {
    pub gt: usize,
    pub pt: usize,
    pub delta: Vec<T>,
}

/// Everything a result file holds.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultDocument<T> {
    pub result: AttributionResult<T>,
    pub contrast: Option<ContrastColumn<T>>,
}

/// Real written in scientific notation with 17 significant digits.
#[derive(Debug, Clone, Copy)]
struct Real(f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw: &RawValue = Deserialize::deserialize(d)?;
        raw.get()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Real)
            .ok_or_else(|| serde::de::Error::custom(format!("'{}' is not a finite real", raw.get())))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContrastDoc {
    gt: usize,
    pt: usize,
    delta: Vec<Real>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResultDoc {
    format: String,
    mode: String,
    n: usize,
    classes: Vec<usize>,
    m: Option<usize>,
    iterations: Option<usize>,
    seed: Option<u64>,
    strict_alg1: bool,
    model_calls: u64,
    evidential: Vec<Real>,
    phi: Vec<Vec<Real>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    contrast: Option<ContrastDoc>,
}

fn reals<T: Scalar>(v: &[T]) -> Vec<Real> {
    v.iter().map(|x| Real(x.to_f64_lossy())).collect()
}

fn scalars<T: Scalar>(v: &[Real]) -> Vec<T> {
    v.iter().map(|x| T::lit(x.0)).collect()
}

/// Pretty-printed JSON; identical inputs give identical bytes.
pub fn render_result<T: Scalar>(doc: &ResultDocument<T>) -> String {
    let r = &doc.result;
    let p = &r.provenance;
    let out = ResultDoc {
        format: RESULT_FORMAT.to_string(),
        mode: p.mode.as_str().to_string(),
        n: p.n,
        classes: r.classes.clone(),
        m: p.m,
        iterations: p.iterations,
        seed: p.seed,
        strict_alg1: p.strict_alg1,
        model_calls: r.model_calls,
        evidential: reals(&r.evidential),
        phi: r.phi.iter().map(|row| reals(row)).collect(),
        contrast: doc.contrast.as_ref().map(|c| ContrastDoc {
            gt: c.gt,
            pt: c.pt,
            delta: reals(&c.delta),
        }),
    };
    let mut text = serde_json::to_string_pretty(&out).expect("result document serializes");
    text.push('\n');
    text
}

pub fn parse_result<T: Scalar>(text: &str) -> Result<ResultDocument<T>> {
    let doc: ResultDoc = serde_json::from_str(text).map_err(|e| EsvError::validation("result", e.to_string()))?;
    if doc.format != RESULT_FORMAT {
        return Err(EsvError::validation(
            "format",
            format!("expected '{RESULT_FORMAT}', found '{}'", doc.format),
        ));
    }
    let mode = match doc.mode.as_str() {
        "exact" => Mode::Exact,
        "approx" => Mode::Approx,
        other => return Err(EsvError::validation("mode", format!("unknown mode '{other}'"))),
    };
    let k = doc.classes.len();
    if doc.evidential.len() != k {
        return Err(EsvError::validation("evidential", format!("expected {k} entries")));
    }
    if doc.phi.len() != doc.n {
        return Err(EsvError::validation("phi", format!("expected {} rows", doc.n)));
    }
    if let Some(i) = doc.phi.iter().position(|row| row.len() != k) {
        return Err(EsvError::validation(
            format!("phi[{i}]"),
            format!("expected {k} entries"),
        ));
    }
    if let Some(c) = &doc.contrast {
        if c.delta.len() != doc.n {
            return Err(EsvError::validation(
                "contrast.delta",
                format!("expected {} entries", doc.n),
            ));
        }
    }
    Ok(ResultDocument {
        result: AttributionResult {
            classes: doc.classes,
            phi: doc.phi.iter().map(|row| scalars(row)).collect(),
            evidential: scalars(&doc.evidential),
            provenance: Provenance {
                mode,
                n: doc.n,
                m: doc.m,
                iterations: doc.iterations,
                seed: doc.seed,
                strict_alg1: doc.strict_alg1,
            },
            model_calls: doc.model_calls,
        },
        contrast: doc.contrast.map(|c| ContrastColumn {
            gt: c.gt,
            pt: c.pt,
            delta: scalars(&c.delta),
        }),
    })
}
