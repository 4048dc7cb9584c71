use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{EsvError, Result};
use crate::sequence::FeatureSequence;

/// First field of the text header line: `esv-features,<n>,<D>[,timestamps]`.
pub const TEXT_TAG: &str = "esv-features";
/// Leading bytes of the packed binary layout.
pub const BINARY_MAGIC: &[u8; 4] = b"ESVF";
const BINARY_VERSION: u32 = 1;
const FLAG_TIMESTAMPS: u32 = 1;

/// A feature sequence with optional per-element timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub sequence: FeatureSequence<f64>,
    pub timestamps: Option<Vec<f64>>,
}

/// Reads either layout, chosen by the leading magic bytes.
pub fn read_features(path: &Path) -> Result<FeatureFile> {
    let bytes = std::fs::read(path).map_err(|e| EsvError::io(path.display().to_string(), e))?;
    read_features_bytes(&bytes)
}

pub fn read_features_bytes(bytes: &[u8]) -> Result<FeatureFile> {
    if bytes.starts_with(BINARY_MAGIC) {
        read_binary(bytes)
    } else {
        read_text(bytes)
    }
}

fn parse_real(field: &str, path: impl FnOnce() -> String) -> Result<f64> {
    match field.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(EsvError::validation(
            path(),
            format!("'{}' is not a finite real", field.trim()),
        )),
    }
}

fn parse_count(field: Option<&str>, name: &str) -> Result<usize> {
    field
        .and_then(|f| f.trim().parse::<usize>().ok())
        .ok_or_else(|| EsvError::validation(format!("header.{name}"), "expected a nonnegative integer"))
}

fn read_text(bytes: &[u8]) -> Result<FeatureFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or_else(|| EsvError::validation("header", "empty feature file"))?
        .map_err(|e| EsvError::validation("header", e.to_string()))?;
    if header.get(0) != Some(TEXT_TAG) {
        return Err(EsvError::validation(
            "header",
            format!("expected '{TEXT_TAG},<n>,<D>[,timestamps]'"),
        ));
    }
    let n = parse_count(header.get(1), "n")?;
    let dim = parse_count(header.get(2), "D")?;
    let timestamped = match header.get(3) {
        None => false,
        Some("timestamps") => true,
        Some(other) => return Err(EsvError::validation("header", format!("unknown header flag '{other}'"))),
    };
    let width = dim + usize::from(timestamped);
    let mut data = Vec::with_capacity(n * dim);
    let mut stamps = Vec::new();
    let mut rows = 0usize;
    for (r, record) in records.enumerate() {
        let record = record.map_err(|e| EsvError::validation(format!("rows[{r}]"), e.to_string()))?;
        if record.len() != width {
            return Err(EsvError::validation(
                format!("rows[{r}]"),
                format!("expected {width} columns, found {}", record.len()),
            ));
        }
        for (j, field) in record.iter().enumerate() {
            let v = parse_real(field, || format!("rows[{r}][{j}]"))?;
            if timestamped && j == 0 {
                stamps.push(v);
            } else {
                data.push(v);
            }
        }
        rows += 1;
    }
    if rows != n {
        return Err(EsvError::validation(
            "rows",
            format!("header declares {n} rows, found {rows}"),
        ));
    }
    Ok(FeatureFile {
        sequence: FeatureSequence::from_flat(data, n, dim)?,
        timestamps: timestamped.then_some(stamps),
    })
}

fn read_binary(bytes: &[u8]) -> Result<FeatureFile> {
    let truncated = |_| EsvError::validation("binary", "truncated ESVF payload");
    let mut cur = Cursor::new(&bytes[4..]);
    let version = cur.read_u32::<LittleEndian>().map_err(truncated)?;
    if version != BINARY_VERSION {
        return Err(EsvError::validation(
            "binary.version",
            format!("unsupported ESVF version {version}"),
        ));
    }
    let n = cur.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    let dim = cur.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    let flags = cur.read_u32::<LittleEndian>().map_err(truncated)?;
    if flags & !FLAG_TIMESTAMPS != 0 {
        return Err(EsvError::validation(
            "binary.flags",
            format!("unknown flag bits {flags:#x}"),
        ));
    }
    let stamps = if flags & FLAG_TIMESTAMPS != 0 {
        let mut v = vec![0.0; n];
        cur.read_f64_into::<LittleEndian>(&mut v).map_err(truncated)?;
        Some(v)
    } else {
        None
    };
    let mut data = vec![0.0; n * dim];
    cur.read_f64_into::<LittleEndian>(&mut data).map_err(truncated)?;
    let mut rest = Vec::new();
    cur.read_to_end(&mut rest).map_err(truncated)?;
    if !rest.is_empty() {
        return Err(EsvError::validation("binary", format!("{} trailing bytes", rest.len())));
    }
    if let Some(t) = &stamps {
        if t.iter().any(|v| !v.is_finite()) {
            return Err(EsvError::validation("binary.timestamps", "timestamps must be finite"));
        }
    }
    Ok(FeatureFile {
        sequence: FeatureSequence::from_flat(data, n, dim)?,
        timestamps: stamps,
    })
}

/// Text layout with shortest round-trip decimal formatting.
pub fn write_features_text(file: &FeatureFile) -> String {
    let x = &file.sequence;
    let mut out = format!("{TEXT_TAG},{},{}", x.len(), x.dim());
    if file.timestamps.is_some() {
        out.push_str(",timestamps");
    }
    out.push('\n');
    for (i, e) in x.elements().enumerate() {
        let mut fields: Vec<String> = Vec::with_capacity(e.len() + 1);
        if let Some(t) = &file.timestamps {
            fields.push(format!("{:?}", t[i]));
        }
        fields.extend(e.iter().map(|v| format!("{v:?}")));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// `ESVF` | version u32 | n u32 | D u32 | flags u32 | [timestamps f64 x n] | features f64 x n*D, all little-endian.
pub fn write_features_binary(file: &FeatureFile) -> Vec<u8> {
    let x = &file.sequence;
    let mut out = Vec::with_capacity(20 + 8 * (x.len() * (x.dim() + 1)));
    out.extend_from_slice(BINARY_MAGIC);
    let flags = if file.timestamps.is_some() { FLAG_TIMESTAMPS } else { 0 };
    for v in [BINARY_VERSION, x.len() as u32, x.dim() as u32, flags] {
        out.write_u32::<LittleEndian>(v).expect("vec write");
    }
    for v in file.timestamps.iter().flatten().chain(x.as_flat()) {
        out.write_f64::<LittleEndian>(*v).expect("vec write");
    }
    out
}
