//! Versioned file formats: feature sequences (text and packed binary),
//! attribution results, and atomic file replacement.

mod features;
mod results;

pub use features::{
    read_features, read_features_bytes, write_features_binary, write_features_text, FeatureFile, BINARY_MAGIC, TEXT_TAG,
};
pub use results::{parse_result, render_result, ContrastColumn, ResultDocument, RESULT_FORMAT};

use std::io::Write;
use std::path::Path;

use crate::error::{EsvError, Result};

/// Writes `bytes` to a temporary file beside `path` and renames it into place,
/// so `path` is either untouched or complete.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let display = path.display().to_string();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| EsvError::io(&display, e))?;
    tmp.write_all(bytes).map_err(|e| EsvError::io(&display, e))?;
    tmp.as_file().sync_all().map_err(|e| EsvError::io(&display, e))?;
    tmp.persist(path).map_err(|e| EsvError::io(&display, e.error))?;
    Ok(())
}
