use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use esv_core::io::write_atomic;
use esv_core::{EsvError, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FORMAT: &str = "esv-manifest/1";

/// Everything needed to repeat a run: resolved flags plus content digests of
/// every input.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub command: String,
    pub flags: serde_json::Value,
    pub seed: Option<u64>,
    /// `sha256:<hex>` per input path.
    pub inputs: BTreeMap<String, String>,
    pub output_digest: String,
    pub model_calls: Option<u64>,
    pub wall_time_seconds: f64,
    pub version: String,
}

pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

/// Manifest location for an output file: `<output>.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

impl Manifest {
    pub fn write(&self, output: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(&manifest_path(output), text.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| EsvError::io(path.display().to_string(), e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| EsvError::validation("manifest", e.to_string()))?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(EsvError::validation(
                "manifest.format",
                format!("expected '{MANIFEST_FORMAT}', found '{}'", manifest.format),
            ));
        }
        Ok(manifest)
    }
}
