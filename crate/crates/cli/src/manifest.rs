use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize)]
pub struct OutputEntry {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to rerun a command and check that its outputs match.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    /// SHA-256 of the canonical JSON of the resolved model.
    pub model_hash: String,
    pub model: serde_json::Value,
    pub tool_version: &'static str,
    /// Seconds since the Unix epoch.
    pub started_at: f64,
    pub finished_at: f64,
    pub outputs: Vec<OutputEntry>,
}

pub fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, model_json: &str) -> Self {
        Self {
            command: command.to_owned(),
            argv: std::env::args().collect(),
            config,
            model_hash: sha256_hex(model_json.as_bytes()),
            model: serde_json::from_str(model_json).unwrap_or(serde_json::Value::Null),
            tool_version: env!("CARGO_PKG_VERSION"),
            started_at: now(),
            finished_at: 0.0,
            outputs: Vec::new(),
        }
    }

    /// Writes `contents` under `dir` and records it.
    pub fn write_output(&mut self, dir: &Path, name: &str, contents: &str) -> std::io::Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, contents)?;
        log::info!("wrote {}", path.display());
        self.outputs.push(OutputEntry {
            path,
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(())
    }

    pub fn finish(mut self, dir: &Path) -> std::io::Result<PathBuf> {
        self.finished_at = now();
        let path = dir.join(format!("{}.manifest.json", self.command));
        let text = serde_json::to_string_pretty(&self).expect("manifest serialises");
        std::fs::write(&path, text)?;
        Ok(path)
    }
}
