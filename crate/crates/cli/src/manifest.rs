//! `manifest.json`: what a command read, wrote, and with which settings.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use lifi_core::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub config_path: Option<String>,
    pub config_sha256: Option<String>,
    pub seed: Option<u64>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub inputs: Vec<FileRef>,
    pub artifacts: Vec<FileRef>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn file_ref(path: &Path) -> Result<FileRef> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(FileRef {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

impl Manifest {
    pub fn start(command: Vec<String>) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            config_path: None,
            config_sha256: None,
            seed: None,
            started_unix: now(),
            finished_unix: 0.0,
            inputs: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    /// `path` is `None` for the built-in defaults; the hash covers their canonical text.
    pub fn config(&mut self, path: Option<&Path>, sha256: String) {
        self.config_path = path.map(|p| p.display().to_string());
        self.config_sha256 = Some(sha256);
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(file_ref(path)?);
        Ok(())
    }

    pub fn artifact(&mut self, path: &Path) -> Result<()> {
        self.artifacts.push(file_ref(path)?);
        Ok(())
    }

    pub fn finish(mut self, dir: &Path) -> Result<()> {
        self.finished_unix = now();
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        fs::write(&path, text).map_err(|source| Error::Io { path, source })
    }
}
