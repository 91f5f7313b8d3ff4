//! Run manifests: everything needed to reproduce an artifact, and nothing
//! that varies between identical runs (no timestamps, no worker count).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
pub struct Manifest {
    tool: &'static str,
    version: &'static str,
    subcommand: &'static str,
    args: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_sha256: Option<String>,
    seed: Option<u64>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn digest_file(path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

impl Manifest {
    pub fn new(subcommand: &'static str, args: Value) -> Self {
        Manifest {
            tool: "mixnoise",
            version: mixnoise::VERSION,
            subcommand,
            args,
            config: None,
            config_sha256: None,
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn config<T: Serialize>(mut self, config: &T, seed: u64) -> Result<Self> {
        let value = serde_json::to_value(config)?;
        // serde_json maps are sorted, so this text is canonical
        let canonical = serde_json::to_string(&value)?;
        self.config_sha256 = Some(sha256_hex(canonical.as_bytes()));
        self.config = Some(value);
        self.seed = Some(seed);
        Ok(self)
    }

    pub fn input(mut self, path: &Path) -> Result<Self> {
        self.inputs.push(digest_file(path)?);
        Ok(self)
    }

    pub fn output(mut self, path: &Path) -> Result<Self> {
        self.outputs.push(digest_file(path)?);
        Ok(self)
    }

    /// Writes `<primary>.manifest.json` next to the primary output.
    pub fn write_beside(&self, primary: &Path) -> Result<PathBuf> {
        let path = sidecar(primary, "manifest.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// `data.jsonl` + `report.json` -> `data.jsonl.report.json`.
pub fn sidecar(primary: &Path, suffix: &str) -> PathBuf {
    let mut name = primary.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}
