//! Run manifest written next to every command's outputs. Its `config` object
//! can be passed back through `--config` to reproduce the run.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use enwarsim::agents::sha256_hex;
use enwarsim::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.to_path_buf(),
            sha256: sha256_hex(&std::fs::read(path)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub seed: u64,
    pub config: RunConfig,
    /// Checksums of assets the run read, including the built-in table.
    pub assets: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_unix_ms: u128,
    pub elapsed_ms: u128,
}

pub struct ManifestBuilder {
    command: String,
    argv: Vec<String>,
    started: SystemTime,
    assets: Vec<FileDigest>,
    outputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn new(command: &str, argv: Vec<String>) -> Self {
        Self {
            command: command.to_string(),
            argv,
            started: SystemTime::now(),
            assets: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn asset(&mut self, path: &Path) -> Result<()> {
        self.assets.push(FileDigest::of(path)?);
        Ok(())
    }

    /// Records an asset that has no file of its own.
    pub fn asset_digest(&mut self, name: &str, sha256: &str) {
        self.assets.push(FileDigest {
            path: PathBuf::from(name),
            sha256: sha256.to_string(),
        });
    }

    pub fn output(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    pub fn finish(self, config: &RunConfig, out_dir: &Path) -> Result<PathBuf> {
        let outputs = self.outputs.iter().map(|p| FileDigest::of(p)).collect::<Result<Vec<_>>>()?;
        let started_unix_ms = self.started.duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
        let elapsed_ms = self.started.elapsed().map(|d| d.as_millis()).unwrap_or(0);
        let m = RunManifest {
            tool: "enwarsim".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.clone(),
            argv: self.argv,
            seed: config.seed,
            config: config.clone(),
            assets: self.assets,
            outputs,
            started_unix_ms,
            elapsed_ms,
        };
        let path = out_dir.join(format!("{}.manifest.json", self.command));
        std::fs::write(&path, serde_json::to_string_pretty(&m)?)?;
        Ok(path)
    }
}
