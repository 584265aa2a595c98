//! Output files and their sidecar manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::Command;
use crate::config::RunConfig;
use crate::RunError;

/// Everything needed to reproduce one output file. No timestamps, so
/// reruns produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub file: String,
    pub sha256: String,
    pub rows: usize,
    pub command: Command,
    pub seed: u64,
    pub config_hash: String,
    pub versions: Versions,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub dervalue_cli: String,
    pub dervalue_core: String,
}

impl Versions {
    pub fn current() -> Self {
        Versions {
            dervalue_cli: env!("CARGO_PKG_VERSION").to_string(),
            dervalue_core: dervalue_core::VERSION.to_string(),
        }
    }
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| RunError::config("<manifest>", format!("{}: {e}", path.display())))
    }
}

/// Sidecar path for an output file: `savings.csv` -> `savings.manifest.json`.
pub fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest.json")
}

fn io_err(path: &Path, e: std::io::Error) -> RunError {
    RunError::Data(dervalue_core::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub struct Outputs {
    dir: PathBuf,
    command: Command,
    config: RunConfig,
    hash: String,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: PathBuf, command: Command, config: &RunConfig) -> Result<Self, RunError> {
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(Outputs {
            dir,
            command,
            config: config.semantic(),
            hash: config.hash(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Write a CSV produced into memory.
    pub fn csv(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut Vec<u8>) -> dervalue_core::Result<()>,
    ) -> Result<(), RunError> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        let path = self.path(name);
        fs::write(&path, &buf).map_err(|e| io_err(&path, e))?;
        self.finish(name, &buf)
    }

    /// Write a CSV through a writer that takes a path.
    pub fn csv_at(&mut self, name: &str, write: impl FnOnce(&Path) -> dervalue_core::Result<()>) -> Result<(), RunError> {
        let path = self.path(name);
        write(&path)?;
        let buf = fs::read(&path).map_err(|e| io_err(&path, e))?;
        self.finish(name, &buf)
    }

    fn finish(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.path(name);
        let manifest = Manifest {
            file: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            rows: bytes.iter().filter(|b| **b == b'\n').count().saturating_sub(1),
            command: self.command.clone(),
            seed: self.config.seed,
            config_hash: self.hash.clone(),
            versions: Versions::current(),
            config: self.config.clone(),
        };
        let mpath = manifest_path(&path);
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&mpath, text).map_err(|e| io_err(&mpath, e))?;
        log::info!("wrote {}", path.display());
        self.written.push(path);
        Ok(())
    }
}
