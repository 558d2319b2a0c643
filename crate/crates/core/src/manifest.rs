//! Provenance record written next to every command's outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Ok(Self {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        })
    }
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Command, configuration, digested inputs and outputs, and timestamps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<FileDigest>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

impl RunManifest {
    pub fn start(command: impl Into<String>, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            command: command.into(),
            config: serde_json::to_value(config)?,
            inputs: Vec::new(),
            artifacts: Vec::new(),
            started_unix: unix_now(),
            finished_unix: 0,
        })
    }

    pub fn add_input(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.inputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn add_artifact(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.artifacts.push(FileDigest::of(path)?);
        Ok(())
    }

    /// Stamps the finish time and writes the manifest into `dir`.
    pub fn finish(mut self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        self.finished_unix = unix_now();
        let path = dir.as_ref().join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(&self)? + "\n")?;
        Ok(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Paths whose current content no longer matches the recorded digest.
    pub fn stale_artifacts(&self) -> Result<Vec<PathBuf>> {
        let mut stale = Vec::new();
        for a in &self.artifacts {
            if !a.path.exists() || sha256_file(&a.path)? != a.sha256 {
                stale.push(a.path.clone());
            }
        }
        Ok(stale)
    }
}
