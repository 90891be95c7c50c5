use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::jobs::Job;
use crate::error::{Error, Result};

/// A file and the SHA-256 of its contents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileRecord {
    pub fn new(path: impl Into<PathBuf>, bytes: &[u8]) -> Self {
        FileRecord {
            path: path.into(),
            sha256: format!("{:x}", Sha256::digest(bytes)),
        }
    }

    pub fn hash_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(FileRecord::new(path, &bytes))
    }
}

/// Written next to every run's outputs; enough to replay the run bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// The fully resolved job, independent of any config file.
    pub job: Job,
    pub seed: Option<u64>,
    /// Input files (model or sample files) with their hashes.
    pub inputs: Vec<FileRecord>,
    /// Outputs relative to the output directory.
    pub outputs: Vec<FileRecord>,
    pub duration_seconds: f64,
    pub argv: Vec<String>,
    /// Manifest this run replayed, if any.
    #[serde(default)]
    pub replay_of: Option<PathBuf>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
