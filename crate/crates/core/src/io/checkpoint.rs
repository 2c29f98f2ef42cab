//! A dictionary file plus a JSON sidecar describing how it was produced.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dict::LocalDictionary;
use crate::error::{CscError, Result};
use crate::io::binary::{read_dict_file, write_dict_file};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub epoch: usize,
    /// Optimizer name of the last phase, or `"none"`.
    pub optimizer: String,
    pub eta: f64,
    pub lambda: f64,
    pub seed: u64,
}

/// `<path>.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_checkpoint(path: &Path, dict: &LocalDictionary, meta: &CheckpointMeta) -> Result<()> {
    write_dict_file(path, dict)?;
    let json = serde_json::to_string_pretty(meta).map_err(|e| CscError::Format {
        what: "checkpoint metadata",
        reason: e.to_string(),
    })?;
    fs::write(sidecar_path(path), json + "\n")?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(LocalDictionary, CheckpointMeta)> {
    let dict = read_dict_file(path)?;
    let text = fs::read_to_string(sidecar_path(path))?;
    let meta = serde_json::from_str(&text).map_err(|e| CscError::Format {
        what: "checkpoint metadata",
        reason: e.to_string(),
    })?;
    Ok((dict, meta))
}
