//! Per-run manifest, written atomically when the run ends.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Result, WorkbenchError};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Resolved configuration the run used.
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
    /// Output files, relative to the run directory.
    pub outputs: Vec<String>,
    /// `running`, `ok` or `failed`.
    pub status: String,
    pub error: Option<String>,
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

impl RunManifest {
    pub fn start(command: &str, seed: u64) -> Self {
        Self {
            command: command.into(),
            config: serde_json::Value::Null,
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            started_unix: unix_now(),
            finished_unix: None,
            outputs: Vec::new(),
            status: "running".into(),
            error: None,
        }
    }

    pub fn finish(&mut self, outcome: std::result::Result<(), String>) {
        self.finished_unix = Some(unix_now());
        match outcome {
            Ok(()) => self.status = "ok".into(),
            Err(e) => {
                self.status = "failed".into();
                self.error = Some(e);
            }
        }
    }

    /// Writes `manifest.json` through a temporary file and a rename. Only
    /// outputs that exist are listed.
    pub fn write(&mut self, dir: &Path) -> Result<PathBuf> {
        self.outputs.retain(|f| dir.join(f).is_file());
        let path = dir.join(MANIFEST_NAME);
        let tmp = dir.join(format!(".{MANIFEST_NAME}.tmp"));
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&tmp, text + "\n").map_err(|e| WorkbenchError::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| WorkbenchError::io(&path, e))?;
        Ok(path)
    }
}
