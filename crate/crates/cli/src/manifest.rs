//! Run manifest: configuration snapshot, per-stage status, and a digest
//! inventory of every file the run emitted.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::DriverError;

#[derive(Debug, Clone)]
pub struct StageStatus {
    pub name: String,
    /// "ok", "skipped: ...", or "error: ...".
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config_path: String,
    pub config_text: String,
    pub version: String,
    pub mode: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub stages: Vec<StageStatus>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    /// Writes `manifest.json` into the run directory, inventorying every
    /// file already present there (sorted by name) with its SHA-256 digest.
    pub fn write(&self, dir: &Path) -> Result<(), DriverError> {
        let mut files = Vec::new();
        let mut names: Vec<_> = fs::read_dir(dir)
            .map_err(|e| DriverError::Io(dir.display().to_string(), e.to_string()))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_file())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n != "manifest.json")
            .collect();
        names.sort();
        for name in names {
            let bytes = fs::read(dir.join(&name))
                .map_err(|e| DriverError::Io(name.clone(), e.to_string()))?;
            let mut hasher = Sha256::new();
            hasher.update(&bytes);
            let digest = hasher.finalize();
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            files.push(serde_json::json!({ "path": name, "sha256": hex }));
        }
        let stages: Vec<_> = self
            .stages
            .iter()
            .map(|s| serde_json::json!({ "name": s.name, "status": s.status }))
            .collect();
        let doc = serde_json::json!({
            "artifact_version": self.version,
            "mode": self.mode,
            "config_path": self.config_path,
            "config_snapshot": self.config_text,
            "seed": self.seed,
            "threads": self.threads,
            "started_unix": self.started_unix,
            "finished_unix": self.finished_unix,
            "stages": stages,
            "files": files,
        });
        let text = serde_json::to_string_pretty(&doc)
            .map_err(|e| DriverError::Io("manifest.json".into(), e.to_string()))?;
        fs::write(dir.join("manifest.json"), text)
            .map_err(|e| DriverError::Io("manifest.json".into(), e.to_string()))
    }
}
