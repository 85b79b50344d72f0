//! Run manifest: per-stage input fingerprints and output hashes.
//!
//! A stage is skipped on rerun when its recorded fingerprint matches the
//! current inputs and every recorded output file still hashes the same.
//! Hash-gating (not timestamps) keeps reruns reproducible across machines.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Hash over the stage's configuration and input artifacts.
    pub fingerprint: String,
    /// Output files (relative to the data dir) and their content hashes.
    pub outputs: BTreeMap<String, String>,
    /// Informational timestamp; never part of any gating decision.
    pub completed_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub stages: BTreeMap<String, StageRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub annotation_coverage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub parse_error_rate: Option<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Default for RunManifest {
    fn default() -> Self {
        RunManifest {
            version: MANIFEST_VERSION,
            stages: BTreeMap::new(),
            annotation_coverage: None,
            parse_error_rate: None,
            warnings: Vec::new(),
        }
    }
}

impl RunManifest {
    pub fn path(data_dir: &Path) -> std::path::PathBuf {
        data_dir.join("manifest.json")
    }

    pub fn load_or_default(data_dir: &Path) -> Result<RunManifest, PipelineError> {
        let path = RunManifest::path(data_dir);
        if !path.exists() {
            return Ok(RunManifest::default());
        }
        let text = fs::read_to_string(&path)
            .map_err(|e| PipelineError::Io { path: path.display().to_string(), source: e })?;
        serde_json::from_str(&text).map_err(|e| PipelineError::CorruptManifest {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn save(&self, data_dir: &Path) -> Result<(), PipelineError> {
        let path = RunManifest::path(data_dir);
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, json)
            .map_err(|e| PipelineError::Io { path: path.display().to_string(), source: e })
    }

    /// True when `stage`'s recorded fingerprint matches and all its outputs
    /// exist with unchanged hashes.
    pub fn is_current(
        &self,
        data_dir: &Path,
        stage: &str,
        fingerprint: &str,
    ) -> Result<bool, PipelineError> {
        let Some(record) = self.stages.get(stage) else {
            return Ok(false);
        };
        if record.fingerprint != fingerprint {
            return Ok(false);
        }
        for (rel, want) in &record.outputs {
            let path = data_dir.join(rel);
            if !path.exists() || hash_file(&path)? != *want {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// True when a stage completed and every output it recorded still
    /// exists (fingerprint not considered).
    pub fn outputs_exist(&self, data_dir: &Path, stage: &str) -> bool {
        self.stages
            .get(stage)
            .is_some_and(|record| record.outputs.keys().all(|rel| data_dir.join(rel).exists()))
    }

    pub fn record_stage(
        &mut self,
        data_dir: &Path,
        stage: &str,
        fingerprint: String,
        outputs: &[std::path::PathBuf],
    ) -> Result<(), PipelineError> {
        let mut hashed = BTreeMap::new();
        for path in outputs {
            let rel = path
                .strip_prefix(data_dir)
                .map_err(|_| PipelineError::BadConfig {
                    reason: format!("stage output {} is outside the data dir", path.display()),
                })?
                .to_string_lossy()
                .replace('\\', "/");
            hashed.insert(rel, hash_file(path)?);
        }
        self.stages.insert(
            stage.to_string(),
            StageRecord {
                fingerprint,
                outputs: hashed,
                completed_at: chrono::Utc::now().to_rfc3339(),
            },
        );
        Ok(())
    }

    pub fn warn(&mut self, message: String) {
        log::warn!("{message}");
        if !self.warnings.contains(&message) {
            self.warnings.push(message);
        }
    }
}

pub fn hash_file(path: &Path) -> Result<String, PipelineError> {
    let mut file = fs::File::open(path)
        .map_err(|e| PipelineError::Io { path: path.display().to_string(), source: e })?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 65536];
    loop {
        let n = file
            .read(&mut buf)
            .map_err(|e| PipelineError::Io { path: path.display().to_string(), source: e })?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

pub fn hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Incremental fingerprint over stage configuration and inputs.
pub struct Fingerprint {
    hasher: Sha256,
}

impl Fingerprint {
    pub fn new(stage: &str) -> Fingerprint {
        let mut hasher = Sha256::new();
        hasher.update(stage.as_bytes());
        Fingerprint { hasher }
    }

    pub fn update(&mut self, part: &str) -> &mut Self {
        self.hasher.update([0x1f]);
        self.hasher.update(part.as_bytes());
        self
    }

    pub fn update_file(&mut self, path: &Path) -> Result<&mut Self, PipelineError> {
        self.update(&path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
        let hash = hash_file(path)?;
        Ok(self.update(&hash))
    }

    pub fn finish(self) -> String {
        hex(&self.hasher.finalize())
    }
}

/// Exclusive run lock: one pipeline run per data dir.
pub struct RunLock {
    path: std::path::PathBuf,
}

impl RunLock {
    pub fn acquire(data_dir: &Path) -> Result<RunLock, PipelineError> {
        fs::create_dir_all(data_dir)
            .map_err(|e| PipelineError::Io { path: data_dir.display().to_string(), source: e })?;
        let path = data_dir.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(RunLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(PipelineError::Locked { path: path.display().to_string() })
            }
            Err(e) => Err(PipelineError::Io { path: path.display().to_string(), source: e }),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
