//! Per-run manifest: which stages finished, with what schema, producing which files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
/// Version of every artifact layout written by this tool.
pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Complete,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub status: StageStatus,
    pub schema_version: u32,
    /// Paths relative to the run directory.
    pub artifacts: Vec<String>,
    pub records: usize,
    #[serde(default)]
    pub failed: usize,
    pub finished_at: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub run_id: String,
    pub catalog_hash: String,
    pub backend: String,
    pub model: String,
    pub created_at: String,
    pub updated_at: String,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

impl RunManifest {
    pub fn new(run_id: &str, catalog_hash: &str, backend: &str, model: &str) -> Self {
        let t = now();
        RunManifest {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            run_id: run_id.to_string(),
            catalog_hash: catalog_hash.to_string(),
            backend: backend.to_string(),
            model: model.to_string(),
            created_at: t.clone(),
            updated_at: t,
            stages: BTreeMap::new(),
        }
    }

    pub fn path(dir: &Path) -> PathBuf {
        dir.join(MANIFEST_FILE)
    }

    pub fn load(dir: &Path) -> Result<Option<Self>> {
        let path = Self::path(dir);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(CliError::io(&path, e)),
        };
        let manifest: RunManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        if manifest.schema_version != ARTIFACT_SCHEMA_VERSION {
            return Err(CliError::SchemaMismatch {
                found: manifest.schema_version,
                expected: ARTIFACT_SCHEMA_VERSION,
            });
        }
        Ok(Some(manifest))
    }

    pub fn save(&mut self, dir: &Path) -> Result<()> {
        self.updated_at = now();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        write_atomic(&Self::path(dir), text.as_bytes())
    }

    pub fn record(&mut self, stage: &str, record: StageRecord) {
        self.stages.insert(stage.to_string(), record);
    }

    /// Drops `stages` and everything recorded after them.
    pub fn invalidate(&mut self, stages: &[&str]) {
        for s in stages {
            self.stages.remove(*s);
        }
    }

    /// The record of a finished upstream stage whose artifacts are all present.
    pub fn require(&self, stage: &str, dir: &Path, allow_partial: bool) -> Result<&StageRecord> {
        let missing = || CliError::UpstreamMissing {
            stage: stage.to_string(),
            dir: dir.to_path_buf(),
        };
        let record = self.stages.get(stage).ok_or_else(missing)?;
        if record.schema_version != ARTIFACT_SCHEMA_VERSION {
            return Err(CliError::SchemaMismatch {
                found: record.schema_version,
                expected: ARTIFACT_SCHEMA_VERSION,
            });
        }
        if record.status == StageStatus::Partial && !allow_partial {
            return Err(CliError::UpstreamPartial {
                stage: stage.to_string(),
                failed: record.failed,
            });
        }
        if record.artifacts.iter().any(|a| !dir.join(a).is_file()) {
            return Err(missing());
        }
        Ok(record)
    }
}

pub fn stage_record(artifacts: &[&str], records: usize, failed: usize, notes: Vec<String>) -> StageRecord {
    StageRecord {
        status: if failed == 0 {
            StageStatus::Complete
        } else {
            StageStatus::Partial
        },
        schema_version: ARTIFACT_SCHEMA_VERSION,
        artifacts: artifacts.iter().map(|s| s.to_string()).collect(),
        records,
        failed,
        finished_at: now(),
        notes,
    }
}

/// Writes to a sibling temporary file, then renames over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn require_checks_presence_status_and_version() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("r", "h", "replay", "gpt-4");
        assert!(matches!(
            m.require("simulate", dir.path(), false),
            Err(CliError::UpstreamMissing { .. })
        ));

        m.record("simulate", stage_record(&["raw.jsonl"], 3, 0, vec![]));
        assert!(matches!(
            m.require("simulate", dir.path(), false),
            Err(CliError::UpstreamMissing { .. })
        ));
        fs::write(dir.path().join("raw.jsonl"), "").unwrap();
        assert!(m.require("simulate", dir.path(), false).is_ok());

        m.record("simulate", stage_record(&["raw.jsonl"], 2, 1, vec![]));
        assert!(matches!(
            m.require("simulate", dir.path(), false),
            Err(CliError::UpstreamPartial { failed: 1, .. })
        ));
        assert!(m.require("simulate", dir.path(), true).is_ok());

        m.stages.get_mut("simulate").unwrap().schema_version = 99;
        assert!(matches!(
            m.require("simulate", dir.path(), true),
            Err(CliError::SchemaMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn manifest_round_trip_and_version_gate() {
        let dir = tempfile::tempdir().unwrap();
        assert!(RunManifest::load(dir.path()).unwrap().is_none());
        let mut m = RunManifest::new("r", "h", "replay", "gpt-4");
        m.record("encode", stage_record(&[], 0, 0, vec![]));
        m.save(dir.path()).unwrap();
        let back = RunManifest::load(dir.path()).unwrap().unwrap();
        assert_eq!(back.stages, m.stages);

        let text = fs::read_to_string(RunManifest::path(dir.path()))
            .unwrap()
            .replace("\"schema_version\": 1,\n  \"run_id\"", "\"schema_version\": 7,\n  \"run_id\"");
        fs::write(RunManifest::path(dir.path()), text).unwrap();
        assert!(matches!(
            RunManifest::load(dir.path()),
            Err(CliError::SchemaMismatch { found: 7, .. })
        ));
    }
}
