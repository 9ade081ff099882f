//! Response cache.
//!
//! Layout under the cache root (stable across versions):
//!
//! ```text
//! objects/<first two hex chars of job id>/<job id>.json   one RawResponse per job
//! runs/<run id>.jsonl                                     append-only log of writes made by a run
//! ```
//!
//! Object files are written to a temporary name and renamed into place, so
//! concurrent readers never observe a partial record. Writers are serialized.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{GatewayError, RawResponse};

#[derive(Debug)]
pub struct CacheHandle {
    root: Option<PathBuf>,
    run_id: String,
    write_lock: Mutex<()>,
}

impl CacheHandle {
    pub fn open(root: impl Into<PathBuf>, run_id: impl Into<String>) -> Result<Self, GatewayError> {
        let root = root.into();
        fs::create_dir_all(root.join("objects"))?;
        fs::create_dir_all(root.join("runs"))?;
        Ok(CacheHandle {
            root: Some(root),
            run_id: run_id.into(),
            write_lock: Mutex::new(()),
        })
    }

    /// A cache that never hits and never stores.
    pub fn disabled() -> Self {
        CacheHandle {
            root: None,
            run_id: String::new(),
            write_lock: Mutex::new(()),
        }
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    fn object_path(root: &Path, job_id: &str) -> PathBuf {
        let shard = job_id.get(..2).unwrap_or("xx");
        root.join("objects").join(shard).join(format!("{job_id}.json"))
    }

    pub fn get(&self, job_id: &str) -> Result<Option<RawResponse>, GatewayError> {
        let Some(root) = &self.root else {
            return Ok(None);
        };
        let path = Self::object_path(root, job_id);
        match fs::read_to_string(&path) {
            Ok(text) => {
                let record: RawResponse = serde_json::from_str(&text).map_err(|e| {
                    GatewayError::Cache(format!("corrupt cache object {}: {e}", path.display()))
                })?;
                Ok(Some(record))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn put(&self, response: &RawResponse) -> Result<(), GatewayError> {
        let Some(root) = &self.root else {
            return Ok(());
        };
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        let path = Self::object_path(root, &response.job_id);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let line = serde_json::to_string(response).map_err(|e| GatewayError::Cache(e.to_string()))?;
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, &line)?;
        fs::rename(&tmp, &path)?;

        let mut log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(root.join("runs").join(format!("{}.jsonl", self.run_id)))?;
        writeln!(log, "{line}")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ResponseSource;

    fn response(id: &str) -> RawResponse {
        RawResponse {
            job_id: id.into(),
            entity: "Japan".into(),
            item_code: "F063".into(),
            raw_text: "  7\n".into(),
            model_id: "m".into(),
            latency_ms: 12,
            attempt_count: 1,
            source: ResponseSource::Live,
        }
    }

    #[test]
    fn put_then_get_round_trips_and_logs() {
        let dir = tempfile::tempdir().unwrap();
        let cache = CacheHandle::open(dir.path(), "run-a").unwrap();
        assert!(cache.get("abcd").unwrap().is_none());
        cache.put(&response("abcd")).unwrap();
        cache.put(&response("ef01")).unwrap();
        assert_eq!(cache.get("abcd").unwrap().unwrap(), response("abcd"));
        assert!(dir.path().join("objects/ab/abcd.json").exists());
        let log = fs::read_to_string(dir.path().join("runs/run-a.jsonl")).unwrap();
        assert_eq!(log.lines().count(), 2);
    }

    #[test]
    fn disabled_cache_is_inert() {
        let cache = CacheHandle::disabled();
        cache.put(&response("abcd")).unwrap();
        assert!(cache.get("abcd").unwrap().is_none());
    }
}
