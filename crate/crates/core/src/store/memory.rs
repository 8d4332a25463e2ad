use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::Mutex;

use super::{sanitize_artifact_name, validate_run_id, EventStore, LogState, RunEvent, StoreError};

#[derive(Default)]
struct Inner {
    logs: BTreeMap<String, Vec<RunEvent>>,
    artifacts: HashMap<(String, PathBuf), Vec<u8>>,
}

/// In-process store for tests and batch benchmarking. Work directories are
/// created under the system temp dir.
#[derive(Default)]
pub struct MemoryStore {
    inner: Mutex<Inner>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl EventStore for MemoryStore {
    fn append(&self, event: &RunEvent) -> Result<(), StoreError> {
        validate_run_id(&event.run_id)?;
        let mut inner = self.inner.lock().unwrap();
        let state = inner
            .logs
            .get(&event.run_id)
            .map_or_else(LogState::default, |log| LogState::from_events(log));
        state.check(event)?;
        inner
            .logs
            .entry(event.run_id.clone())
            .or_default()
            .push(event.clone());
        Ok(())
    }

    fn events(&self, run_id: &str) -> Result<Vec<RunEvent>, StoreError> {
        self.inner
            .lock()
            .unwrap()
            .logs
            .get(run_id)
            .filter(|l| !l.is_empty())
            .cloned()
            .ok_or_else(|| StoreError::NotFound(run_id.to_string()))
    }

    fn run_ids(&self) -> Result<Vec<String>, StoreError> {
        Ok(self.inner.lock().unwrap().logs.keys().cloned().collect())
    }

    fn write_artifact(&self, run_id: &str, name: &str, bytes: &[u8]) -> Result<(), StoreError> {
        validate_run_id(run_id)?;
        let key = (run_id.to_string(), sanitize_artifact_name(name)?);
        self.inner
            .lock()
            .unwrap()
            .artifacts
            .insert(key, bytes.to_vec());
        Ok(())
    }

    fn read_artifact(&self, run_id: &str, name: &str) -> Result<Vec<u8>, StoreError> {
        let key = (run_id.to_string(), sanitize_artifact_name(name)?);
        self.inner
            .lock()
            .unwrap()
            .artifacts
            .get(&key)
            .cloned()
            .ok_or_else(|| StoreError::ArtifactNotFound(name.to_string()))
    }

    fn workdir(&self, run_id: &str, attempt: usize) -> Result<PathBuf, StoreError> {
        validate_run_id(run_id)?;
        let dir = std::env::temp_dir()
            .join("cadrefine-memstore")
            .join(run_id)
            .join(format!("attempt-{attempt}"));
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}
