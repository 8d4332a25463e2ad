use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{sanitize_artifact_name, validate_run_id, EventStore, LogState, RunEvent, StoreError};

const EVENTS_FILE: &str = "events.jsonl";

/// Flat-file store: `<root>/runs/<run_id>/events.jsonl` with artifacts
/// (`attempt-<i>/macro-v<j>.txt`, `attempt-<i>/render.png`, ...) beside it.
#[derive(Debug)]
pub struct FileStore {
    root: PathBuf,
    logs: Mutex<HashMap<String, LogState>>,
}

impl FileStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join("runs"))?;
        Ok(Self {
            root,
            logs: Mutex::default(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_dir(&self, run_id: &str) -> Result<PathBuf, StoreError> {
        validate_run_id(run_id)?;
        Ok(self.root.join("runs").join(run_id))
    }

    pub fn artifact_path(&self, run_id: &str, name: &str) -> Result<PathBuf, StoreError> {
        Ok(self.run_dir(run_id)?.join(sanitize_artifact_name(name)?))
    }

    fn read_events(&self, run_id: &str) -> Result<Vec<RunEvent>, StoreError> {
        let path = self.run_dir(run_id)?.join(EVENTS_FILE);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(run_id.to_string()))
            }
            Err(e) => return Err(e.into()),
        };
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let expected_seq = events.len() as u64 + 1;
            let event: RunEvent = serde_json::from_str(line).map_err(|e| StoreError::Corrupt {
                seq: expected_seq,
                reason: format!("line {}: {e}", i + 1),
            })?;
            events.push(event);
        }
        Ok(events)
    }
}

impl EventStore for FileStore {
    fn append(&self, event: &RunEvent) -> Result<(), StoreError> {
        let dir = self.run_dir(&event.run_id)?;
        let mut logs = self.logs.lock().unwrap();
        let state = match logs.get(&event.run_id) {
            Some(s) => *s,
            None => match self.read_events(&event.run_id) {
                Ok(events) => LogState::from_events(&events),
                Err(StoreError::NotFound(_)) => LogState::default(),
                Err(e) => return Err(e),
            },
        };
        state.check(event)?;

        fs::create_dir_all(&dir)?;
        let mut line = serde_json::to_string(event).map_err(std::io::Error::other)?;
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join(EVENTS_FILE))?;
        f.write_all(line.as_bytes())?;
        f.sync_data()?;

        let mut state = state;
        state.advance(event);
        logs.insert(event.run_id.clone(), state);
        Ok(())
    }

    fn events(&self, run_id: &str) -> Result<Vec<RunEvent>, StoreError> {
        self.read_events(run_id)
    }

    fn run_ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(self.root.join("runs"))? {
            let entry = entry?;
            if entry.path().join(EVENTS_FILE).is_file() {
                if let Some(name) = entry.file_name().to_str() {
                    ids.push(name.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    fn write_artifact(&self, run_id: &str, name: &str, bytes: &[u8]) -> Result<(), StoreError> {
        let path = self.artifact_path(run_id, name)?;
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, bytes)?;
        Ok(())
    }

    fn read_artifact(&self, run_id: &str, name: &str) -> Result<Vec<u8>, StoreError> {
        let path = self.artifact_path(run_id, name)?;
        fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => StoreError::ArtifactNotFound(name.to_string()),
            _ => e.into(),
        })
    }

    fn workdir(&self, run_id: &str, attempt: usize) -> Result<PathBuf, StoreError> {
        let dir = self.run_dir(run_id)?.join(format!("attempt-{attempt}"));
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}
