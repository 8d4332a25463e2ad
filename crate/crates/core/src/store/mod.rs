//! Event-sourced run persistence.
//!
//! Each run is an append-only sequence of [`RunEvent`]s; the [`RunRecord`]
//! is always derived by folding them. Large payloads (macro text, LLM
//! transcripts, renders) live in artifacts referenced from events.

mod event;
mod file;
mod fold;
mod memory;

use std::path::{Component, Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use event::{EventBody, EventKind, MacroOrigin, RefinementKind, RunEvent, SCHEMA_VERSION};
pub use file::FileStore;
pub use fold::{apply_event, fold};
pub use memory::MemoryStore;

use crate::pipeline::{RunRecord, RunStatus};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("sequence error: {0}")]
    Sequence(String),
    #[error("run '{0}' not found")]
    NotFound(String),
    #[error("artifact '{0}' not found")]
    ArtifactNotFound(String),
    #[error("corrupt event log at seq {seq}: {reason}")]
    Corrupt { seq: u64, reason: String },
    #[error("invalid name '{0}'")]
    InvalidName(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Persistence backend for run logs and artifacts.
pub trait EventStore: Send + Sync {
    /// Appends one event. Fails unless `event.seq` is exactly one past the
    /// last stored seq, the first event is `run_started`, and the log is not
    /// sealed by `run_finished`. `verdict_recorded` is accepted only after it.
    fn append(&self, event: &RunEvent) -> Result<(), StoreError>;

    /// All events of a run in seq order.
    fn events(&self, run_id: &str) -> Result<Vec<RunEvent>, StoreError>;

    fn run_ids(&self) -> Result<Vec<String>, StoreError>;

    fn write_artifact(&self, run_id: &str, name: &str, bytes: &[u8]) -> Result<(), StoreError>;

    fn read_artifact(&self, run_id: &str, name: &str) -> Result<Vec<u8>, StoreError>;

    /// Scratch directory for executing a macro of the given attempt.
    fn workdir(&self, run_id: &str, attempt: usize) -> Result<PathBuf, StoreError>;
}

/// Validates a relative artifact path: no absolute paths, `..`, or backslashes.
pub fn sanitize_artifact_name(name: &str) -> Result<PathBuf, StoreError> {
    let bad = || StoreError::InvalidName(name.to_string());
    if name.is_empty() || name.contains('\\') || name.contains('\0') {
        return Err(bad());
    }
    let path = Path::new(name);
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            Component::Normal(part) => out.push(part),
            _ => return Err(bad()),
        }
    }
    if out.as_os_str().is_empty() {
        return Err(bad());
    }
    Ok(out)
}

pub fn validate_run_id(run_id: &str) -> Result<(), StoreError> {
    let ok = !run_id.is_empty()
        && run_id.len() <= 128
        && run_id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidName(run_id.to_string()))
    }
}

/// Sequencing state of one run log.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct LogState {
    pub last_seq: u64,
    pub sealed: bool,
}

impl LogState {
    pub fn from_events(events: &[RunEvent]) -> Self {
        Self {
            last_seq: events.last().map_or(0, |e| e.seq),
            sealed: events.iter().any(|e| e.kind() == EventKind::RunFinished),
        }
    }

    pub fn check(&self, event: &RunEvent) -> Result<(), StoreError> {
        let kind = event.kind();
        if event.seq != self.last_seq + 1 {
            return Err(StoreError::Sequence(format!(
                "run {}: expected seq {}, got {}",
                event.run_id,
                self.last_seq + 1,
                event.seq
            )));
        }
        if (self.last_seq == 0) != (kind == EventKind::RunStarted) {
            return Err(StoreError::Sequence(format!(
                "run {}: run_started must be the first event and only the first",
                event.run_id
            )));
        }
        if self.sealed && kind != EventKind::VerdictRecorded {
            return Err(StoreError::Sequence(format!(
                "run {}: log sealed by run_finished",
                event.run_id
            )));
        }
        if !self.sealed && kind == EventKind::VerdictRecorded {
            return Err(StoreError::Sequence(format!(
                "run {}: verdict before run_finished",
                event.run_id
            )));
        }
        Ok(())
    }

    pub fn advance(&mut self, event: &RunEvent) {
        self.last_seq = event.seq;
        self.sealed |= event.kind() == EventKind::RunFinished;
    }
}

/// Next free seq for a run (1 for an unknown run).
pub fn next_seq(store: &dyn EventStore, run_id: &str) -> Result<u64, StoreError> {
    match store.events(run_id) {
        Ok(events) => Ok(events.last().map_or(1, |e| e.seq + 1)),
        Err(StoreError::NotFound(_)) => Ok(1),
        Err(e) => Err(e),
    }
}

/// Rebuilds a run record from its log, reading macro artifacts.
pub fn load_run(store: &dyn EventStore, run_id: &str) -> Result<RunRecord, StoreError> {
    let events = store.events(run_id)?;
    fold(&events, &mut |name| {
        let bytes = store.read_artifact(run_id, name)?;
        String::from_utf8(bytes).map_err(|e| StoreError::Corrupt {
            seq: 0,
            reason: format!("artifact {name} is not UTF-8: {e}"),
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub query: String,
    pub status: RunStatus,
    pub created_at: DateTime<Utc>,
}

/// Summaries of all runs, newest first. Unreadable logs are skipped.
pub fn list_runs(
    store: &dyn EventStore,
    status: Option<RunStatus>,
) -> Result<Vec<RunSummary>, StoreError> {
    let mut out = Vec::new();
    for id in store.run_ids()? {
        let Ok(events) = store.events(&id) else {
            continue;
        };
        // summaries do not need macro text
        let Ok(rec) = fold(&events, &mut |_| Ok(String::new())) else {
            continue;
        };
        if status.is_some_and(|s| s != rec.status) {
            continue;
        }
        out.push(RunSummary {
            run_id: rec.run_id,
            query: rec.query,
            status: rec.status,
            created_at: rec.created_at,
        });
    }
    out.sort_by(|a, b| {
        b.created_at
            .cmp(&a.created_at)
            .then_with(|| a.run_id.cmp(&b.run_id))
    });
    Ok(out)
}
