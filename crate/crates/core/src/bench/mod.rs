//! Dataset loading, success@k metrics, and benchmark reports.

mod execute;
mod metrics;
mod report;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::executor::SceneDescriptor;
use crate::pipeline::{classify_failure, Attempt, FailureKind, RunRecord, RunStatus};

pub use execute::{execute_dataset, hermetic_deps, DepsFactory, ItemOutcome};
pub use metrics::{
    deltas, failure_breakdown, overall_improvement, per_difficulty, success_at_k, Fraction,
    MetricsReport, Totals,
};
pub use report::{emit_report, render_csv, render_markdown};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("line {line}: {reason}")]
    Load { line: usize, reason: String },
    #[error("metric undefined: {0}")]
    Undefined(&'static str),
    #[error("invalid row for item '{0}': exactly one of solved_at / failure_kind must be set")]
    InvalidRow(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetItem {
    pub id: String,
    pub query: String,
    pub difficulty: Difficulty,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_scene: Option<SceneDescriptor>,
}

/// Parses dataset JSONL. Blank lines are skipped; errors carry the 1-based line.
pub fn parse_dataset(text: &str) -> Result<Vec<DatasetItem>, BenchError> {
    let mut items = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let item: DatasetItem = serde_json::from_str(line).map_err(|e| BenchError::Load {
            line: line_no,
            reason: e.to_string(),
        })?;
        if item.id.is_empty() {
            return Err(BenchError::Load {
                line: line_no,
                reason: "empty id".into(),
            });
        }
        if item.query.trim().is_empty() {
            return Err(BenchError::Load {
                line: line_no,
                reason: format!("item '{}' has an empty query", item.id),
            });
        }
        if !seen.insert(item.id.clone()) {
            return Err(BenchError::Load {
                line: line_no,
                reason: format!("duplicate id '{}'", item.id),
            });
        }
        items.push(item);
    }
    Ok(items)
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetItem>, BenchError> {
    let items = parse_dataset(&std::fs::read_to_string(path)?)?;
    if items.is_empty() {
        warn!(path = %path.display(), "dataset is empty");
    }
    Ok(items)
}

pub fn tier_counts(items: &[DatasetItem]) -> BTreeMap<Difficulty, usize> {
    let mut out = BTreeMap::new();
    for item in items {
        *out.entry(item.difficulty).or_insert(0) += 1;
    }
    out
}

/// Benchmark outcome of one dataset item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRow {
    pub item_id: String,
    pub difficulty: Difficulty,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solved_at: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_kind: Option<FailureKind>,
}

impl RunRow {
    pub fn solved(item_id: impl Into<String>, difficulty: Difficulty, at: usize) -> Self {
        Self {
            item_id: item_id.into(),
            difficulty,
            solved_at: Some(at),
            failure_kind: None,
        }
    }

    pub fn failed(item_id: impl Into<String>, difficulty: Difficulty, kind: FailureKind) -> Self {
        Self {
            item_id: item_id.into(),
            difficulty,
            solved_at: None,
            failure_kind: Some(kind),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.solved_at.is_some() == self.failure_kind.is_some() {
            return Err(BenchError::InvalidRow(self.item_id.clone()));
        }
        Ok(())
    }

    /// Row for a finished run; `None` for aborted or unfinished runs.
    ///
    /// A human verdict overrides the automatic pass. Human-accepted runs
    /// without a passing score count as solved at their final attempt.
    pub fn from_record(item_id: &str, difficulty: Difficulty, record: &RunRecord) -> Option<Self> {
        if !matches!(record.status, RunStatus::Success | RunStatus::Failure) {
            return None;
        }
        let auto_pass = record.status == RunStatus::Success;
        let human = record.verdict.as_ref().and_then(|v| v.human_success);
        if human.unwrap_or(auto_pass) {
            let at = record
                .first_passing_attempt()
                .or_else(|| record.last_attempt().map(|a: &Attempt| a.index))
                .unwrap_or(0);
            return Some(Self::solved(item_id, difficulty, at));
        }
        let kind = record
            .failure_kind
            .or_else(|| classify_failure(record).ok())?;
        Some(Self::failed(item_id, difficulty, kind))
    }
}

/// Parses results JSONL (one [`RunRow`] per line).
pub fn parse_results(text: &str) -> Result<Vec<RunRow>, BenchError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: RunRow = serde_json::from_str(line).map_err(|e| BenchError::Load {
            line: i + 1,
            reason: e.to_string(),
        })?;
        row.validate().map_err(|e| BenchError::Load {
            line: i + 1,
            reason: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_results(path: &Path) -> Result<Vec<RunRow>, BenchError> {
    parse_results(&std::fs::read_to_string(path)?)
}

pub fn write_results(path: &Path, rows: &[RunRow]) -> Result<(), BenchError> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).map_err(std::io::Error::other)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
