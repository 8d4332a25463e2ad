use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::machine::stopping_criterion;
use crate::executor::{ExecutionResult, MacroDocument, RenderArtifact};
use crate::scorer::{Caption, Score};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    AwaitingFeedback,
    Success,
    Failure,
    Aborted,
}

impl RunStatus {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            RunStatus::Success | RunStatus::Failure | RunStatus::Aborted
        )
    }
}

/// Terminal failure taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureKind {
    /// No executable macro was obtained.
    NonExecutable,
    /// The macro ran but the design never matched.
    WrongStructure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub auto_pass: bool,
    #[serde(default)]
    pub human_success: Option<bool>,
    #[serde(default)]
    pub decided_at: Option<DateTime<Utc>>,
}

impl Verdict {
    /// Human judgement when present, else the automatic pass.
    pub fn success(&self) -> bool {
        self.human_success.unwrap_or(self.auto_pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub index: usize,
    /// Initial macro plus its error-refined versions.
    pub macro_versions: Vec<MacroDocument>,
    /// Plan text emitted with each macro version.
    pub plans: Vec<String>,
    /// Execution result per macro version, in order.
    pub executions: Vec<ExecutionResult>,
    pub render: Option<RenderArtifact>,
    pub caption: Option<Caption>,
    pub score: Option<Score>,
}

impl Attempt {
    pub fn new(index: usize) -> Self {
        Self {
            index,
            macro_versions: Vec::new(),
            plans: Vec::new(),
            executions: Vec::new(),
            render: None,
            caption: None,
            score: None,
        }
    }

    pub fn last_macro(&self) -> Option<&MacroDocument> {
        self.macro_versions.last()
    }

    /// Execution of the latest macro version, if it has run.
    pub fn execution(&self) -> Option<&ExecutionResult> {
        if self.executions.len() == self.macro_versions.len() {
            self.executions.last()
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub query: String,
    pub created_at: DateTime<Utc>,
    pub config: PipelineConfig,
    pub attempts: Vec<Attempt>,
    pub status: RunStatus,
    pub failure_kind: Option<FailureKind>,
    pub verdict: Option<Verdict>,
    /// Why the run was aborted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
}

impl RunRecord {
    pub fn new(
        run_id: impl Into<String>,
        query: impl Into<String>,
        created_at: DateTime<Utc>,
        config: PipelineConfig,
    ) -> Self {
        Self {
            run_id: run_id.into(),
            query: query.into(),
            created_at,
            config,
            attempts: Vec::new(),
            status: RunStatus::Running,
            failure_kind: None,
            verdict: None,
            cause: None,
        }
    }

    pub fn last_attempt(&self) -> Option<&Attempt> {
        self.attempts.last()
    }

    /// Index of the first attempt whose score passed the threshold.
    pub fn first_passing_attempt(&self) -> Option<usize> {
        self.attempts
            .iter()
            .find(|a| {
                a.score
                    .is_some_and(|s| stopping_criterion(s.value, self.config.threshold))
            })
            .map(|a| a.index)
    }

    /// Checks every structural invariant of a run record.
    pub fn check_invariants(&self) -> Result<(), String> {
        let cfg = &self.config;
        if self.attempts.len() > cfg.model_iter as usize + 1 {
            return Err(format!(
                "{} attempts exceeds model_iter + 1 = {}",
                self.attempts.len(),
                cfg.model_iter + 1
            ));
        }
        for (i, a) in self.attempts.iter().enumerate() {
            if a.index != i {
                return Err(format!("attempt {i} has index {}", a.index));
            }
            if a.macro_versions.len() > cfg.error_iter as usize + 1 {
                return Err(format!(
                    "attempt {i} has {} macro versions, limit {}",
                    a.macro_versions.len(),
                    cfg.error_iter + 1
                ));
            }
            for (j, m) in a.macro_versions.iter().enumerate() {
                if m.version_index != j {
                    return Err(format!(
                        "attempt {i} version {j} has version_index {}",
                        m.version_index
                    ));
                }
            }
            if a.executions.len() > a.macro_versions.len() {
                return Err(format!("attempt {i} has more executions than macros"));
            }
            for e in &a.executions {
                if !e.is_ok() && e.error_message.as_deref().is_none_or(str::is_empty) {
                    return Err(format!("attempt {i} has an error without a message"));
                }
            }
            if a.score.is_some()
                && (!a.execution().is_some_and(ExecutionResult::is_ok) || a.render.is_none())
            {
                return Err(format!("attempt {i} scored without a successful render"));
            }
            if let Some(s) = a.score {
                if !(0.0..=1.0).contains(&s.value) {
                    return Err(format!("attempt {i} score {} outside [0,1]", s.value));
                }
            }
            if let Some(c) = &a.caption {
                if c.text.is_empty() {
                    return Err(format!("attempt {i} has an empty caption"));
                }
            }
        }
        match self.status {
            RunStatus::Success => {
                let passed = self
                    .last_attempt()
                    .and_then(|a| a.score)
                    .is_some_and(|s| stopping_criterion(s.value, cfg.threshold));
                let human = self
                    .verdict
                    .as_ref()
                    .and_then(|v| v.human_success)
                    .unwrap_or(false);
                if !passed && !human {
                    return Err("success without a passing score or human acceptance".into());
                }
            }
            RunStatus::Failure => {
                let Some(kind) = self.failure_kind else {
                    return Err("failure without failure_kind".into());
                };
                let non_exec = !self
                    .last_attempt()
                    .and_then(Attempt::execution)
                    .is_some_and(ExecutionResult::is_ok);
                if non_exec != (kind == FailureKind::NonExecutable) {
                    return Err(format!(
                        "failure_kind {kind:?} disagrees with the final attempt"
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }
}
