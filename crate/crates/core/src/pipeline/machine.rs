//! The refinement loop as a pure transition function.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::PipelineConfig;
use super::record::{Attempt, FailureKind, RunRecord, RunStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure(FailureKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    GenerateInitial,
    ErrorRefine,
    Execute,
    ScoreRender,
    RequestCaption,
    ModelRefine,
    Finish(Outcome),
}

/// `true` iff `score` strictly exceeds `threshold`.
pub fn stopping_criterion(score: f64, threshold: f64) -> bool {
    score > threshold
}

/// Next step for an in-progress run. Depends only on its arguments.
pub fn next_action(record: &RunRecord, config: &PipelineConfig) -> Action {
    let Some(attempt) = record.last_attempt() else {
        return Action::GenerateInitial;
    };
    if attempt.macro_versions.is_empty() {
        // a plan arrived without its macro; regenerate this attempt's macro
        return if attempt.index == 0 {
            Action::GenerateInitial
        } else {
            Action::ModelRefine
        };
    }
    let model_budget_left = attempt.index < config.model_iter as usize;

    let Some(exec) = attempt.execution() else {
        return Action::Execute;
    };
    if !exec.is_ok() || attempt.render.is_none() {
        if attempt.macro_versions.len() < config.error_iter as usize + 1 {
            return Action::ErrorRefine;
        }
        return if model_budget_left {
            Action::ModelRefine
        } else {
            Action::Finish(Outcome::Failure(FailureKind::NonExecutable))
        };
    }
    let Some(score) = attempt.score else {
        return Action::ScoreRender;
    };
    if stopping_criterion(score.value, config.threshold) {
        return Action::Finish(Outcome::Success);
    }
    if !model_budget_left {
        return Action::Finish(Outcome::Failure(FailureKind::WrongStructure));
    }
    if attempt.caption.is_none() {
        Action::RequestCaption
    } else {
        Action::ModelRefine
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("contract violation: {0}")]
pub struct ContractViolation(pub String);

/// Failure kind of a failed run, judged on its final attempt.
///
/// Accepts records with `status = failure` (unless a human accepted them)
/// and any record a human rejected.
pub fn classify_failure(record: &RunRecord) -> Result<FailureKind, ContractViolation> {
    let human = record.verdict.as_ref().and_then(|v| v.human_success);
    let failed = match human {
        Some(h) => !h,
        None => record.status == RunStatus::Failure,
    };
    if !failed {
        return Err(ContractViolation(format!(
            "classify_failure on a run that did not fail (status {:?}, human verdict {:?})",
            record.status, human
        )));
    }
    let executed = record
        .last_attempt()
        .and_then(Attempt::execution)
        .is_some_and(|e| e.is_ok());
    Ok(if executed {
        FailureKind::WrongStructure
    } else {
        FailureKind::NonExecutable
    })
}
