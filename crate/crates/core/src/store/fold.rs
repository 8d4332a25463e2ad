use super::event::{EventBody, RunEvent};
use super::StoreError;
use crate::executor::MacroDocument;
use crate::feedback::FeedbackMode;
use crate::pipeline::{Attempt, RunRecord, RunStatus, Verdict};

fn attempt_mut(rec: &mut RunRecord, index: usize, seq: u64) -> Result<&mut Attempt, StoreError> {
    if index == rec.attempts.len() {
        rec.attempts.push(Attempt::new(index));
    }
    rec.attempts
        .get_mut(index)
        .ok_or_else(|| StoreError::Corrupt {
            seq,
            reason: format!("event refers to attempt {index} out of order"),
        })
}

/// Applies one event to the record under construction.
///
/// `read_artifact` resolves the macro artifacts referenced by
/// `macro_generated` events.
pub fn apply_event(
    record: &mut Option<RunRecord>,
    event: &RunEvent,
    read_artifact: &mut dyn FnMut(&str) -> Result<String, StoreError>,
) -> Result<(), StoreError> {
    let seq = event.seq;
    let corrupt = |reason: &str| StoreError::Corrupt {
        seq,
        reason: reason.to_string(),
    };

    if let EventBody::RunStarted { query, config } = &event.body {
        if record.is_some() {
            return Err(corrupt("second run_started"));
        }
        *record = Some(RunRecord::new(
            event.run_id.clone(),
            query.clone(),
            event.at,
            config.clone(),
        ));
        return Ok(());
    }
    let rec = record
        .as_mut()
        .ok_or_else(|| corrupt("event before run_started"))?;

    match &event.body {
        EventBody::RunStarted { .. } => unreachable!(),
        EventBody::PlanGenerated {
            attempt, plan_text, ..
        } => {
            let a = attempt_mut(rec, *attempt, seq)?;
            a.plans.push(plan_text.clone());
        }
        EventBody::MacroGenerated {
            attempt,
            version,
            dialect,
            artifact,
            ..
        } => {
            let text = read_artifact(artifact)?;
            let a = attempt_mut(rec, *attempt, seq)?;
            if *version != a.macro_versions.len() {
                return Err(corrupt("macro version out of order"));
            }
            a.macro_versions.push(MacroDocument {
                text,
                dialect: *dialect,
                version_index: *version,
            });
        }
        EventBody::ExecutionFinished {
            attempt, result, ..
        } => {
            attempt_mut(rec, *attempt, seq)?
                .executions
                .push(result.clone());
        }
        EventBody::RenderCaptured {
            attempt, render, ..
        } => {
            attempt_mut(rec, *attempt, seq)?.render = Some(render.clone());
        }
        EventBody::Scored { attempt, score, .. } => {
            attempt_mut(rec, *attempt, seq)?.score = Some(*score);
        }
        EventBody::CaptionRequested { .. } => {
            if rec.config.feedback_mode == FeedbackMode::Interactive {
                rec.status = RunStatus::AwaitingFeedback;
            }
        }
        EventBody::CaptionDecided { attempt, decision } => {
            attempt_mut(rec, *attempt, seq)?.caption = Some(decision.caption.clone());
            rec.status = RunStatus::Running;
        }
        EventBody::Refined { .. } => {}
        EventBody::VerdictRecorded { human_success } => {
            let v = rec.verdict.get_or_insert(Verdict {
                auto_pass: false,
                human_success: None,
                decided_at: None,
            });
            v.human_success = Some(*human_success);
            v.decided_at = Some(event.at);
        }
        EventBody::RunFinished {
            status,
            failure_kind,
            cause,
        } => {
            rec.status = *status;
            rec.failure_kind = *failure_kind;
            rec.cause = cause.clone();
            if *status != RunStatus::Aborted {
                rec.verdict = Some(Verdict {
                    auto_pass: *status == RunStatus::Success,
                    human_success: None,
                    decided_at: None,
                });
            }
        }
    }
    Ok(())
}

/// Folds a complete event list into a record.
pub fn fold(
    events: &[RunEvent],
    read_artifact: &mut dyn FnMut(&str) -> Result<String, StoreError>,
) -> Result<RunRecord, StoreError> {
    let mut record = None;
    for e in events {
        apply_event(&mut record, e, read_artifact)?;
    }
    record.ok_or(StoreError::Corrupt {
        seq: 1,
        reason: "empty event log".into(),
    })
}
