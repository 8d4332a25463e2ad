use chrono::Utc;
use thiserror::Error;
use tracing::{debug, warn};

use super::config::PipelineConfig;
use super::machine::{next_action, Action, Outcome};
use super::record::{RunRecord, RunStatus};
use crate::executor::{ErrorClass, ExecutionResult, Executor, RenderArtifact, RenderKind};
use crate::feedback::{arbitrate, await_human_caption, deadline, FeedbackMode, Mailbox};
use crate::llm::{Generation, LlmClient, LlmError};
use crate::scorer::{vqa_question, Scorer};
use crate::store::{
    apply_event, EventBody, EventStore, MacroOrigin, RefinementKind, RunEvent, StoreError,
};

/// Collaborators of one run.
pub struct Deps<'a> {
    pub llm: &'a LlmClient,
    pub executor: &'a dyn Executor,
    pub scorer: &'a dyn Scorer,
    pub store: &'a dyn EventStore,
    /// Human captions for interactive mode.
    pub mailbox: Option<&'a Mailbox>,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("query must not be empty")]
    EmptyQuery,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("store: {0}")]
    Store(#[from] StoreError),
}

pub fn new_run_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

/// Runs a query to a terminal record.
pub fn run_query(
    query: &str,
    config: &PipelineConfig,
    deps: &Deps<'_>,
) -> Result<RunRecord, PipelineError> {
    RunSession::begin(deps.store, None, query, config.clone())?.drive(deps)
}

/// A run in progress. The record is maintained by folding every appended
/// event, exactly as a replay from the store would.
pub struct RunSession {
    run_id: String,
    seq: u64,
    record: Option<RunRecord>,
}

enum Step {
    Continue,
    Abort(String),
}

impl RunSession {
    /// Validates inputs and appends `run_started`.
    pub fn begin(
        store: &dyn EventStore,
        run_id: Option<String>,
        query: &str,
        config: PipelineConfig,
    ) -> Result<Self, PipelineError> {
        if query.trim().is_empty() {
            return Err(PipelineError::EmptyQuery);
        }
        config.validate().map_err(PipelineError::Config)?;
        let mut session = Self {
            run_id: run_id.unwrap_or_else(new_run_id),
            seq: 0,
            record: None,
        };
        session.emit(
            store,
            EventBody::RunStarted {
                query: query.to_string(),
                config,
            },
        )?;
        Ok(session)
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn record(&self) -> &RunRecord {
        self.record
            .as_ref()
            .expect("session starts with run_started")
    }

    fn emit(&mut self, store: &dyn EventStore, body: EventBody) -> Result<(), StoreError> {
        let event = RunEvent::new(self.run_id.clone(), self.seq + 1, body);
        store.append(&event)?;
        self.seq = event.seq;
        let run_id = self.run_id.clone();
        apply_event(&mut self.record, &event, &mut |name| {
            let bytes = store.read_artifact(&run_id, name)?;
            String::from_utf8(bytes).map_err(|e| StoreError::Corrupt {
                seq: event.seq,
                reason: e.to_string(),
            })
        })
    }

    /// Steps the state machine until the run is terminal.
    pub fn drive(mut self, deps: &Deps<'_>) -> Result<RunRecord, PipelineError> {
        let config = self.record().config.clone();
        if deps.executor.dialect() != config.executor_kind.dialect() {
            let cause = format!(
                "executor runs {:?} macros but the run is configured for {:?}",
                deps.executor.dialect(),
                config.executor_kind
            );
            return self.abort(deps.store, cause);
        }
        loop {
            let action = next_action(self.record(), &config);
            debug!(run_id = %self.run_id, ?action, "step");
            let step = match action {
                Action::Finish(outcome) => return self.finish(deps.store, outcome),
                Action::GenerateInitial => self.generate(deps, action)?,
                Action::ErrorRefine | Action::ModelRefine => self.generate(deps, action)?,
                Action::Execute => self.execute(deps, &config)?,
                Action::ScoreRender => self.score(deps)?,
                Action::RequestCaption => self.request_caption(deps, &config)?,
            };
            if let Step::Abort(cause) = step {
                return self.abort(deps.store, cause);
            }
        }
    }

    fn finish(
        mut self,
        store: &dyn EventStore,
        outcome: Outcome,
    ) -> Result<RunRecord, PipelineError> {
        let (status, failure_kind) = match outcome {
            Outcome::Success => (RunStatus::Success, None),
            Outcome::Failure(kind) => (RunStatus::Failure, Some(kind)),
        };
        self.emit(
            store,
            EventBody::RunFinished {
                status,
                failure_kind,
                cause: None,
            },
        )?;
        Ok(self.record.expect("started"))
    }

    fn abort(mut self, store: &dyn EventStore, cause: String) -> Result<RunRecord, PipelineError> {
        warn!(run_id = %self.run_id, %cause, "run aborted");
        self.emit(
            store,
            EventBody::RunFinished {
                status: RunStatus::Aborted,
                failure_kind: None,
                cause: Some(cause),
            },
        )?;
        Ok(self.record.expect("started"))
    }

    /// Initial generation, error refinement, and model refinement share this:
    /// one LLM call, then the transcript and macro are stored before the
    /// events that reference them.
    fn generate(&mut self, deps: &Deps<'_>, action: Action) -> Result<Step, PipelineError> {
        let rec = self.record();
        let query = rec.query.clone();
        let dialect = rec.config.executor_kind.dialect();

        let (attempt, version, origin, result) = match (action, rec.last_attempt()) {
            (Action::GenerateInitial, None) => (
                0,
                0,
                MacroOrigin::Initial,
                deps.llm.generate_initial(&query),
            ),
            (Action::GenerateInitial, Some(a)) => (
                a.index,
                0,
                MacroOrigin::Initial,
                deps.llm.generate_initial(&query),
            ),
            (Action::ErrorRefine, Some(a)) => {
                let doc = a.last_macro().expect("error refinement follows a macro");
                let error = a
                    .execution()
                    .and_then(|e| e.error_message.clone())
                    .unwrap_or_else(|| "render capture failed".into());
                let (attempt, version) = (a.index, a.macro_versions.len());
                let refined = (a.index, doc.version_index);
                let text = doc.text.clone();
                self.emit_refined(deps.store, RefinementKind::Error, refined, &error)?;
                let result = deps.llm.refine_on_error(&query, &text, &error);
                (attempt, version, MacroOrigin::ErrorRefine, result)
            }
            (Action::ModelRefine, Some(a)) if a.macro_versions.is_empty() => {
                // plan without macro; regenerate in place
                (
                    a.index,
                    0,
                    MacroOrigin::Regenerate,
                    deps.llm.generate_initial(&query),
                )
            }
            (Action::ModelRefine, Some(a)) => {
                let doc = a.last_macro().expect("non-empty");
                let refined = (a.index, doc.version_index);
                let text = doc.text.clone();
                let next = a.index + 1;
                match a.caption.clone() {
                    Some(caption) => {
                        self.emit_refined(
                            deps.store,
                            RefinementKind::Model,
                            refined,
                            &caption.text,
                        )?;
                        let result = deps.llm.refine_on_caption(&query, &text, &caption.text);
                        (next, 0, MacroOrigin::ModelRefine, result)
                    }
                    None => {
                        // no executable macro to caption: start the attempt afresh
                        let error = a
                            .execution()
                            .and_then(|e| e.error_message.clone())
                            .unwrap_or_else(|| "no executable macro".into());
                        self.emit_refined(deps.store, RefinementKind::Model, refined, &error)?;
                        (
                            next,
                            0,
                            MacroOrigin::Regenerate,
                            deps.llm.generate_initial(&query),
                        )
                    }
                }
            }
            (action, _) => unreachable!("generate called for {action:?}"),
        };

        let transcript = format!("attempt-{attempt}/llm-v{version}.json");
        let generation = match result {
            Ok(g) => g,
            Err(e) => {
                if !e.exchanges().is_empty() {
                    let name = format!("attempt-{attempt}/llm-v{version}-failed.json");
                    self.write_json(deps.store, &name, e.exchanges())?;
                }
                return Ok(Step::Abort(abort_cause(&e)));
            }
        };
        let Generation {
            generation,
            exchanges,
        } = generation;
        self.write_json(deps.store, &transcript, &exchanges)?;
        let artifact = format!("attempt-{attempt}/macro-v{version}.txt");
        deps.store
            .write_artifact(&self.run_id, &artifact, generation.macro_text.as_bytes())?;

        self.emit(
            deps.store,
            EventBody::PlanGenerated {
                attempt,
                version,
                plan_text: generation.plan_text,
                transcript,
            },
        )?;
        self.emit(
            deps.store,
            EventBody::MacroGenerated {
                attempt,
                version,
                origin,
                dialect,
                artifact,
            },
        )?;
        Ok(Step::Continue)
    }

    fn emit_refined(
        &mut self,
        store: &dyn EventStore,
        kind: RefinementKind,
        (attempt, version): (usize, usize),
        feedback: &str,
    ) -> Result<(), StoreError> {
        self.emit(
            store,
            EventBody::Refined {
                kind,
                attempt,
                version,
                feedback: feedback.to_string(),
            },
        )
    }

    fn write_json<T: serde::Serialize + ?Sized>(
        &self,
        store: &dyn EventStore,
        name: &str,
        value: &T,
    ) -> Result<(), StoreError> {
        let bytes = serde_json::to_vec_pretty(value).map_err(std::io::Error::other)?;
        store.write_artifact(&self.run_id, name, &bytes)
    }

    fn execute(&mut self, deps: &Deps<'_>, config: &PipelineConfig) -> Result<Step, PipelineError> {
        let a = self
            .record()
            .last_attempt()
            .expect("execute follows a macro");
        let attempt = a.index;
        let doc = a.last_macro().expect("execute follows a macro").clone();
        let workdir = deps.store.workdir(&self.run_id, attempt)?;
        let (mut result, render) =
            deps.executor
                .execute(&doc, &workdir, config.execution_timeout());

        let mut captured = None;
        if result.is_ok() {
            match render.map(|r| self.persist_render(deps.store, attempt, r)) {
                Some(Ok(pair)) => captured = Some(pair),
                Some(Err(e)) => {
                    result = ExecutionResult::error(
                        ErrorClass::Runtime,
                        format!("render capture failed: {e}"),
                        std::time::Duration::from_secs_f64(result.duration),
                    )
                }
                None => {
                    result = ExecutionResult::error(
                        ErrorClass::Runtime,
                        "render capture failed: no render produced",
                        std::time::Duration::from_secs_f64(result.duration),
                    )
                }
            }
        }
        self.emit(
            deps.store,
            EventBody::ExecutionFinished {
                attempt,
                version: doc.version_index,
                result,
            },
        )?;
        if let Some((render, artifact)) = captured {
            self.emit(
                deps.store,
                EventBody::RenderCaptured {
                    attempt,
                    render,
                    artifact,
                },
            )?;
        }
        Ok(Step::Continue)
    }

    /// Copies the render into the run's artifacts.
    fn persist_render(
        &self,
        store: &dyn EventStore,
        attempt: usize,
        render: RenderArtifact,
    ) -> Result<(RenderArtifact, String), StoreError> {
        match render.kind {
            RenderKind::Png => {
                let bytes = std::fs::read(&render.path_or_hash)?;
                let name = format!("attempt-{attempt}/render.png");
                store.write_artifact(&self.run_id, &name, &bytes)?;
                Ok((render, name))
            }
            RenderKind::Descriptor => {
                let name = format!("attempt-{attempt}/render.json");
                self.write_json(store, &name, &render.scene)?;
                Ok((render, name))
            }
        }
    }

    fn score(&mut self, deps: &Deps<'_>) -> Result<Step, PipelineError> {
        let rec = self.record();
        let a = rec.last_attempt().expect("score follows a render");
        let attempt = a.index;
        let render = a.render.clone().expect("score follows a render");
        let question = match vqa_question(&rec.query) {
            Ok(q) => q,
            Err(e) => return Ok(Step::Abort(format!("scorer: {e}"))),
        };
        let score = match deps.scorer.score(&render, &rec.query) {
            Ok(s) if (0.0..=1.0).contains(&s.value) => s,
            Ok(s) => {
                return Ok(Step::Abort(format!(
                    "scorer: score {} outside [0, 1]",
                    s.value
                )))
            }
            Err(e) => return Ok(Step::Abort(format!("scorer: {e}"))),
        };
        self.emit(
            deps.store,
            EventBody::Scored {
                attempt,
                question,
                score,
            },
        )?;
        Ok(Step::Continue)
    }

    fn request_caption(
        &mut self,
        deps: &Deps<'_>,
        config: &PipelineConfig,
    ) -> Result<Step, PipelineError> {
        let a = self
            .record()
            .last_attempt()
            .expect("caption follows a score");
        let attempt = a.index;
        let render = a.render.clone().expect("caption follows a render");
        let machine = deps
            .scorer
            .caption(&render)
            .map_err(|e| e.to_string())
            .and_then(|c| {
                if c.text.trim().is_empty() {
                    Err("captioner returned an empty caption".to_string())
                } else {
                    Ok(c)
                }
            });
        if config.feedback_mode == FeedbackMode::Auto {
            if let Err(e) = &machine {
                return Ok(Step::Abort(format!("captioner: {e}")));
            }
        }
        if let Some(mb) = deps.mailbox {
            let stale = mb.drain();
            if stale > 0 {
                debug!(run_id = %self.run_id, stale, "dropped captions sent outside the feedback window");
            }
        }
        let timeout = config.feedback_timeout();
        let issued_at = Utc::now();
        self.emit(
            deps.store,
            EventBody::CaptionRequested {
                attempt,
                machine_caption: machine.as_ref().ok().cloned(),
                issued_at,
                deadline: deadline(issued_at, timeout),
            },
        )?;
        let decision = match machine {
            Ok(caption) => arbitrate(caption, config.feedback_mode, deps.mailbox, timeout)
                .expect("machine caption checked non-empty"),
            Err(e) => match await_human_caption(deps.mailbox, timeout) {
                Some(caption) => crate::feedback::CaptionDecision {
                    caption,
                    decided_by: crate::feedback::DecidedBy::Human,
                },
                None => {
                    return Ok(Step::Abort(format!(
                        "captioner: {e}; no human caption before the deadline"
                    )))
                }
            },
        };
        self.emit(deps.store, EventBody::CaptionDecided { attempt, decision })?;
        Ok(Step::Continue)
    }
}

fn abort_cause(e: &LlmError) -> String {
    match e {
        LlmError::Provider { source, .. } => format!("llm provider: {source}"),
        LlmError::ResponseFormat { reason, .. } => {
            format!("llm response unusable after reprompt: {reason}")
        }
        other => format!("llm: {other}"),
    }
}
