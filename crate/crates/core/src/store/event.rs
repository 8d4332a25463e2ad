use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::executor::{Dialect, ExecutionResult, RenderArtifact};
use crate::feedback::CaptionDecision;
use crate::pipeline::{FailureKind, PipelineConfig, RunStatus};
use crate::scorer::{Caption, Score};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    RunStarted,
    PlanGenerated,
    MacroGenerated,
    ExecutionFinished,
    RenderCaptured,
    Scored,
    CaptionRequested,
    CaptionDecided,
    Refined,
    VerdictRecorded,
    RunFinished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacroOrigin {
    Initial,
    ErrorRefine,
    ModelRefine,
    Regenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementKind {
    Error,
    Model,
}

/// Event payloads, serialised as `"kind": ..., "payload": {...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    RunStarted {
        query: String,
        config: PipelineConfig,
    },
    PlanGenerated {
        attempt: usize,
        version: usize,
        plan_text: String,
        /// Artifact holding the prompt/response transcript.
        transcript: String,
    },
    MacroGenerated {
        attempt: usize,
        version: usize,
        origin: MacroOrigin,
        dialect: Dialect,
        /// Artifact holding the macro text.
        artifact: String,
    },
    ExecutionFinished {
        attempt: usize,
        version: usize,
        result: ExecutionResult,
    },
    RenderCaptured {
        attempt: usize,
        render: RenderArtifact,
        artifact: String,
    },
    Scored {
        attempt: usize,
        question: String,
        score: Score,
    },
    CaptionRequested {
        attempt: usize,
        machine_caption: Option<Caption>,
        issued_at: DateTime<Utc>,
        deadline: DateTime<Utc>,
    },
    CaptionDecided {
        attempt: usize,
        decision: CaptionDecision,
    },
    Refined {
        kind: RefinementKind,
        /// Attempt and macro version being refined.
        attempt: usize,
        version: usize,
        feedback: String,
    },
    VerdictRecorded {
        human_success: bool,
    },
    RunFinished {
        status: RunStatus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        failure_kind: Option<FailureKind>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cause: Option<String>,
    },
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::RunStarted { .. } => EventKind::RunStarted,
            EventBody::PlanGenerated { .. } => EventKind::PlanGenerated,
            EventBody::MacroGenerated { .. } => EventKind::MacroGenerated,
            EventBody::ExecutionFinished { .. } => EventKind::ExecutionFinished,
            EventBody::RenderCaptured { .. } => EventKind::RenderCaptured,
            EventBody::Scored { .. } => EventKind::Scored,
            EventBody::CaptionRequested { .. } => EventKind::CaptionRequested,
            EventBody::CaptionDecided { .. } => EventKind::CaptionDecided,
            EventBody::Refined { .. } => EventKind::Refined,
            EventBody::VerdictRecorded { .. } => EventKind::VerdictRecorded,
            EventBody::RunFinished { .. } => EventKind::RunFinished,
        }
    }
}

/// One line of a run's `events.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEvent {
    pub v: u32,
    pub run_id: String,
    pub seq: u64,
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub body: EventBody,
}

impl RunEvent {
    pub fn new(run_id: impl Into<String>, seq: u64, body: EventBody) -> Self {
        Self {
            v: SCHEMA_VERSION,
            run_id: run_id.into(),
            seq,
            at: Utc::now(),
            body,
        }
    }

    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }
}
