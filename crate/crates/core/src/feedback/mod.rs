//! Caption arbitration between the machine captioner and a human operator,
//! plus recording of final human verdicts.

use std::collections::HashMap;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{RunStatus, Verdict};
use crate::scorer::{Caption, CaptionSource};
use crate::store::{fold, next_seq, EventBody, EventStore, RunEvent, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackMode {
    #[default]
    Auto,
    Interactive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRequest {
    pub run_id: String,
    pub attempt_index: usize,
    pub machine_caption: Caption,
    pub issued_at: DateTime<Utc>,
    pub deadline: DateTime<Utc>,
}

impl CaptionRequest {
    pub fn new(
        run_id: &str,
        attempt_index: usize,
        machine_caption: Caption,
        timeout: Duration,
    ) -> Self {
        let issued_at = Utc::now();
        Self {
            run_id: run_id.to_string(),
            attempt_index,
            machine_caption,
            issued_at,
            deadline: deadline(issued_at, timeout),
        }
    }
}

pub fn deadline(issued_at: DateTime<Utc>, timeout: Duration) -> DateTime<Utc> {
    issued_at + chrono::Duration::from_std(timeout).unwrap_or(chrono::Duration::MAX)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecidedBy {
    Human,
    TimeoutFallback,
    AutoMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionDecision {
    pub caption: Caption,
    pub decided_by: DecidedBy,
}

#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error("machine caption must not be empty")]
    EmptyCaption,
    #[error("run '{0}' not found")]
    NotFound(String),
    #[error("run '{0}' is not finished")]
    NotTerminal(String),
    #[error("run '{0}' is not waiting for feedback")]
    NotAwaiting(String),
    #[error(transparent)]
    Store(StoreError),
}

impl From<StoreError> for FeedbackError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => FeedbackError::NotFound(id),
            other => FeedbackError::Store(other),
        }
    }
}

/// Producer side of a run's feedback channel.
#[derive(Debug, Clone)]
pub struct MailboxSender(Sender<String>);

impl MailboxSender {
    /// Returns `false` when the run no longer listens.
    pub fn send(&self, caption: impl Into<String>) -> bool {
        self.0.send(caption.into()).is_ok()
    }
}

/// Consumer side, owned by the running pipeline.
#[derive(Debug)]
pub struct Mailbox(Receiver<String>);

pub fn mailbox() -> (MailboxSender, Mailbox) {
    let (tx, rx) = mpsc::channel();
    (MailboxSender(tx), Mailbox(rx))
}

impl Mailbox {
    /// Discards captions sent outside a feedback window.
    pub fn drain(&self) -> usize {
        self.0.try_iter().count()
    }

    /// First non-blank caption before `timeout`. `None` on timeout or when
    /// every sender is gone.
    pub fn wait(&self, timeout: Duration) -> Option<String> {
        let until = Instant::now() + timeout;
        loop {
            let left = until.saturating_duration_since(Instant::now());
            match self.0.recv_timeout(left) {
                Ok(text) if text.trim().is_empty() => continue,
                Ok(text) => return Some(text),
                Err(RecvTimeoutError::Timeout | RecvTimeoutError::Disconnected) => return None,
            }
        }
    }
}

/// Picks the caption fed to the next model refinement.
///
/// Auto mode returns the machine caption without touching the mailbox.
/// Interactive mode waits up to `timeout` for a human caption and falls back
/// to the machine caption; a missing or closed mailbox counts as a timeout.
pub fn arbitrate(
    machine_caption: Caption,
    mode: FeedbackMode,
    mailbox: Option<&Mailbox>,
    timeout: Duration,
) -> Result<CaptionDecision, FeedbackError> {
    if machine_caption.text.trim().is_empty() {
        return Err(FeedbackError::EmptyCaption);
    }
    if mode == FeedbackMode::Auto {
        return Ok(CaptionDecision {
            caption: machine_caption,
            decided_by: DecidedBy::AutoMode,
        });
    }
    match await_human_caption(mailbox, timeout) {
        Some(caption) => Ok(CaptionDecision {
            caption,
            decided_by: DecidedBy::Human,
        }),
        None => Ok(CaptionDecision {
            caption: machine_caption,
            decided_by: DecidedBy::TimeoutFallback,
        }),
    }
}

/// Human caption only, for when the machine captioner failed.
pub fn await_human_caption(mailbox: Option<&Mailbox>, timeout: Duration) -> Option<Caption> {
    mailbox?.wait(timeout).map(Caption::human)
}

/// Registry of live run mailboxes, shared by API handlers.
#[derive(Debug, Default)]
pub struct FeedbackHub {
    senders: Mutex<HashMap<String, MailboxSender>>,
}

impl FeedbackHub {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&self, run_id: &str) -> Mailbox {
        let (tx, rx) = mailbox();
        self.senders.lock().unwrap().insert(run_id.to_string(), tx);
        rx
    }

    pub fn deliver(&self, run_id: &str, caption: &str) -> Result<(), FeedbackError> {
        let senders = self.senders.lock().unwrap();
        match senders.get(run_id) {
            Some(tx) if tx.send(caption) => Ok(()),
            _ => Err(FeedbackError::NotAwaiting(run_id.to_string())),
        }
    }

    pub fn remove(&self, run_id: &str) {
        self.senders.lock().unwrap().remove(run_id);
    }
}

/// Appends a human verdict to a finished run and returns the resulting verdict.
/// Every call appends an event, so repeated submissions leave an audit trail.
pub fn record_verdict(
    store: &dyn EventStore,
    run_id: &str,
    human_success: bool,
) -> Result<Verdict, FeedbackError> {
    let events = store.events(run_id)?;
    let rec = fold(&events, &mut |_| Ok(String::new()))?;
    if !rec.status.is_terminal() {
        return Err(FeedbackError::NotTerminal(run_id.to_string()));
    }
    let event = RunEvent::new(
        run_id,
        next_seq(store, run_id)?,
        EventBody::VerdictRecorded { human_success },
    );
    store.append(&event)?;
    Ok(Verdict {
        auto_pass: rec.status == RunStatus::Success,
        human_success: Some(human_success),
        decided_at: Some(event.at),
    })
}

/// `decided_by = human` must carry a human caption.
pub fn decision_consistent(d: &CaptionDecision) -> bool {
    (d.decided_by == DecidedBy::Human) == (d.caption.source == CaptionSource::Human)
}
