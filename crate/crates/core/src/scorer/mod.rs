//! Render/query alignment scoring and captioning.
//!
//! The remote backend talks to a model sidecar over HTTP; the stub backend
//! compares scene descriptors and writes template captions so that full
//! refinement runs need no models at all.

mod remote;
mod stub;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::RenderArtifact;

pub use remote::{RemoteScorer, DEFAULT_SCORER_TIMEOUT};
pub use stub::{stub_caption, stub_score, StubScorer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreBackend {
    Remote,
    Stub,
}

/// Probability that the render answers "yes" to the query question, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub backend: ScoreBackend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaptionSource {
    Machine,
    Human,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caption {
    pub text: String,
    pub source: CaptionSource,
}

impl Caption {
    pub fn machine(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            source: CaptionSource::Machine,
        }
    }

    pub fn human(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            source: CaptionSource::Human,
        }
    }
}

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("query must not be empty")]
    EmptyQuery,
    #[error("scorer configuration: {0}")]
    Config(String),
    #[error("cannot read render: {0}")]
    Render(String),
    #[error("sidecar request failed: {0}")]
    Sidecar(String),
    #[error("sidecar returned an invalid response: {0}")]
    Protocol(String),
}

/// The question asked of the VQA model. The query is embedded verbatim.
pub fn vqa_question(query: &str) -> Result<String, ScorerError> {
    if query.is_empty() {
        return Err(ScorerError::EmptyQuery);
    }
    Ok(format!(
        "Does this figure show {query}? Please answer yes or no."
    ))
}

pub trait Scorer: Send + Sync {
    fn score(&self, render: &RenderArtifact, query: &str) -> Result<Score, ScorerError>;
    fn caption(&self, render: &RenderArtifact) -> Result<Caption, ScorerError>;
}
