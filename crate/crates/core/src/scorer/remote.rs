use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use ureq::Agent;

use super::{Caption, Score, ScoreBackend, Scorer, ScorerError};
use crate::executor::{RenderArtifact, RenderKind};

pub const DEFAULT_SCORER_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Serialize)]
struct ScoreRequest<'a> {
    image_png_base64: String,
    query: &'a str,
}

#[derive(Deserialize)]
struct ScoreResponse {
    score: f64,
}

#[derive(Serialize)]
struct CaptionRequest {
    image_png_base64: String,
}

#[derive(Deserialize)]
struct CaptionResponse {
    caption: String,
}

/// Client for the VQA/caption sidecar (`/v1/score`, `/v1/caption`, `/healthz`).
#[derive(Debug, Clone)]
pub struct RemoteScorer {
    base_url: String,
    agent: Agent,
}

impl RemoteScorer {
    pub fn new(base_url: impl Into<String>, timeout: Duration) -> Self {
        let agent = Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent,
        }
    }

    pub fn healthy(&self) -> bool {
        self.agent
            .get(format!("{}/healthz", self.base_url))
            .call()
            .map(|r| r.status() == 200)
            .unwrap_or(false)
    }

    fn png_base64(render: &RenderArtifact) -> Result<String, ScorerError> {
        if render.kind != RenderKind::Png {
            return Err(ScorerError::Config(
                "remote scorer needs a PNG render; use the stub scorer with the mock executor"
                    .into(),
            ));
        }
        let bytes = std::fs::read(&render.path_or_hash)
            .map_err(|e| ScorerError::Render(format!("{}: {e}", render.path_or_hash)))?;
        Ok(base64::engine::general_purpose::STANDARD.encode(bytes))
    }

    fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, ScorerError> {
        let mut resp = self
            .agent
            .post(format!("{}{path}", self.base_url))
            .send_json(body)
            .map_err(|e| ScorerError::Sidecar(e.to_string()))?;
        resp.body_mut()
            .read_json()
            .map_err(|e| ScorerError::Protocol(e.to_string()))
    }
}

impl Scorer for RemoteScorer {
    fn score(&self, render: &RenderArtifact, query: &str) -> Result<Score, ScorerError> {
        if query.is_empty() {
            return Err(ScorerError::EmptyQuery);
        }
        let req = ScoreRequest {
            image_png_base64: Self::png_base64(render)?,
            query,
        };
        let resp: ScoreResponse = self.post("/v1/score", &req)?;
        if !(0.0..=1.0).contains(&resp.score) {
            return Err(ScorerError::Protocol(format!(
                "score {} outside [0, 1]",
                resp.score
            )));
        }
        Ok(Score {
            value: resp.score,
            backend: ScoreBackend::Remote,
        })
    }

    fn caption(&self, render: &RenderArtifact) -> Result<Caption, ScorerError> {
        let req = CaptionRequest {
            image_png_base64: Self::png_base64(render)?,
        };
        let resp: CaptionResponse = self.post("/v1/caption", &req)?;
        if resp.caption.trim().is_empty() {
            return Err(ScorerError::Protocol("empty caption".into()));
        }
        Ok(Caption::machine(resp.caption))
    }
}
