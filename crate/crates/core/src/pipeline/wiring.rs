use std::path::PathBuf;
use std::time::Duration;

use super::config::{ExecutorKind, PipelineConfig};
use super::run::Deps;
use crate::executor::{Executor, FreecadExecutor, MockExecutor, SceneDescriptor};
use crate::feedback::Mailbox;
use crate::llm::{build_provider, LlmClient, PromptSet};
use crate::scorer::{RemoteScorer, Scorer, StubScorer, DEFAULT_SCORER_TIMEOUT};
use crate::store::EventStore;

/// Owned collaborators; borrow them as [`Deps`] for a run.
pub struct OwnedDeps {
    pub llm: LlmClient,
    pub executor: Box<dyn Executor>,
    pub scorer: Box<dyn Scorer>,
}

impl OwnedDeps {
    pub fn borrow<'a>(
        &'a self,
        store: &'a dyn EventStore,
        mailbox: Option<&'a Mailbox>,
    ) -> Deps<'a> {
        Deps {
            llm: &self.llm,
            executor: self.executor.as_ref(),
            scorer: self.scorer.as_ref(),
            store,
            mailbox,
        }
    }
}

/// Backend settings that are not part of a run's configuration.
#[derive(Debug, Clone)]
pub struct Backends {
    pub freecad_binary: PathBuf,
    /// Sidecar base URL; the stub scorer is used when absent.
    pub scorer_url: Option<String>,
    pub scorer_timeout: Duration,
    /// Reference scene for the stub scorer.
    pub expected_scene: Option<SceneDescriptor>,
}

impl Default for Backends {
    fn default() -> Self {
        Self {
            freecad_binary: "freecad".into(),
            scorer_url: None,
            scorer_timeout: DEFAULT_SCORER_TIMEOUT,
            expected_scene: None,
        }
    }
}

/// Builds provider, prompts, executor, and scorer for `config`.
pub fn build_deps(config: &PipelineConfig, backends: &Backends) -> Result<OwnedDeps, String> {
    let provider = build_provider(&config.llm_provider).map_err(|e| e.to_string())?;
    let prompts = PromptSet::resolve(&config.prompt_set).map_err(|e| e.to_string())?;
    let executor: Box<dyn Executor> = match config.executor_kind {
        ExecutorKind::Freecad => Box::new(FreecadExecutor::new(backends.freecad_binary.clone())),
        ExecutorKind::Mock => Box::new(MockExecutor),
    };
    let scorer: Box<dyn Scorer> = match (&backends.scorer_url, &backends.expected_scene) {
        (Some(url), _) => Box::new(RemoteScorer::new(url.clone(), backends.scorer_timeout)),
        (None, Some(scene)) => Box::new(StubScorer::new(scene.clone())),
        (None, None) => Box::new(StubScorer::default()),
    };
    Ok(OwnedDeps {
        llm: LlmClient::new(provider, prompts),
        executor,
        scorer,
    })
}
