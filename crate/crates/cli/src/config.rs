//! TOML configuration file.
//!
//! ```toml
//! store = "runs"
//!
//! [pipeline]
//! threshold = 0.9
//! error_iter = 3
//! model_iter = 3
//! executor_kind = "mock"
//! prompt_set = "mock"
//!
//! [pipeline.llm_provider]
//! kind = "replay"
//! script = "data/replay.json"
//!
//! [backends]
//! freecad_binary = "/usr/bin/freecadcmd"
//! scorer_url = "http://127.0.0.1:8900"
//! scorer_timeout = 30
//!
//! [serve]
//! bind = "127.0.0.1:8080"
//! static_dir = "ui/dist"
//! reports_dir = "reports"
//! ```

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use cadrefine::api::merge_config;
use cadrefine::pipeline::{Backends, PipelineConfig};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub store: Option<PathBuf>,
    #[serde(default)]
    pub pipeline: Option<toml::Table>,
    #[serde(default)]
    pub backends: BackendsSection,
    #[serde(default)]
    pub serve: ServeSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendsSection {
    pub freecad_binary: Option<PathBuf>,
    pub scorer_url: Option<String>,
    /// Seconds.
    pub scorer_timeout: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeSection {
    pub bind: Option<SocketAddr>,
    pub static_dir: Option<PathBuf>,
    pub auth_token: Option<String>,
    pub reports_dir: Option<PathBuf>,
    /// Seconds.
    pub long_poll: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Defaults overlaid with the `[pipeline]` table.
    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let overrides = match &self.pipeline {
            Some(t) => Some(serde_json::to_value(t)?),
            None => None,
        };
        merge_config(&PipelineConfig::default(), overrides.as_ref())
            .map_err(|e| anyhow::anyhow!("[pipeline]: {e}"))
    }

    pub fn backends(&self) -> Backends {
        let mut b = Backends::default();
        if let Some(bin) = &self.backends.freecad_binary {
            b.freecad_binary = bin.clone();
        }
        b.scorer_url = self.backends.scorer_url.clone();
        if let Some(t) = self.backends.scorer_timeout {
            b.scorer_timeout = Duration::from_secs_f64(t);
        }
        b
    }
}
