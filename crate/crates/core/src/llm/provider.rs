use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::http::HttpChatProvider;
use super::replay::{ReplayProvider, ScriptBook};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Protocol(String),
    #[error("credential: {0}")]
    Credential(String),
    #[error("replay script '{script}' exhausted after {calls} calls")]
    ScriptExhausted { script: String, calls: usize },
    #[error("scripted provider failure: {0}")]
    Scripted(String),
    #[error("provider configuration: {0}")]
    Config(String),
}

impl ProviderError {
    /// Worth retrying.
    pub fn is_transient(&self) -> bool {
        match self {
            ProviderError::Transport(_) => true,
            ProviderError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// A chat-completion backend. Implementations must be shareable across runs.
pub trait Provider: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    HttpChat,
    Replay,
}

fn default_credential() -> Option<String> {
    Some("OPENAI_API_KEY".into())
}

fn default_retries() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub kind: ProviderKind,
    /// Full chat-completions URL (http_chat only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Name of the environment variable holding the API key.
    #[serde(default = "default_credential")]
    pub credential: Option<String>,
    /// Replay script file (replay only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
    /// Script name within the file (replay only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script_name: Option<String>,
}

impl ProviderSpec {
    pub fn replay(script: impl Into<PathBuf>, name: impl Into<String>) -> Self {
        Self {
            kind: ProviderKind::Replay,
            endpoint: None,
            model_name: "replay".into(),
            temperature: 0.0,
            max_retries: 0,
            credential: None,
            script: Some(script.into()),
            script_name: Some(name.into()),
        }
    }

    pub fn http_chat(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            kind: ProviderKind::HttpChat,
            endpoint: Some(endpoint.into()),
            model_name: model.into(),
            temperature: 0.0,
            max_retries: default_retries(),
            credential: default_credential(),
            script: None,
            script_name: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err("temperature must be >= 0".into());
        }
        match self.kind {
            ProviderKind::HttpChat if self.endpoint.is_none() => {
                Err("http_chat provider needs an endpoint".into())
            }
            ProviderKind::Replay if self.script.is_none() => {
                Err("replay provider needs a script".into())
            }
            _ => Ok(()),
        }
    }
}

impl Default for ProviderSpec {
    fn default() -> Self {
        Self::http_chat("https://api.openai.com/v1/chat/completions", "gpt-4-turbo")
    }
}

/// Builds a fresh provider. Replay providers start at call ordinal zero.
pub fn build_provider(spec: &ProviderSpec) -> Result<Arc<dyn Provider>, ProviderError> {
    spec.validate().map_err(ProviderError::Config)?;
    match spec.kind {
        ProviderKind::HttpChat => Ok(Arc::new(HttpChatProvider::from_spec(spec)?)),
        ProviderKind::Replay => {
            let path = spec.script.as_ref().expect("validated");
            let book = ScriptBook::load(path).map_err(ProviderError::Config)?;
            let name = spec.script_name.as_deref().unwrap_or("default");
            Ok(Arc::new(
                ReplayProvider::from_book(&book, name).map_err(ProviderError::Config)?,
            ))
        }
    }
}
