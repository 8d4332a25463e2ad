//! Deterministic provider that plays back scripted responses by call ordinal.
//!
//! Script files are JSON:
//!
//! ```json
//! {"scripts": {"cube": ["plan\n```\nbox c 10 10 10\n```", {"error": "rate limited"}]}}
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::provider::{ChatMessage, Provider, ProviderError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReplayEntry {
    Response(String),
    Failure { error: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptBook {
    pub scripts: BTreeMap<String, Vec<ReplayEntry>>,
}

impl ScriptBook {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read script {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("invalid script {}: {e}", path.display()))
    }
}

#[derive(Debug, Default)]
struct ReplayState {
    cursor: usize,
    requests: Vec<Vec<ChatMessage>>,
}

#[derive(Debug)]
pub struct ReplayProvider {
    name: String,
    entries: Vec<ReplayEntry>,
    state: Mutex<ReplayState>,
}

impl ReplayProvider {
    pub fn new(name: impl Into<String>, entries: Vec<ReplayEntry>) -> Self {
        Self {
            name: name.into(),
            entries,
            state: Mutex::default(),
        }
    }

    /// Convenience for tests: every entry is a plain response.
    pub fn from_responses<S: Into<String>>(
        name: impl Into<String>,
        responses: impl IntoIterator<Item = S>,
    ) -> Self {
        Self::new(
            name,
            responses
                .into_iter()
                .map(|s| ReplayEntry::Response(s.into()))
                .collect(),
        )
    }

    pub fn from_book(book: &ScriptBook, name: &str) -> Result<Self, String> {
        let entries = book
            .scripts
            .get(name)
            .ok_or_else(|| format!("no replay script named '{name}'"))?;
        Ok(Self::new(name, entries.clone()))
    }

    pub fn calls(&self) -> usize {
        self.state.lock().unwrap().cursor
    }

    /// Every request received so far, in order.
    pub fn requests(&self) -> Vec<Vec<ChatMessage>> {
        self.state.lock().unwrap().requests.clone()
    }
}

impl Provider for ReplayProvider {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        let mut state = self.state.lock().unwrap();
        let ordinal = state.cursor;
        let entry = self
            .entries
            .get(ordinal)
            .ok_or_else(|| ProviderError::ScriptExhausted {
                script: self.name.clone(),
                calls: ordinal,
            })?;
        state.cursor += 1;
        state.requests.push(messages.to_vec());
        match entry {
            ReplayEntry::Response(text) => Ok(text.clone()),
            ReplayEntry::Failure { error } => Err(ProviderError::Scripted(error.clone())),
        }
    }
}
