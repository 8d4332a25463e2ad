//! LLM access: prompt templates, providers, and the three generation calls
//! used by the refinement loop.

mod extract;
mod http;
mod provider;
mod replay;
mod template;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_generation, MacroGeneration};
pub use http::HttpChatProvider;
pub use provider::{
    build_provider, ChatMessage, Provider, ProviderError, ProviderKind, ProviderSpec, Role,
};
pub use replay::{ReplayEntry, ReplayProvider, ScriptBook};
pub use template::{render_prompt, Exemplar, PromptSet, PromptTemplate, TemplateError};

/// One provider round trip, kept for audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub prompt: String,
    pub response: String,
}

#[derive(Debug, Clone)]
pub struct Generation {
    pub generation: MacroGeneration,
    pub exchanges: Vec<Exchange>,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("precondition violated: {0}")]
    Precondition(&'static str),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("response format error: {reason}")]
    ResponseFormat {
        reason: String,
        exchanges: Vec<Exchange>,
    },
    #[error("provider error: {source}")]
    Provider {
        source: ProviderError,
        exchanges: Vec<Exchange>,
    },
}

impl LlmError {
    /// Round trips that completed before the error.
    pub fn exchanges(&self) -> &[Exchange] {
        match self {
            LlmError::ResponseFormat { exchanges, .. } | LlmError::Provider { exchanges, .. } => {
                exchanges
            }
            _ => &[],
        }
    }
}

const REPROMPT: &str = "Your reply could not be used: {reason}. Reply again with a short plan \
followed by exactly one fenced code block containing the complete macro.";

/// Generation, error refinement and caption refinement over one provider.
#[derive(Clone)]
pub struct LlmClient {
    provider: Arc<dyn Provider>,
    prompts: PromptSet,
}

impl LlmClient {
    pub fn new(provider: Arc<dyn Provider>, prompts: PromptSet) -> Self {
        Self { provider, prompts }
    }

    pub fn prompts(&self) -> &PromptSet {
        &self.prompts
    }

    pub fn generate_initial(&self, query: &str) -> Result<Generation, LlmError> {
        if query.is_empty() {
            return Err(LlmError::Precondition("query must not be empty"));
        }
        self.call(&self.prompts.initial, &[("user_query", query)])
    }

    pub fn refine_on_error(
        &self,
        query: &str,
        macro_text: &str,
        error_message: &str,
    ) -> Result<Generation, LlmError> {
        if error_message.is_empty() {
            return Err(LlmError::Precondition("error_message must not be empty"));
        }
        self.call(
            &self.prompts.error_refine,
            &[
                ("user_query", query),
                ("macro", macro_text),
                ("error_message", error_message),
            ],
        )
    }

    pub fn refine_on_caption(
        &self,
        query: &str,
        macro_text: &str,
        caption: &str,
    ) -> Result<Generation, LlmError> {
        if caption.is_empty() {
            return Err(LlmError::Precondition("caption must not be empty"));
        }
        self.call(
            &self.prompts.caption_refine,
            &[
                ("user_query", query),
                ("macro", macro_text),
                ("caption", caption),
            ],
        )
    }

    fn call(
        &self,
        template: &PromptTemplate,
        bindings: &[(&str, &str)],
    ) -> Result<Generation, LlmError> {
        let bindings: BTreeMap<String, String> = bindings
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let prompt = render_prompt(template, &bindings)?;
        let mut messages = vec![
            ChatMessage::new(Role::System, self.prompts.system.clone()),
            ChatMessage::new(Role::User, prompt.clone()),
        ];
        let mut exchanges = Vec::new();

        let mut prompt = prompt;
        for retry in [false, true] {
            let response = match self.provider.complete(&messages) {
                Ok(r) => r,
                Err(source) => return Err(LlmError::Provider { source, exchanges }),
            };
            exchanges.push(Exchange {
                prompt: prompt.clone(),
                response: response.clone(),
            });
            match extract_generation(&response) {
                Ok(generation) => {
                    return Ok(Generation {
                        generation,
                        exchanges,
                    })
                }
                Err(reason) if retry => return Err(LlmError::ResponseFormat { reason, exchanges }),
                Err(reason) => {
                    prompt = REPROMPT.replace("{reason}", &reason);
                    messages.push(ChatMessage::new(Role::Assistant, response));
                    messages.push(ChatMessage::new(Role::User, prompt.clone()));
                }
            }
        }
        unreachable!("loop returns on the second pass")
    }
}
