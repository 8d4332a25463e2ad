use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use ureq::Agent;

use super::provider::{ChatMessage, Provider, ProviderError, ProviderSpec};

const REQUEST_TIMEOUT: Duration = Duration::from_secs(180);

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

/// OpenAI-compatible chat-completions client.
#[derive(Debug)]
pub struct HttpChatProvider {
    endpoint: String,
    model: String,
    temperature: f64,
    max_retries: u32,
    api_key: Option<String>,
    backoff: Duration,
    agent: Agent,
}

impl HttpChatProvider {
    pub fn from_spec(spec: &ProviderSpec) -> Result<Self, ProviderError> {
        let endpoint = spec
            .endpoint
            .clone()
            .ok_or_else(|| ProviderError::Config("http_chat provider needs an endpoint".into()))?;
        let api_key = match &spec.credential {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                ProviderError::Credential(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let agent = Agent::config_builder()
            .timeout_global(Some(REQUEST_TIMEOUT))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            endpoint,
            model: spec.model_name.clone(),
            temperature: spec.temperature,
            max_retries: spec.max_retries,
            api_key,
            backoff: Duration::from_millis(500),
            agent,
        })
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn once(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        let body = ChatRequest {
            model: &self.model,
            messages,
            temperature: self.temperature,
        };
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(ProviderError::Status { status, body });
        }
        let parsed: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::Protocol(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::Protocol("no choices[0].message.content".into()))
    }
}

impl Provider for HttpChatProvider {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        let mut attempt = 0;
        loop {
            match self.once(messages) {
                Err(e) if e.is_transient() && attempt < self.max_retries => {
                    tracing::warn!(attempt, error = %e, "chat completion failed, retrying");
                    thread::sleep(self.backoff * 2u32.pow(attempt.min(6)));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}
