use serde::{Deserialize, Serialize};

use crate::executor::Dialect;
use crate::feedback::FeedbackMode;
use crate::llm::ProviderSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutorKind {
    Freecad,
    Mock,
}

impl ExecutorKind {
    pub fn dialect(self) -> Dialect {
        match self {
            ExecutorKind::Freecad => Dialect::FreecadPython,
            ExecutorKind::Mock => Dialect::Mock,
        }
    }
}

fn d_threshold() -> f64 {
    0.9
}
fn d_iter() -> u32 {
    3
}
fn d_timeout() -> f64 {
    120.0
}
fn d_prompt_set() -> String {
    "freecad".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Stop once the score strictly exceeds this.
    #[serde(default = "d_threshold")]
    pub threshold: f64,
    /// Error refinements per generated macro.
    #[serde(default = "d_iter")]
    pub error_iter: u32,
    /// Model refinements per run.
    #[serde(default = "d_iter")]
    pub model_iter: u32,
    #[serde(default)]
    pub feedback_mode: FeedbackMode,
    /// Seconds to wait for a human caption in interactive mode.
    #[serde(default = "d_timeout")]
    pub feedback_timeout: f64,
    pub executor_kind: ExecutorKind,
    #[serde(default)]
    pub llm_provider: ProviderSpec,
    /// Built-in prompt set name or template directory.
    #[serde(default = "d_prompt_set")]
    pub prompt_set: String,
    /// Seconds before a macro execution is killed.
    #[serde(default = "d_timeout")]
    pub execution_timeout: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            threshold: d_threshold(),
            error_iter: d_iter(),
            model_iter: d_iter(),
            feedback_mode: FeedbackMode::Auto,
            feedback_timeout: d_timeout(),
            executor_kind: ExecutorKind::Freecad,
            llm_provider: ProviderSpec::default(),
            prompt_set: d_prompt_set(),
            execution_timeout: d_timeout(),
        }
    }
}

impl PipelineConfig {
    /// A hermetic configuration: mock executor, mock prompts, replay provider.
    pub fn mock(script: impl Into<std::path::PathBuf>, script_name: impl Into<String>) -> Self {
        Self {
            executor_kind: ExecutorKind::Mock,
            llm_provider: ProviderSpec::replay(script, script_name),
            prompt_set: "mock".into(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(format!(
                "threshold must be in (0, 1], got {}",
                self.threshold
            ));
        }
        if !(self.feedback_timeout >= 0.0 && self.feedback_timeout.is_finite()) {
            return Err("feedback_timeout must be a non-negative number of seconds".into());
        }
        if !(self.execution_timeout > 0.0 && self.execution_timeout.is_finite()) {
            return Err("execution_timeout must be a positive number of seconds".into());
        }
        if self.prompt_set.is_empty() {
            return Err("prompt_set must not be empty".into());
        }
        self.llm_provider.validate()
    }

    pub fn feedback_timeout(&self) -> std::time::Duration {
        std::time::Duration::from_secs_f64(self.feedback_timeout)
    }

    pub fn execution_timeout(&self) -> std::time::Duration {
        std::time::Duration::from_secs_f64(self.execution_timeout)
    }

    /// Upper bound on logical LLM calls in one run.
    pub fn llm_call_budget(&self) -> u64 {
        let (m, e) = (self.model_iter as u64, self.error_iter as u64);
        1 + m + (m + 1) * e
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = PipelineConfig::default();
        assert_eq!(c.threshold, 0.9);
        assert_eq!(c.error_iter, 3);
        assert_eq!(c.model_iter, 3);
        assert_eq!(c.feedback_timeout, 120.0);
        assert_eq!(c.llm_call_budget(), 1 + 3 + 4 * 3);
        c.validate().unwrap();
    }

    #[test]
    fn threshold_bounds() {
        let mut c = PipelineConfig::default();
        for bad in [0.0, -0.1, 1.5, f64::NAN] {
            c.threshold = bad;
            assert!(c.validate().is_err(), "{bad}");
        }
        c.threshold = 1.0;
        c.validate().unwrap();
    }

    #[test]
    fn partial_json_uses_defaults() {
        let c: PipelineConfig = serde_json::from_str(r#"{"executor_kind": "mock"}"#).unwrap();
        assert_eq!(c.model_iter, 3);
        assert_eq!(c.executor_kind, ExecutorKind::Mock);
    }
}
