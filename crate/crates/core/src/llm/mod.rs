//! Chat-completion backends, prompt rendering and completion parsing.

mod client;
mod mock;
mod parse;
mod prompt;

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{HttpReply, OpenAiClient, ReqwestTransport, RetryPolicy, Transport};
pub use mock::{
    extract_paraphrase_target, extract_summary_request, reverse_words, ExtractiveSummarizer, ReversalParaphraser,
    RuleBackend, ScriptStep, SequenceBackend,
};
pub use parse::{detect_refusal, parse_summary, ModelSummary, ParsedSummary};
pub use prompt::{
    render_paraphrase_prompt, render_summary_prompt, PromptKind, PromptTemplate, SummaryStyle, PARAPHRASE_TEMPLATE,
};

/// Environment variable holding the API key unless a backend names another.
pub const DEFAULT_API_KEY_ENV: &str = "RELPARA_API_KEY";
/// Overrides every HTTP backend's base URL when set.
pub const BASE_URL_ENV: &str = "RELPARA_BASE_URL";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("invalid backend config: {0}")]
    Config(String),
    #[error("gave up after {attempts} attempts; last failure: {last}")]
    RetriesExhausted {
        attempts: u32,
        status: Option<u16>,
        last: String,
    },
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("no sentences could be extracted from the completion")]
    NothingExtracted,
    #[error("mock backend: {0}")]
    Mock(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_hint: Option<u64>,
}

impl GenerationConfig {
    pub fn new(temperature: f64, max_tokens: u32) -> Result<Self, LlmError> {
        if temperature.is_nan() || temperature < 0.0 {
            return Err(LlmError::Config(format!("temperature must be >= 0, got {temperature}")));
        }
        if max_tokens == 0 {
            return Err(LlmError::Config("max_tokens must be positive".into()));
        }
        Ok(Self {
            temperature,
            max_tokens,
            seed_hint: None,
        })
    }

    /// Temperature 0, as used for judging.
    pub fn greedy(max_tokens: u32) -> Self {
        Self {
            temperature: 0.0,
            max_tokens,
            seed_hint: None,
        }
    }
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            temperature: 0.7,
            max_tokens: 512,
            seed_hint: None,
        }
    }
}

/// Anything that turns a single user prompt into assistant text.
pub trait ChatModel: Send + Sync {
    /// Identifier recorded in run manifests.
    fn id(&self) -> String;

    fn complete(&self, prompt: &str, config: &GenerationConfig) -> Result<String, LlmError>;
}

/// Sends one prompt to `backend`.
pub fn complete(backend: &dyn ChatModel, prompt: &str, config: &GenerationConfig) -> Result<String, LlmError> {
    backend.complete(prompt, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    /// OpenAI-compatible chat-completions endpoint.
    Openai,
    MockExtractive,
    MockReversal,
}

/// Connection settings for one model endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub name: String,
    pub kind: BackendKind,
    pub base_url: String,
    pub model_id: String,
    pub api_key_env: String,
    pub max_retries: u32,
    pub timeout_secs: f64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            name: "openai".into(),
            kind: BackendKind::Openai,
            base_url: "https://api.openai.com".into(),
            model_id: "gpt-3.5-turbo".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            max_retries: 5,
            timeout_secs: 60.0,
        }
    }
}

impl BackendConfig {
    pub fn mock_extractive() -> Self {
        Self {
            name: "mock-extractive".into(),
            kind: BackendKind::MockExtractive,
            model_id: "mock-extractive".into(),
            ..Self::default()
        }
    }

    pub fn mock_reversal() -> Self {
        Self {
            name: "mock-reversal".into(),
            kind: BackendKind::MockReversal,
            model_id: "mock-reversal".into(),
            ..Self::default()
        }
    }

    pub fn is_mock(&self) -> bool {
        self.kind != BackendKind::Openai
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs.max(0.0))
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.is_mock() {
            return Ok(());
        }
        let url = reqwest::Url::parse(&self.base_url)
            .map_err(|e| LlmError::Config(format!("base_url {:?}: {e}", self.base_url)))?;
        if url.cannot_be_a_base() {
            return Err(LlmError::Config(format!(
                "base_url {:?} is not absolute",
                self.base_url
            )));
        }
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return Err(LlmError::Config("timeout_secs must be positive".into()));
        }
        Ok(())
    }

    /// The id the built model reports, without building it.
    pub fn id(&self) -> String {
        match self.kind {
            BackendKind::MockExtractive => ExtractiveSummarizer.id(),
            BackendKind::MockReversal => ReversalParaphraser.id(),
            BackendKind::Openai => format!("{}:{}", self.name, self.model_id),
        }
    }

    /// Instantiates the backend, resolving API keys and the base-URL
    /// override from the environment.
    pub fn build(&self) -> Result<Arc<dyn ChatModel>, LlmError> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::MockExtractive => Arc::new(ExtractiveSummarizer),
            BackendKind::MockReversal => Arc::new(ReversalParaphraser),
            BackendKind::Openai => {
                let mut cfg = self.clone();
                if let Ok(url) = std::env::var(BASE_URL_ENV) {
                    cfg.base_url = url;
                    cfg.validate()?;
                }
                Arc::new(OpenAiClient::from_env(cfg)?)
            }
        })
    }
}
