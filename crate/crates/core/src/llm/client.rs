use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde_json::{json, Value};

use super::{BackendConfig, ChatModel, GenerationConfig, LlmError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// Minimal blocking JSON POST. `Err` means the request never produced an
/// HTTP status (connect failure, timeout, reset).
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value, timeout: Duration) -> Result<HttpReply, String>;
}

#[derive(Debug, Clone, Default)]
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl Transport for ReqwestTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value, timeout: Duration) -> Result<HttpReply, String> {
        let mut req = self.client.post(url).timeout(timeout).json(body);
        if let Some(key) = bearer {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| e.to_string())?;
        Ok(HttpReply { status, body })
    }
}

/// Exponential backoff: `base * factor^attempt`, stretched by up to
/// `jitter` (a fraction) of random extra delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base: Duration,
    pub factor: f64,
    pub jitter: f64,
}

impl RetryPolicy {
    pub fn new(max_retries: u32) -> Self {
        Self {
            max_retries,
            base: Duration::from_secs(1),
            factor: 2.0,
            jitter: 0.25,
        }
    }

    pub fn delay(&self, attempt: u32) -> Duration {
        let scale = self.factor.powi(attempt as i32) * (1.0 + self.jitter * rand::random::<f64>());
        self.base.mul_f64(scale)
    }
}

fn retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

/// Client for `POST {base_url}/v1/chat/completions`.
pub struct OpenAiClient<T: Transport = ReqwestTransport> {
    config: BackendConfig,
    api_key: Option<String>,
    transport: T,
    retry: RetryPolicy,
    retries: AtomicU64,
}

impl OpenAiClient<ReqwestTransport> {
    /// Reads the API key from `config.api_key_env`.
    pub fn from_env(config: BackendConfig) -> Result<Self, LlmError> {
        let key =
            std::env::var(&config.api_key_env).map_err(|_| LlmError::MissingApiKey(config.api_key_env.clone()))?;
        Ok(Self::with_transport(config, Some(key), ReqwestTransport::default()))
    }
}

impl<T: Transport> OpenAiClient<T> {
    pub fn with_transport(config: BackendConfig, api_key: Option<String>, transport: T) -> Self {
        let retry = RetryPolicy::new(config.max_retries);
        Self {
            config,
            api_key,
            transport,
            retry,
            retries: AtomicU64::new(0),
        }
    }

    pub fn with_retry_policy(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Total retries performed so far across all calls.
    pub fn retries(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    pub fn endpoint(&self) -> String {
        format!("{}/v1/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn request_body(&self, prompt: &str, config: &GenerationConfig) -> Value {
        let mut body = json!({
            "model": self.config.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": config.temperature,
            "max_tokens": config.max_tokens,
        });
        if let Some(seed) = config.seed_hint {
            body["seed"] = json!(seed);
        }
        body
    }
}

fn extract_content(body: &str) -> Result<String, LlmError> {
    let v: Value = serde_json::from_str(body).map_err(|e| LlmError::Protocol(format!("response is not JSON: {e}")))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| LlmError::Protocol("missing choices[0].message.content".into()))
}

impl<T: Transport> ChatModel for OpenAiClient<T> {
    fn id(&self) -> String {
        format!("{}:{}", self.config.name, self.config.model_id)
    }

    fn complete(&self, prompt: &str, config: &GenerationConfig) -> Result<String, LlmError> {
        let url = self.endpoint();
        let body = self.request_body(prompt, config);
        let timeout = self.config.timeout();
        let mut last_status = None;
        let mut last = String::new();
        for attempt in 0..=self.retry.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.retry.delay(attempt - 1));
                self.retries.fetch_add(1, Ordering::Relaxed);
            }
            match self.transport.post_json(&url, self.api_key.as_deref(), &body, timeout) {
                Ok(reply) if (200..300).contains(&reply.status) => return extract_content(&reply.body),
                Ok(reply) if retryable(reply.status) => {
                    tracing::warn!(status = reply.status, attempt, "retryable status from {url}");
                    last_status = Some(reply.status);
                    last = format!("HTTP {}", reply.status);
                }
                Ok(reply) => {
                    return Err(LlmError::Status {
                        status: reply.status,
                        body: reply.body,
                    })
                }
                Err(e) => {
                    tracing::warn!(attempt, "transport failure: {e}");
                    last_status = None;
                    last = e;
                }
            }
        }
        Err(LlmError::RetriesExhausted {
            attempts: self.retry.max_retries + 1,
            status: last_status,
            last,
        })
    }
}
