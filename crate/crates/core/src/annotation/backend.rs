//! Annotator backends: the chat-completion HTTP client and the retry policy
//! shared by all backends.

use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::Url;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::Sentence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl TokenUsage {
    pub fn total(&self) -> u64 {
        self.input_tokens + self.output_tokens
    }
}

impl std::ops::Add for TokenUsage {
    type Output = TokenUsage;

    fn add(self, rhs: TokenUsage) -> TokenUsage {
        TokenUsage {
            input_tokens: self.input_tokens + rhs.input_tokens,
            output_tokens: self.output_tokens + rhs.output_tokens,
        }
    }
}

impl std::ops::AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: TokenUsage) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for TokenUsage {
    fn sum<I: Iterator<Item = TokenUsage>>(iter: I) -> Self {
        iter.fold(TokenUsage::default(), |a, b| a + b)
    }
}

/// Rough token count (4 characters per token) for backends that do not
/// report usage.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

/// One prompt sent to a backend.
#[derive(Debug, Clone)]
pub struct CompletionRequest<'a> {
    pub prompt: String,
    pub temperature: f64,
    /// The sentences the prompt covers, in prompt order. Test doubles use
    /// them to produce answers; remote backends ignore them.
    pub sentences: Vec<&'a Sentence>,
    /// Distinguishes repeated requests for the same prompt (reannotation
    /// rounds, contamination runs).
    pub nonce: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    /// Network failures, timeouts, 5xx and 429 responses.
    #[error("transient: {0}")]
    Transient(String),
    #[error("fatal: {0}")]
    Fatal(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transient(_))
    }
}

/// Something that answers prompts. Implementations must tolerate
/// concurrent calls.
pub trait AnnotatorBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError>;

    fn name(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            initial_delay_ms: 500,
            max_delay_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        let ms = self
            .initial_delay_ms
            .saturating_mul(1u64 << attempt.min(20))
            .min(self.max_delay_ms);
        Duration::from_millis(ms)
    }
}

/// Calls `backend`, retrying transient failures with exponential backoff.
/// Fatal errors and well-formed but useless answers are returned as-is.
pub fn complete_with_retries(
    backend: &dyn AnnotatorBackend,
    request: &CompletionRequest<'_>,
    policy: &RetryPolicy,
) -> Result<Completion, BackendError> {
    let mut attempt = 0;
    loop {
        match backend.complete(request) {
            Err(e) if e.is_retryable() && attempt < policy.max_retries => {
                log::debug!(
                    "{}: {e}; retry {} of {}",
                    backend.name(),
                    attempt + 1,
                    policy.max_retries
                );
                thread::sleep(policy.delay(attempt));
                attempt += 1;
            }
            other => return other,
        }
    }
}

/// Settings for the annotation client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotatorConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub request_timeout_secs: u64,
    pub batch_size: usize,
    pub api_key_env_name: String,
    pub max_in_flight: usize,
    pub strict_tokens: bool,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for AnnotatorConfig {
    fn default() -> Self {
        AnnotatorConfig {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-4-0125-preview".into(),
            temperature: 0.1,
            max_retries: 3,
            request_timeout_secs: 60,
            batch_size: 1,
            api_key_env_name: "OPENAI_API_KEY".into(),
            max_in_flight: 4,
            strict_tokens: false,
            initial_backoff_ms: 500,
            max_backoff_ms: 8_000,
        }
    }
}

impl AnnotatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.batch_size) {
            return Err(Error::Config(format!(
                "batch_size must be 1 or 2, got {}",
                self.batch_size
            )));
        }
        if self.max_in_flight == 0 {
            return Err(Error::Config("max_in_flight must be at least 1".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(Error::Config(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            initial_delay_ms: self.initial_backoff_ms,
            max_delay_ms: self.max_backoff_ms,
        }
    }
}

/// Chat-completion client: POSTs `{model, messages, temperature}` with a
/// bearer token and reads the first choice's message content.
pub struct RemoteBackend {
    client: Client,
    endpoint: Url,
    model: String,
    api_key: String,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("endpoint", &self.endpoint.as_str())
            .field("model", &self.model)
            .finish_non_exhaustive()
    }
}

impl RemoteBackend {
    /// Fails before any request if the URL is invalid or the key variable
    /// is unset.
    pub fn from_config(cfg: &AnnotatorConfig) -> Result<Self> {
        let key = std::env::var(&cfg.api_key_env_name).map_err(|_| {
            Error::Config(format!(
                "environment variable {} is not set",
                cfg.api_key_env_name
            ))
        })?;
        Self::with_key(cfg, key)
    }

    pub fn with_key(cfg: &AnnotatorConfig, api_key: String) -> Result<Self> {
        cfg.validate()?;
        let endpoint = Url::parse(&cfg.endpoint_url)
            .map_err(|e| Error::Config(format!("bad endpoint url {:?}: {e}", cfg.endpoint_url)))?;
        if !matches!(endpoint.scheme(), "http" | "https") {
            return Err(Error::Config(format!(
                "endpoint must be http(s), got {}",
                endpoint.scheme()
            )));
        }
        let client = Client::builder()
            .timeout(Duration::from_secs(cfg.request_timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(RemoteBackend {
            client,
            endpoint,
            model: cfg.model_name.clone(),
            api_key,
        })
    }
}

/// Pulls the answer text and usage out of a chat-completion response body.
pub fn parse_chat_response(body: &Value, prompt: &str) -> Result<Completion, BackendError> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| BackendError::Fatal("response has no choices".into()))?;
    let text = choice
        .get("message")
        .and_then(|m| m.get("content"))
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let usage = body.get("usage");
    let field = |name: &str| usage.and_then(|u| u.get(name)).and_then(Value::as_u64);
    let usage = TokenUsage {
        input_tokens: field("prompt_tokens").unwrap_or_else(|| estimate_tokens(prompt)),
        output_tokens: field("completion_tokens").unwrap_or_else(|| estimate_tokens(&text)),
    };
    Ok(Completion { text, usage })
}

impl AnnotatorBackend for RemoteBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        let body = json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": request.prompt }],
            "temperature": request.temperature,
        });
        let response = self
            .client
            .post(self.endpoint.clone())
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(BackendError::Transient(format!("HTTP {status}: {text}")));
        }
        if !status.is_success() {
            return Err(BackendError::Fatal(format!("HTTP {status}: {text}")));
        }
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| BackendError::Fatal(format!("response is not JSON: {e}")))?;
        parse_chat_response(&value, &request.prompt)
    }

    fn name(&self) -> String {
        format!("remote:{}", self.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Flaky {
        failures: u32,
        calls: AtomicU32,
        error: BackendError,
    }

    impl AnnotatorBackend for Flaky {
        fn complete(&self, _: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(self.error.clone())
            } else {
                Ok(Completion {
                    text: "ok".into(),
                    usage: TokenUsage::default(),
                })
            }
        }

        fn name(&self) -> String {
            "flaky".into()
        }
    }

    fn request() -> CompletionRequest<'static> {
        CompletionRequest {
            prompt: "p".into(),
            temperature: 0.1,
            sentences: vec![],
            nonce: 0,
        }
    }

    const FAST: RetryPolicy = RetryPolicy {
        max_retries: 2,
        initial_delay_ms: 0,
        max_delay_ms: 0,
    };

    #[test]
    fn transient_errors_retried_up_to_limit() {
        let b = Flaky {
            failures: 2,
            calls: AtomicU32::new(0),
            error: BackendError::Transient("503".into()),
        };
        assert!(complete_with_retries(&b, &request(), &FAST).is_ok());
        assert_eq!(b.calls.load(Ordering::SeqCst), 3);

        let b = Flaky {
            failures: 3,
            calls: AtomicU32::new(0),
            error: BackendError::Transient("503".into()),
        };
        assert!(complete_with_retries(&b, &request(), &FAST).is_err());
        assert_eq!(b.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn fatal_errors_not_retried() {
        let b = Flaky {
            failures: 1,
            calls: AtomicU32::new(0),
            error: BackendError::Fatal("401".into()),
        };
        assert!(complete_with_retries(&b, &request(), &FAST).is_err());
        assert_eq!(b.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            max_retries: 5,
            initial_delay_ms: 100,
            max_delay_ms: 350,
        };
        assert_eq!(p.delay(0).as_millis(), 100);
        assert_eq!(p.delay(1).as_millis(), 200);
        assert_eq!(p.delay(2).as_millis(), 350);
    }

    #[test]
    fn config_fails_fast() {
        let cfg = AnnotatorConfig {
            api_key_env_name: "LLMLOOP_TEST_SURELY_UNSET_KEY".into(),
            ..Default::default()
        };
        assert!(matches!(
            RemoteBackend::from_config(&cfg),
            Err(Error::Config(_))
        ));

        let cfg = AnnotatorConfig {
            endpoint_url: "not a url".into(),
            ..Default::default()
        };
        assert!(matches!(
            RemoteBackend::with_key(&cfg, "k".into()),
            Err(Error::Config(_))
        ));

        let cfg = AnnotatorConfig {
            batch_size: 3,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn chat_response_extraction() {
        let body = json!({
            "choices": [{"message": {"role": "assistant", "content": "{\"output\": []}"}}],
            "usage": {"prompt_tokens": 120, "completion_tokens": 7}
        });
        let c = parse_chat_response(&body, "prompt").unwrap();
        assert_eq!(c.text, "{\"output\": []}");
        assert_eq!(c.usage.input_tokens, 120);
        assert_eq!(c.usage.output_tokens, 7);

        let body = json!({"choices": [{"message": {"content": null}}]});
        let c = parse_chat_response(&body, "abcdefgh").unwrap();
        assert_eq!(c.text, "");
        assert_eq!(c.usage.input_tokens, 2);

        assert!(parse_chat_response(&json!({}), "").is_err());
    }
}
