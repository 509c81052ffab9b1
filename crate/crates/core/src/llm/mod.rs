//! Chat-completion access for the Generate and Analyze steps.
//!
//! Two providers implement [`ChatProvider`]: [`OpenAiCompatible`] speaks the
//! chat-completions wire protocol over HTTP, and [`MockProvider`] replays a
//! script of canned assistant texts in order.

mod http;
mod mock;
mod openai;
mod retry;
mod structured;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpResponse, HttpTransport, UreqTransport};
pub use mock::{MockProvider, MockScript};
pub use openai::OpenAiCompatible;
pub use retry::{backoff_schedule, with_retries, Sleeper, ThreadSleeper};
pub use structured::{extract_structured, MalformedOutput};

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
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

pub const GENERATE_TEMPERATURE: f64 = 0.7;
pub const ANALYZE_TEMPERATURE: f64 = 0.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl CompletionRequest {
    pub fn new(messages: Vec<ChatMessage>, temperature: f64, max_output_tokens: u32) -> Result<Self, ProviderError> {
        let req = Self {
            messages,
            temperature,
            max_output_tokens,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        let bad = |m: &str| Err(ProviderError::new(ProviderErrorKind::InvalidRequest(m.into()), 0));
        match self.messages.first() {
            None => return bad("no messages"),
            Some(m) if m.role != Role::System => return bad("first message must be a system message"),
            _ => {}
        }
        if self
            .messages
            .iter()
            .any(|m| m.role != Role::Assistant && m.content.trim().is_empty())
        {
            return bad("empty system/user message");
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return bad("negative temperature");
        }
        Ok(())
    }
}

fn default_timeout() -> u64 {
    120
}
fn default_retries() -> u32 {
    3
}
fn default_backoff_base() -> f64 {
    1.0
}
fn default_backoff_factor() -> f64 {
    2.0
}
fn default_key_var() -> String {
    "OPENAI_API_KEY".into()
}

/// Live endpoint settings; also used for the embedding endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub base_url: String,
    pub model_name: String,
    /// Environment variable holding the API key; empty for no auth.
    #[serde(default = "default_key_var")]
    pub api_key_env_var: String,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_base")]
    pub backoff_base_seconds: f64,
    #[serde(default = "default_backoff_factor")]
    pub backoff_factor: f64,
}

impl ProviderConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            api_key_env_var: default_key_var(),
            timeout_seconds: default_timeout(),
            max_retries: default_retries(),
            backoff_base_seconds: default_backoff_base(),
            backoff_factor: default_backoff_factor(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.timeout_seconds == 0 {
            return Err("timeout_seconds must be > 0".into());
        }
        if self.base_url.trim().is_empty() {
            return Err("base_url is empty".into());
        }
        if !(self.backoff_base_seconds >= 0.0 && self.backoff_factor >= 1.0) {
            return Err("backoff must have base >= 0 and factor >= 1".into());
        }
        Ok(())
    }

    pub fn endpoint(&self, path: &str) -> String {
        format!("{}/{}", self.base_url.trim_end_matches('/'), path)
    }

    pub(crate) fn api_key(&self) -> Result<Option<String>, ProviderErrorKind> {
        if self.api_key_env_var.is_empty() {
            return Ok(None);
        }
        std::env::var(&self.api_key_env_var)
            .map(Some)
            .map_err(|_| ProviderErrorKind::MissingApiKey(self.api_key_env_var.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderErrorKind {
    Timeout,
    Transport(String),
    Http { status: u16, body: String },
    InvalidResponse(String),
    InvalidRequest(String),
    MissingApiKey(String),
    ScriptExhausted,
}

impl ProviderErrorKind {
    /// Timeouts, connection failures, 429 and 5xx.
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderErrorKind::Timeout | ProviderErrorKind::Transport(_) => true,
            ProviderErrorKind::Http { status, .. } => *status == 429 || (500..600).contains(status),
            _ => false,
        }
    }
}

impl fmt::Display for ProviderErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderErrorKind::Timeout => write!(f, "timeout"),
            ProviderErrorKind::Transport(m) => write!(f, "transport: {m}"),
            ProviderErrorKind::Http { status, body } => write!(f, "HTTP {status}: {body}"),
            ProviderErrorKind::InvalidResponse(m) => write!(f, "invalid response: {m}"),
            ProviderErrorKind::InvalidRequest(m) => write!(f, "invalid request: {m}"),
            ProviderErrorKind::MissingApiKey(v) => write!(f, "environment variable `{v}` not set"),
            ProviderErrorKind::ScriptExhausted => write!(f, "mock script exhausted"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} (after {attempts} attempt(s))")]
pub struct ProviderError {
    pub kind: ProviderErrorKind,
    pub attempts: u32,
}

impl ProviderError {
    pub fn new(kind: ProviderErrorKind, attempts: u32) -> Self {
        Self { kind, attempts }
    }
}

/// Something that answers chat-completion requests.
pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError>;

    /// Short identifier for logs and reports.
    fn name(&self) -> &str;
}

impl<P: ChatProvider + ?Sized> ChatProvider for &P {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        (**self).complete(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for Box<P> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        (**self).complete(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}
