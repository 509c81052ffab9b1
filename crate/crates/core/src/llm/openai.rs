use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use super::http::{HttpTransport, UreqTransport};
use super::retry::{with_retries, Sleeper, ThreadSleeper};
use super::{ChatProvider, CompletionRequest, ProviderConfig, ProviderError, ProviderErrorKind};

/// Client for an OpenAI-compatible endpoint.
#[derive(Clone)]
pub struct OpenAiCompatible {
    config: ProviderConfig,
    transport: Arc<dyn HttpTransport>,
    sleeper: Arc<dyn Sleeper>,
}

impl std::fmt::Debug for OpenAiCompatible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OpenAiCompatible").field("config", &self.config).finish()
    }
}

impl OpenAiCompatible {
    pub fn new(config: ProviderConfig) -> Self {
        Self::with_transport(config, Arc::new(UreqTransport), Arc::new(ThreadSleeper))
    }

    pub fn with_transport(config: ProviderConfig, transport: Arc<dyn HttpTransport>, sleeper: Arc<dyn Sleeper>) -> Self {
        Self {
            config,
            transport,
            sleeper,
        }
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    /// POSTs `body` to `{base_url}/{path}` with retries and returns the parsed
    /// JSON response.
    pub fn post(&self, path: &str, body: &Value) -> Result<Value, ProviderError> {
        let key = self.config.api_key().map_err(|k| ProviderError::new(k, 0))?;
        let url = self.config.endpoint(path);
        let timeout = Duration::from_secs(self.config.timeout_seconds);
        with_retries(
            self.config.max_retries,
            self.config.backoff_base_seconds,
            self.config.backoff_factor,
            self.sleeper.as_ref(),
            || {
                let resp = self.transport.post_json(&url, key.as_deref(), body, timeout)?;
                if !(200..300).contains(&resp.status) {
                    return Err(ProviderErrorKind::Http {
                        status: resp.status,
                        body: resp.body,
                    });
                }
                serde_json::from_str(&resp.body).map_err(|e| ProviderErrorKind::InvalidResponse(e.to_string()))
            },
        )
    }
}

impl ChatProvider for OpenAiCompatible {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        request.validate()?;
        let body = json!({
            "model": self.config.model_name,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        });
        let resp = self.post("chat/completions", &body)?;
        resp.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| {
                ProviderError::new(
                    ProviderErrorKind::InvalidResponse("missing choices[0].message.content".into()),
                    1,
                )
            })
    }

    fn name(&self) -> &str {
        "openai-compatible"
    }
}
