use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatProvider, CompletionRequest, ProviderError, ProviderErrorKind};

/// Assistant texts replayed in order. On disk: a JSON array of strings.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MockScript(pub Vec<String>);

impl MockScript {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, std::io::Error> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::from)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), std::io::Error> {
        fs::write(path, serde_json::to_string_pretty(self)?)
    }
}

/// Deterministic provider that replays a [`MockScript`].
#[derive(Debug, Default)]
pub struct MockProvider {
    script: Vec<String>,
    cursor: Mutex<usize>,
    requests: Mutex<Vec<CompletionRequest>>,
}

impl MockProvider {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self {
            script: responses.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    pub fn from_script(script: MockScript) -> Self {
        Self::new(script.0)
    }

    /// Requests received so far, in order.
    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.requests.lock().expect("poisoned").clone()
    }

    pub fn remaining(&self) -> usize {
        self.script.len() - *self.cursor.lock().expect("poisoned")
    }
}

impl ChatProvider for MockProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        request.validate()?;
        self.requests.lock().expect("poisoned").push(request.clone());
        let mut cursor = self.cursor.lock().expect("poisoned");
        match self.script.get(*cursor) {
            Some(text) => {
                *cursor += 1;
                Ok(text.clone())
            }
            None => Err(ProviderError::new(ProviderErrorKind::ScriptExhausted, 1)),
        }
    }

    fn name(&self) -> &str {
        "mock"
    }
}
