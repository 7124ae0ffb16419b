//! Model backends: identity and replay stand-ins for deterministic offline
//! runs, plus a generic chat-completion HTTP client for live providers.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BackendError, ModelBackend, RemediationPrompt, Transcript, TEMPERATURE};
use crate::chunk::ChunkId;

/// Echoes every chunk back unchanged; closes the loop for zero-delta tests.
#[derive(Debug, Clone)]
pub struct IdentityBackend {
    max_output_tokens: usize,
    context_window: usize,
}

impl IdentityBackend {
    pub fn new() -> IdentityBackend {
        IdentityBackend {
            max_output_tokens: 16_000,
            context_window: 128_000,
        }
    }
}

impl Default for IdentityBackend {
    fn default() -> Self {
        IdentityBackend::new()
    }
}

/// Model id reserved for the identity backend.
pub const IDENTITY_MODEL_ID: &str = "identity";

impl ModelBackend for IdentityBackend {
    fn model_id(&self) -> &str {
        IDENTITY_MODEL_ID
    }

    fn max_output_tokens(&self) -> usize {
        self.max_output_tokens
    }

    fn context_window(&self) -> usize {
        self.context_window
    }

    fn invoke(&self, prompt: &RemediationPrompt) -> Result<String, BackendError> {
        Ok(format!("```html\n{}\n```", prompt.chunk_html))
    }
}

/// Replays recorded completions keyed by chunk id.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    model_id: String,
    completions: BTreeMap<ChunkId, String>,
    max_output_tokens: usize,
    context_window: usize,
}

impl ReplayBackend {
    pub fn new(
        model_id: impl Into<String>,
        completions: BTreeMap<ChunkId, String>,
    ) -> ReplayBackend {
        ReplayBackend {
            model_id: model_id.into(),
            completions,
            max_output_tokens: 16_000,
            context_window: 128_000,
        }
    }

    /// Load every transcript JSON in `dir` recorded for this model.
    pub fn from_transcript_dir(model_id: &str, dir: &Path) -> std::io::Result<ReplayBackend> {
        let mut completions = BTreeMap::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let text = std::fs::read_to_string(&path)?;
            let t: Transcript = serde_json::from_str(&text)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            completions.insert(t.chunk_id, t.completion);
        }
        Ok(ReplayBackend::new(model_id, completions))
    }
}

impl ModelBackend for ReplayBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn max_output_tokens(&self) -> usize {
        self.max_output_tokens
    }

    fn context_window(&self) -> usize {
        self.context_window
    }

    fn invoke(&self, prompt: &RemediationPrompt) -> Result<String, BackendError> {
        self.completions
            .get(&prompt_chunk_id(prompt))
            .cloned()
            .ok_or_else(|| BackendError::MissingRecording(prompt_chunk_id(prompt)))
    }
}

fn prompt_chunk_id(prompt: &RemediationPrompt) -> ChunkId {
    prompt.chunk_id.clone()
}

/// One backend entry in the models config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendSpec {
    pub id: String,
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub auth_env: Option<String>,
    pub max_output_tokens: usize,
    pub context_window: usize,
    /// Minimum spacing between requests, shared across all users of this
    /// backend (simple rate limiting). 0 disables pacing.
    #[serde(default)]
    pub min_request_interval_ms: u64,
}

/// Generic chat-completion client; works against any provider speaking the
/// `messages` wire shape. Temperature is pinned to 0.0 and not configurable.
#[derive(Debug)]
pub struct HttpBackend {
    spec: BackendSpec,
    endpoint: String,
    next_allowed: std::sync::Mutex<std::time::Instant>,
}

impl HttpBackend {
    pub fn new(spec: BackendSpec) -> Result<HttpBackend, BackendError> {
        let endpoint = spec
            .endpoint
            .clone()
            .ok_or_else(|| BackendError::Config(format!("model {} has no endpoint", spec.id)))?;
        Ok(HttpBackend {
            spec,
            endpoint,
            next_allowed: std::sync::Mutex::new(std::time::Instant::now()),
        })
    }

    fn pace(&self) {
        if self.spec.min_request_interval_ms == 0 {
            return;
        }
        let interval = std::time::Duration::from_millis(self.spec.min_request_interval_ms);
        let wait = {
            let mut slot = self.next_allowed.lock().expect("pacing lock");
            let now = std::time::Instant::now();
            let wait = slot.saturating_duration_since(now);
            *slot = now.max(*slot) + interval;
            wait
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    max_tokens: usize,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: String,
}

impl ModelBackend for HttpBackend {
    fn model_id(&self) -> &str {
        &self.spec.id
    }

    fn max_output_tokens(&self) -> usize {
        self.spec.max_output_tokens
    }

    fn context_window(&self) -> usize {
        self.spec.context_window
    }

    fn invoke(&self, prompt: &RemediationPrompt) -> Result<String, BackendError> {
        self.pace();
        let body = ChatRequest {
            model: &self.spec.id,
            messages: [ChatMessage {
                role: "user",
                content: &prompt.text,
            }],
            temperature: TEMPERATURE,
            max_tokens: self.spec.max_output_tokens,
        };
        let mut request = ureq::post(&self.endpoint);
        if let Some(var) = &self.spec.auth_env {
            let token = std::env::var(var)
                .map_err(|_| BackendError::Config(format!("auth env var {var} is not set")))?;
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = request
            .send_json(serde_json::to_value(&body).expect("request serialization"))
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let parsed: ChatResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| BackendError::Transport("response had no choices".into()))
    }
}
