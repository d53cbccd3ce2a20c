//! Pluggable chat-completion backends.
//!
//! The pipeline talks to a [`ChatBackend`]: a live OpenAI-compatible HTTP
//! client ([`HttpBackend`]), a deterministic knowledge-base mock for offline
//! runs ([`MockBackend`]), or either wrapped in a replay cache
//! ([`CachedBackend`]). All backends are safe to call from many tasks at once.

mod cache;
mod extract;
mod http;
mod mock;

pub use cache::{cache_key, CachedBackend, ResponseCache};
pub use extract::extract_json_array;
pub use http::HttpBackend;
pub use mock::{MockBackend, MockKnowledgeBase};

use std::path::PathBuf;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A single chat-completion request: one system message plus one user message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub model_id: String,
    /// Sampling temperature. Fixed at 1.0 for all standard configurations.
    pub temperature: f64,
    /// Distinguishes deliberate re-prompts of an otherwise identical request.
    /// Participates in the cache key, so a re-prompt never replays the
    /// response it is trying to move past, while reruns stay replayable.
    pub nonce: u32,
}

impl ChatRequest {
    pub fn new(system_prompt: String, user_prompt: String, model_id: impl Into<String>) -> Self {
        ChatRequest {
            system_prompt,
            user_prompt,
            model_id: model_id.into(),
            temperature: 1.0,
            nonce: 0,
        }
    }

    /// The same request with a bumped nonce, used for the single re-prompt
    /// allowed after unparseable output.
    pub fn reprompt(&self) -> Self {
        let mut req = self.clone();
        req.nonce += 1;
        req
    }
}

/// A backend response: the verbatim model payload, unnormalized.
#[derive(Debug, Clone)]
pub struct ChatResponse {
    pub text: String,
    /// Backend-reported latency. Zero for mock responses and cache hits, so
    /// cached reruns serialize identically.
    pub latency: Duration,
    pub from_cache: bool,
}

/// Configuration for the live HTTP backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub base_url: String,
    /// Name of the environment variable holding the API key. The key itself
    /// never appears in config files or flags.
    pub api_key_env: String,
    pub model_id: String,
    #[serde(with = "duration_secs")]
    pub timeout: Duration,
    pub max_retries: u32,
    pub cache_path: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            base_url: "https://api.openai.com/v1".to_string(),
            api_key_env: "OPENAI_API_KEY".to_string(),
            model_id: "gpt-4.1-mini".to_string(),
            timeout: Duration::from_secs(60),
            max_retries: 2,
            cache_path: None,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.timeout.is_zero() {
            return Err(BackendError::InvalidConfig("timeout must be > 0".into()));
        }
        if self.base_url.trim().is_empty() {
            return Err(BackendError::InvalidConfig(
                "base_url must be non-empty".into(),
            ));
        }
        Ok(())
    }
}

mod duration_secs {
    use super::Duration;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Ok(Duration::from_secs_f64(secs))
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("environment variable {0} is not set (expected to hold the API key)")]
    MissingApiKey(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed completion payload: {0}")]
    BadPayload(String),
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error("cache I/O error at {path}: {source}")]
    Cache {
        path: String,
        source: std::io::Error,
    },
    #[error("mock knowledge base: {0}")]
    MockKb(String),
}

/// A chat-completion backend. Implementations must tolerate concurrent
/// in-flight requests.
#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn send_chat(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

#[async_trait]
impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    async fn send_chat(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).send_chat(req).await
    }
}
