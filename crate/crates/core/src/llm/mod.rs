//! Client for a locally served instruction model speaking a chat-completion
//! JSON-over-HTTP protocol.
//!
//! [`ChatBackend`] abstracts a single upstream call. Backends:
//!
//! - [`HttpBackend`]: live server, `POST {base_url}/chat/completions`;
//! - [`ReplayBackend`]: answers from a transcript file keyed by request hash;
//! - [`RecordingBackend`]: wraps another backend and records a transcript;
//! - [`ScriptedBackend`] / [`FnBackend`]: in-process stubs.
//!
//! [`LlmClient::complete_json`] layers the retry policy on top: up to
//! `max_attempts` calls to the primary endpoint, then at most one call to the
//! fallback endpoint.

mod backend;
mod json;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use backend::{
    read_transcript, FnBackend, HttpBackend, RecordingBackend, ReplayBackend, ScriptStep, ScriptedBackend,
    TranscriptEntry, TranscriptPrompt,
};
pub use json::{extract_json, CallRecord, ExtractionError, JsonCallPolicy, JsonOutcome, LlmClient, CORRECTIVE_INSTRUCTION};

pub const ENV_URL: &str = "LTN_OFFER_LLM_URL";
pub const ENV_MODEL: &str = "LTN_OFFER_LLM_MODEL";
pub const ENV_FALLBACK_MODEL: &str = "LTN_OFFER_LLM_FALLBACK_MODEL";
pub const DEFAULT_MODEL: &str = "Qwen2.5-14B-Instruct";
pub const DEFAULT_FALLBACK_MODEL: &str = "Qwen2.5-32B-Instruct";
pub const DEFAULT_URL: &str = "http://127.0.0.1:8000/v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: HTTP {status}")]
    Status { status: u16 },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("no recorded response for request {hash}")]
    ReplayMiss { hash: String },
    #[error("script exhausted")]
    ScriptExhausted,
    #[error("invalid endpoint: {0}")]
    Endpoint(String),
    #[error("transcript error: {0}")]
    Transcript(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEndpoint {
    pub base_url: String,
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
}

fn default_max_tokens() -> u32 {
    1024
}

fn default_timeout() -> f64 {
    120.0
}

impl ModelEndpoint {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            timeout_secs: default_timeout(),
        }
    }

    /// Primary and fallback endpoints from `LTN_OFFER_LLM_*`, with defaults
    /// for anything unset.
    pub fn from_env() -> (Self, Self) {
        let url = std::env::var(ENV_URL).unwrap_or_else(|_| DEFAULT_URL.to_string());
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| DEFAULT_MODEL.to_string());
        let fallback =
            std::env::var(ENV_FALLBACK_MODEL).unwrap_or_else(|_| DEFAULT_FALLBACK_MODEL.to_string());
        (Self::new(url.clone(), model), Self::new(url, fallback))
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        let url = self.base_url.trim();
        let rest = url
            .strip_prefix("http://")
            .or_else(|| url.strip_prefix("https://"))
            .ok_or_else(|| LlmError::Endpoint(format!("base_url `{url}` must start with http:// or https://")))?;
        if rest.is_empty() || rest.starts_with('/') {
            return Err(LlmError::Endpoint(format!("base_url `{url}` has no host")));
        }
        if self.model_name.trim().is_empty() {
            return Err(LlmError::Endpoint("model_name is empty".into()));
        }
        if self.timeout_secs <= 0.0 || !self.timeout_secs.is_finite() {
            return Err(LlmError::Endpoint(format!("timeout {} must be positive", self.timeout_secs)));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(LlmError::Endpoint(format!("temperature {} must be >= 0", self.temperature)));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub system: String,
    pub user: String,
    pub seed: u64,
    /// 1-based attempt number within a `complete_json` call; bookkeeping only,
    /// not part of the request hash.
    #[serde(default)]
    pub attempt: u32,
}

impl CompletionRequest {
    pub fn new(system: impl Into<String>, user: impl Into<String>, seed: u64) -> Self {
        Self {
            system: system.into(),
            user: user.into(),
            seed,
            attempt: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub finish_reason: Option<String>,
    pub latency_ms: u64,
}

impl CompletionResponse {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            finish_reason: Some("stop".into()),
            latency_ms: 0,
        }
    }
}

/// Stable identifier of a request: SHA-256 over the model name, sampling
/// settings and prompt. The server URL is excluded so transcripts replay
/// against any host.
pub fn request_hash(endpoint: &ModelEndpoint, request: &CompletionRequest) -> String {
    let canonical = serde_json::json!({
        "model": endpoint.model_name,
        "temperature": endpoint.temperature,
        "max_tokens": endpoint.max_tokens,
        "system": request.system,
        "user": request.user,
        "seed": request.seed,
    });
    let digest = Sha256::digest(canonical.to_string().as_bytes());
    hex::encode(digest)
}

/// One upstream model call. Implementations never retry on their own.
pub trait ChatBackend: Send + Sync {
    fn complete(
        &self,
        endpoint: &ModelEndpoint,
        request: &CompletionRequest,
    ) -> Result<CompletionResponse, LlmError>;
}

pub fn complete(
    backend: &dyn ChatBackend,
    endpoint: &ModelEndpoint,
    request: &CompletionRequest,
) -> Result<CompletionResponse, LlmError> {
    backend.complete(endpoint, request)
}
