//! Chat-completion and embedding backends.
//!
//! [`CompletionProvider`] performs one raw attempt; [`complete`] layers the
//! retry/deadline policy on top. [`MockProvider`] replays a script so the
//! service can be exercised without a network.

mod http;
mod mock;
mod retry;

pub use http::{HttpChatProvider, HttpEmbeddingProvider};
pub use mock::{MockCall, MockProvider, ScriptStep};
pub use retry::{retry_with_policy, NoopObserver, RetryEvent, RetryObserver, RetryPolicy};

use std::fmt;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::PromptBundle;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProviderError {
    /// Transient failure; retried by [`complete`].
    #[error("provider unavailable after {attempts} attempt(s): {message}")]
    Unavailable {
        message: String,
        attempts: u32,
        retry_after: Option<Duration>,
    },
    /// The backend refused the request (bad key, oversized prompt, ...).
    #[error("provider rejected the request ({status}): {message}")]
    Rejected { status: u16, message: String },
    #[error("mock script exhausted for conversation `{0}`")]
    ScriptExhausted(String),
    #[error("mock script must not be empty")]
    EmptyScript,
}

impl ProviderError {
    pub fn unavailable(message: impl Into<String>) -> Self {
        Self::Unavailable {
            message: message.into(),
            attempts: 1,
            retry_after: None,
        }
    }

    pub fn is_transient(&self) -> bool {
        matches!(self, Self::Unavailable { .. })
    }
}

/// API key wrapper; never printed or serialized.
#[derive(Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(transparent)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Replaces any occurrence of the key in `text`.
    pub fn scrub(&self, text: &str) -> String {
        if self.0.is_empty() {
            text.to_string()
        } else {
            text.replace(&self.0, "***")
        }
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(***)")
    }
}

pub const API_KEY_ENV: &str = "TUTOR_API_KEY";

/// Remote model settings. Temperature and token limit are fixed per
/// deployment; requests cannot override them.
#[derive(Debug, Clone, Deserialize)]
pub struct ProviderConfig {
    pub endpoint_url: String,
    #[serde(default)]
    pub api_key: ApiKey,
    pub model_name: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_temperature() -> f64 {
    0.2
}

fn default_max_tokens() -> u32 {
    800
}

impl ProviderConfig {
    /// `TUTOR_API_KEY` wins over the key from the config file.
    pub fn with_env_key(mut self) -> Self {
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            if !key.is_empty() {
                self.api_key = ApiKey::new(key);
            }
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

/// One provider call: the bundle plus the conversation it belongs to.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub conversation: &'a str,
    pub bundle: &'a PromptBundle,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCompletion {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
    pub provider_id: String,
    pub attempts: u32,
}

#[async_trait]
pub trait CompletionProvider: Send + Sync {
    fn id(&self) -> &str;

    /// A single attempt, no retries.
    async fn send(&self, request: CompletionRequest<'_>) -> Result<RawCompletion, ProviderError>;
}

/// Sends `request`, retrying transient failures according to `policy`.
pub async fn complete(
    provider: &dyn CompletionProvider,
    request: CompletionRequest<'_>,
    policy: &RetryPolicy,
    observer: &dyn RetryObserver,
) -> Result<Completion, ProviderError> {
    let started = Instant::now();
    let (raw, attempts) = retry_with_policy(policy, observer, |_| provider.send(request)).await?;
    Ok(Completion {
        text: raw.text,
        prompt_tokens: raw.prompt_tokens,
        completion_tokens: raw.completion_tokens,
        latency_ms: started.elapsed().as_millis() as u64,
        provider_id: provider.id().to_string(),
        attempts,
    })
}
