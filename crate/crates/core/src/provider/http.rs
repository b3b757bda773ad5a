use std::time::Duration;

use async_trait::async_trait;
use reqwest::header::RETRY_AFTER;
use reqwest::{Client, Response, StatusCode};
use serde::Deserialize;
use serde_json::json;

use super::{
    retry_with_policy, CompletionProvider, CompletionRequest, NoopObserver, ProviderConfig, ProviderError,
    RawCompletion, RetryPolicy,
};
use crate::kb::{Embedding, EmbeddingProvider, KbError};
use crate::scalar::Scalar;

/// Client for any chat-completions compatible endpoint.
#[derive(Debug, Clone)]
pub struct HttpChatProvider {
    client: Client,
    config: ProviderConfig,
}

impl HttpChatProvider {
    pub fn new(config: ProviderConfig, request_timeout: Duration) -> Result<Self, ProviderError> {
        Ok(Self {
            client: build_client(request_timeout)?,
            config,
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize, Default)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

#[async_trait]
impl CompletionProvider for HttpChatProvider {
    fn id(&self) -> &str {
        &self.config.model_name
    }

    async fn send(&self, request: CompletionRequest<'_>) -> Result<RawCompletion, ProviderError> {
        let body = json!({
            "model": self.config.model_name,
            "messages": request.bundle.to_chat_messages(),
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        });
        let response = post_json(&self.client, &self.config, &body).await?;
        let parsed: ChatResponse = response
            .json()
            .await
            .map_err(|e| ProviderError::unavailable(self.config.api_key.scrub(&e.to_string())))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .map(|t| self.config.api_key.scrub(&t))
            .ok_or_else(|| ProviderError::unavailable("response had no choices"))?;
        let usage = parsed.usage.unwrap_or_default();
        Ok(RawCompletion {
            text,
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
        })
    }
}

/// Client for an embeddings endpoint (`{"model", "input"}` to `data[0].embedding`).
/// Vectors are re-normalized locally.
#[derive(Debug, Clone)]
pub struct HttpEmbeddingProvider {
    client: Client,
    config: ProviderConfig,
    dimension: usize,
    retry: RetryPolicy,
}

impl HttpEmbeddingProvider {
    pub fn new(
        config: ProviderConfig,
        dimension: usize,
        retry: RetryPolicy,
        request_timeout: Duration,
    ) -> Result<Self, ProviderError> {
        Ok(Self {
            client: build_client(request_timeout)?,
            config,
            dimension,
            retry,
        })
    }

    async fn fetch(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        #[derive(Deserialize)]
        struct Data {
            embedding: Vec<f64>,
        }
        #[derive(Deserialize)]
        struct EmbeddingResponse {
            data: Vec<Data>,
        }
        let body = json!({ "model": self.config.model_name, "input": text });
        let response = post_json(&self.client, &self.config, &body).await?;
        let parsed: EmbeddingResponse = response
            .json()
            .await
            .map_err(|e| ProviderError::unavailable(self.config.api_key.scrub(&e.to_string())))?;
        parsed
            .data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| ProviderError::unavailable("response had no embedding"))
    }
}

#[async_trait]
impl<S: Scalar> EmbeddingProvider<S> for HttpEmbeddingProvider {
    fn id(&self) -> &str {
        &self.config.model_name
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    async fn embed(&self, text: &str) -> Result<Embedding<S>, KbError> {
        let (values, _) = retry_with_policy(&self.retry, &NoopObserver, |_| self.fetch(text)).await?;
        if values.len() != self.dimension {
            return Err(KbError::DimensionMismatch {
                expected: self.dimension,
                actual: values.len(),
            });
        }
        Embedding::normalized(values.into_iter().map(S::from_f64_lossy).collect()).ok_or(KbError::EmptyText)
    }
}

fn build_client(request_timeout: Duration) -> Result<Client, ProviderError> {
    Client::builder()
        .timeout(request_timeout)
        .build()
        .map_err(|e| ProviderError::unavailable(e.to_string()))
}

async fn post_json(
    client: &Client,
    config: &ProviderConfig,
    body: &serde_json::Value,
) -> Result<Response, ProviderError> {
    let mut request = client.post(&config.endpoint_url).json(body);
    if !config.api_key.is_empty() {
        request = request.bearer_auth(config.api_key.expose());
    }
    let response = request
        .send()
        .await
        .map_err(|e| ProviderError::unavailable(config.api_key.scrub(&e.to_string())))?;
    let status = response.status();
    if status.is_success() {
        return Ok(response);
    }
    let retry_after = response
        .headers()
        .get(RETRY_AFTER)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok())
        .map(Duration::from_secs);
    let detail = config.api_key.scrub(&response.text().await.unwrap_or_default());
    let detail: String = detail.chars().take(300).collect();
    if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
        Err(ProviderError::Unavailable {
            message: format!("HTTP {}: {detail}", status.as_u16()),
            attempts: 1,
            retry_after,
        })
    } else {
        Err(ProviderError::Rejected {
            status: status.as_u16(),
            message: detail,
        })
    }
}
