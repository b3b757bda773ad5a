use std::collections::HashMap;
use std::time::Duration;

use async_trait::async_trait;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::{CompletionProvider, CompletionRequest, ProviderError, RawCompletion};
use crate::policy::{estimate_tokens, PromptBundle};

/// One scripted outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptStep {
    Reply(String),
    /// Transient failure, optionally advertising a retry-after delay.
    Unavailable {
        retry_after_ms: Option<u64>,
    },
    /// Permanent refusal with the given status code.
    Rejected(u16),
}

impl From<&str> for ScriptStep {
    fn from(text: &str) -> Self {
        ScriptStep::Reply(text.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct MockCall {
    pub conversation: String,
    pub bundle: PromptBundle,
}

/// Replays a fixed script, independently for every conversation.
///
/// Token counts are `ceil(chars / 4)` of the rendered prompt and of the reply.
#[derive(Debug)]
pub struct MockProvider {
    script: Vec<ScriptStep>,
    cycle: bool,
    cursors: Mutex<HashMap<String, usize>>,
    calls: Mutex<Vec<MockCall>>,
}

impl MockProvider {
    pub fn new(script: Vec<ScriptStep>) -> Result<Self, ProviderError> {
        if script.is_empty() {
            return Err(ProviderError::EmptyScript);
        }
        Ok(Self {
            script,
            cycle: false,
            cursors: Mutex::new(HashMap::new()),
            calls: Mutex::new(Vec::new()),
        })
    }

    pub fn replies<I, T>(replies: I) -> Result<Self, ProviderError>
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        Self::new(replies.into_iter().map(|r| ScriptStep::Reply(r.into())).collect())
    }

    /// Restart the script instead of failing with `ScriptExhausted`.
    pub fn cycling(mut self) -> Self {
        self.cycle = true;
        self
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().len()
    }

    pub fn calls(&self) -> Vec<MockCall> {
        self.calls.lock().clone()
    }

    fn next_step(&self, conversation: &str) -> Option<ScriptStep> {
        let mut cursors = self.cursors.lock();
        let cursor = cursors.entry(conversation.to_string()).or_insert(0);
        let index = if self.cycle {
            *cursor % self.script.len()
        } else {
            *cursor
        };
        let step = self.script.get(index).cloned();
        *cursor += 1;
        step
    }
}

#[async_trait]
impl CompletionProvider for MockProvider {
    fn id(&self) -> &str {
        "mock"
    }

    async fn send(&self, request: CompletionRequest<'_>) -> Result<RawCompletion, ProviderError> {
        self.calls.lock().push(MockCall {
            conversation: request.conversation.to_string(),
            bundle: request.bundle.clone(),
        });
        let step = self
            .next_step(request.conversation)
            .ok_or_else(|| ProviderError::ScriptExhausted(request.conversation.to_string()))?;
        match step {
            ScriptStep::Reply(text) => Ok(RawCompletion {
                prompt_tokens: estimate_tokens(&request.bundle.render()),
                completion_tokens: estimate_tokens(&text),
                text,
            }),
            ScriptStep::Unavailable { retry_after_ms } => Err(ProviderError::Unavailable {
                message: "scripted outage".into(),
                attempts: 1,
                retry_after: retry_after_ms.map(Duration::from_millis),
            }),
            ScriptStep::Rejected(status) => Err(ProviderError::Rejected {
                status,
                message: "scripted rejection".into(),
            }),
        }
    }
}
