use std::future::Future;
use std::time::Duration;

use tokio::time::{sleep, timeout, Instant};

use super::ProviderError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Backoff before retry `n` (1-based) is `base_backoff * 2^(n-1)`.
    pub base_backoff: Duration,
    /// Bound on the whole call including backoff.
    pub deadline: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 2,
            base_backoff: Duration::from_millis(500),
            deadline: Duration::from_secs(60),
        }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, retry: u32) -> Duration {
        self.base_backoff * 2u32.saturating_pow(retry.saturating_sub(1))
    }
}

/// A failed attempt that will be followed by another one.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryEvent {
    pub attempt: u32,
    pub error: String,
    pub backoff: Duration,
}

pub trait RetryObserver: Send + Sync {
    fn on_retry(&self, event: &RetryEvent);
}

pub struct NoopObserver;

impl RetryObserver for NoopObserver {
    fn on_retry(&self, _event: &RetryEvent) {}
}

impl<F: Fn(&RetryEvent) + Send + Sync> RetryObserver for F {
    fn on_retry(&self, event: &RetryEvent) {
        self(event)
    }
}

/// Runs `attempt` until it succeeds, fails permanently, runs out of retries
/// or the deadline passes. Returns the value and the number of attempts made.
pub async fn retry_with_policy<T, F, Fut>(
    policy: &RetryPolicy,
    observer: &dyn RetryObserver,
    mut attempt: F,
) -> Result<(T, u32), ProviderError>
where
    F: FnMut(u32) -> Fut,
    Fut: Future<Output = Result<T, ProviderError>>,
{
    let deadline = Instant::now() + policy.deadline;
    let mut attempts = 0u32;
    loop {
        attempts += 1;
        let remaining = deadline.saturating_duration_since(Instant::now());
        let outcome = match timeout(remaining, attempt(attempts)).await {
            Ok(outcome) => outcome,
            Err(_) => {
                return Err(ProviderError::Unavailable {
                    message: "deadline exceeded".into(),
                    attempts,
                    retry_after: None,
                })
            }
        };
        let err = match outcome {
            Ok(value) => return Ok((value, attempts)),
            Err(err) if !err.is_transient() => return Err(err),
            Err(err) => err,
        };
        let (message, retry_after) = match &err {
            ProviderError::Unavailable {
                message, retry_after, ..
            } => (message.clone(), *retry_after),
            _ => unreachable!("only transient errors reach here"),
        };
        let exhausted = || ProviderError::Unavailable {
            message: message.clone(),
            attempts,
            retry_after,
        };
        if attempts > policy.max_retries {
            return Err(exhausted());
        }
        let backoff = retry_after.unwrap_or_else(|| policy.backoff(attempts));
        if Instant::now() + backoff >= deadline {
            return Err(exhausted());
        }
        observer.on_retry(&RetryEvent {
            attempt: attempts,
            error: message.clone(),
            backoff,
        });
        sleep(backoff).await;
    }
}
