//! Append-only interaction log with token and cost accounting.
//!
//! Interaction records go to `interactions-YYYY-MM-DD.jsonl`; operational
//! events (config changes, provider retries, provider failures) go to
//! `events-YYYY-MM-DD.jsonl` in the same directory. Files rotate on the UTC
//! date of each record.

mod cost;
mod sink;

pub use cost::{compute_cost, Cost, Price, Pricing};
pub use sink::{FsyncPolicy, SinkConfig, TelemetrySink};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::{AwarenessLevel, LeakAction};
use crate::retrieval::ScopeVerdict;

pub const INTERACTIONS_PREFIX: &str = "interactions";
pub const EVENTS_PREFIX: &str = "events";

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("telemetry sink unavailable: {0}")]
    SinkUnavailable(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub interaction_id: String,
    pub timestamp: DateTime<Utc>,
    pub thread_id: String,
    pub awareness: AwarenessLevel,
    pub task_id: Option<String>,
    /// The student's message as submitted.
    pub prompt_text: String,
    pub response_text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub cost: Cost,
    pub latency_ms: u64,
    pub scope_verdict: ScopeVerdict,
    pub leak_action: LeakAction,
    pub config_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventRecord {
    ConfigChanged {
        timestamp: DateTime<Utc>,
        config_version: u64,
        changed_fields: Vec<String>,
    },
    ProviderRetry {
        timestamp: DateTime<Utc>,
        thread_id: String,
        attempt: u32,
        error: String,
        backoff_ms: u64,
    },
    ProviderFailure {
        timestamp: DateTime<Utc>,
        thread_id: String,
        awareness: AwarenessLevel,
        error: String,
        attempts: u32,
        config_version: u64,
    },
}

impl EventRecord {
    pub fn timestamp(&self) -> DateTime<Utc> {
        match self {
            Self::ConfigChanged { timestamp, .. }
            | Self::ProviderRetry { timestamp, .. }
            | Self::ProviderFailure { timestamp, .. } => *timestamp,
        }
    }
}

pub fn log_file_name(prefix: &str, date: NaiveDate) -> String {
    format!("{prefix}-{}.jsonl", date.format("%Y-%m-%d"))
}
