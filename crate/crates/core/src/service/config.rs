use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::policy::{default_solution_keywords, AwarenessLevel, DEFAULT_MAX_CODE_LINES};
use crate::provider::{ProviderConfig, RetryPolicy, ScriptStep};
use crate::retrieval::DEFAULT_SCOPE_THRESHOLD;
use crate::telemetry::{FsyncPolicy, Price, Pricing};

/// Settings that can change while the service runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuntimeConfig {
    pub default_awareness: AwarenessLevel,
    pub scope_threshold: f64,
    pub max_code_lines: usize,
    pub token_budget: u64,
    pub retrieval_k: usize,
    pub pricing: Pricing,
    pub solution_keywords: Vec<String>,
    pub system_prompt_version: String,
    pub course_name: String,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            default_awareness: AwarenessLevel::None,
            scope_threshold: DEFAULT_SCOPE_THRESHOLD,
            max_code_lines: DEFAULT_MAX_CODE_LINES,
            token_budget: 6000,
            retrieval_k: 4,
            pricing: Pricing::default(),
            solution_keywords: default_solution_keywords(),
            system_prompt_version: "v1".into(),
            course_name: "Introduction to Programming".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl RuntimeConfig {
    /// Checks every field; returns all violations at once.
    pub fn validate(&self, templates: &[&str]) -> Result<(), Vec<FieldError>> {
        let mut errors = Vec::new();
        if !(self.scope_threshold > 0.0 && self.scope_threshold <= 1.0) {
            errors.push(FieldError::new("scope_threshold", "must be in (0, 1]"));
        }
        if self.max_code_lines == 0 {
            errors.push(FieldError::new("max_code_lines", "must be a positive integer"));
        }
        if self.token_budget == 0 {
            errors.push(FieldError::new("token_budget", "must be a positive integer"));
        }
        if self.retrieval_k == 0 {
            errors.push(FieldError::new("retrieval_k", "must be a positive integer"));
        }
        if self.course_name.trim().is_empty() {
            errors.push(FieldError::new("course_name", "must not be empty"));
        }
        if !templates.contains(&self.system_prompt_version.as_str()) {
            errors.push(FieldError::new(
                "system_prompt_version",
                format!("unknown template version `{}`", self.system_prompt_version),
            ));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// Applies a partial JSON object on top of `self`. Returns the new
    /// config and the names of the fields that changed.
    pub fn patched(&self, patch: &Value, templates: &[&str]) -> Result<(Self, Vec<String>), Vec<FieldError>> {
        let Some(fields) = patch.as_object() else {
            return Err(vec![FieldError::new("", "patch must be a JSON object")]);
        };
        let mut next = self.clone();
        let mut errors = Vec::new();
        for (name, value) in fields {
            if let Err(message) = apply_field(&mut next, name, value) {
                errors.push(FieldError::new(name.clone(), message));
            }
        }
        if let Err(more) = next.validate(templates) {
            for e in more {
                if fields.contains_key(&e.field) && !errors.iter().any(|x| x.field == e.field) {
                    errors.push(e);
                }
            }
        }
        if !errors.is_empty() {
            return Err(errors);
        }
        let before = serde_json::to_value(self).unwrap_or_default();
        let after = serde_json::to_value(&next).unwrap_or_default();
        let changed = fields
            .keys()
            .filter(|k| before.get(k.as_str()) != after.get(k.as_str()))
            .cloned()
            .collect();
        Ok((next, changed))
    }
}

fn positive_int(value: &Value) -> Result<u64, String> {
    match value.as_u64() {
        Some(n) if n > 0 => Ok(n),
        _ => Err(format!("must be a positive integer, got {value}")),
    }
}

fn apply_field(config: &mut RuntimeConfig, name: &str, value: &Value) -> Result<(), String> {
    match name {
        "default_awareness" => {
            let s = value.as_str().ok_or("must be one of none|task|code|task_and_code")?;
            config.default_awareness = s.parse()?;
        }
        "scope_threshold" => {
            config.scope_threshold = value.as_f64().ok_or("must be a number")?;
        }
        "max_code_lines" => config.max_code_lines = positive_int(value)? as usize,
        "token_budget" => config.token_budget = positive_int(value)?,
        "retrieval_k" => config.retrieval_k = positive_int(value)? as usize,
        "pricing" => {
            let obj = value.as_object().ok_or("must be an object")?;
            for (key, price) in obj {
                let parsed = price
                    .as_f64()
                    .ok_or_else(|| format!("{key} must be a number"))
                    .and_then(Price::from_f64)
                    .map_err(|e| format!("{key}: {e}"))?;
                match key.as_str() {
                    "prompt_price_per_1m" => config.pricing.prompt_per_million = parsed,
                    "completion_price_per_1m" => config.pricing.completion_per_million = parsed,
                    other => return Err(format!("unknown pricing field `{other}`")),
                }
            }
        }
        "solution_keywords" => {
            let items = value.as_array().ok_or("must be an array of strings")?;
            config.solution_keywords = items
                .iter()
                .map(|v| v.as_str().map(str::to_string).ok_or("must be an array of strings"))
                .collect::<Result<_, _>>()?;
        }
        "system_prompt_version" => {
            config.system_prompt_version = value.as_str().ok_or("must be a string")?.to_string();
        }
        "course_name" => config.course_name = value.as_str().ok_or("must be a string")?.to_string(),
        _ => return Err("unknown field".into()),
    }
    Ok(())
}

/// Which completion backend to run.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderSettings {
    Http(ProviderConfig),
    Mock {
        script: Vec<ScriptStep>,
        #[serde(default)]
        cycle: bool,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingSettings {
    Offline,
    Http {
        #[serde(flatten)]
        provider: ProviderConfig,
        dimension: usize,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default)]
pub struct RetrySettings {
    pub max_retries: u32,
    pub base_backoff_ms: u64,
    pub deadline_ms: u64,
}

impl Default for RetrySettings {
    fn default() -> Self {
        let d = RetryPolicy::default();
        Self {
            max_retries: d.max_retries,
            base_backoff_ms: d.base_backoff.as_millis() as u64,
            deadline_ms: d.deadline.as_millis() as u64,
        }
    }
}

impl From<RetrySettings> for RetryPolicy {
    fn from(s: RetrySettings) -> Self {
        RetryPolicy {
            max_retries: s.max_retries,
            base_backoff: Duration::from_millis(s.base_backoff_ms),
            deadline: Duration::from_millis(s.deadline_ms),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct TemplateFile {
    pub version: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(default)]
pub struct TelemetrySettings {
    pub queue_capacity: Option<usize>,
    pub fsync: FsyncPolicy,
}

/// Contents of the `--config` file given to `tutor serve`.
#[derive(Debug, Clone, Deserialize)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default)]
    pub runtime: RuntimeConfig,
    pub provider: ProviderSettings,
    #[serde(default = "default_embedding")]
    pub embedding: EmbeddingSettings,
    #[serde(default)]
    pub retry: RetrySettings,
    #[serde(default = "default_request_timeout")]
    pub request_timeout_ms: u64,
    #[serde(default)]
    pub system_prompts: Vec<TemplateFile>,
    #[serde(default)]
    pub telemetry: TelemetrySettings,
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

fn default_embedding() -> EmbeddingSettings {
    EmbeddingSettings::Offline
}

fn default_request_timeout() -> u64 {
    30_000
}
