//! Didactic policy: prompt assembly and hint escalation, plus the
//! no-complete-solutions guardrail.

mod guardrail;
mod hints;
mod prompt;

pub use guardrail::{
    detect_solution_leak, enforce_guardrail, redact, CodeBlock, GuardrailOutcome, LeakAction, LeakReport,
    DEFAULT_MAX_CODE_LINES, REDACTION_PLACEHOLDER,
};
pub use hints::{classify_solution_request, default_solution_keywords, HintState, MAX_HINT_LEVEL};
pub use prompt::{
    assemble_prompt, estimate_tokens, truncate_history, CharQuarterEstimator, ContextSection, CourseExcerpt,
    PromptBundle, PromptInputs, Role, SectionKind, SystemPromptTemplate, TokenEstimator, Turn, GROUNDING_INSTRUCTION,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("awareness `{awareness}` requires a {missing} but none was provided")]
    MissingContext {
        awareness: AwarenessLevel,
        missing: &'static str,
    },
    #[error("prompt needs {needed} tokens, budget is {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error("template uses unknown placeholder `{{{0}}}`")]
    UnknownPlaceholder(String),
}

/// Which live student context accompanies a prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AwarenessLevel {
    #[default]
    None,
    Task,
    Code,
    TaskAndCode,
}

impl AwarenessLevel {
    pub const ALL: [AwarenessLevel; 4] = [Self::None, Self::Task, Self::Code, Self::TaskAndCode];

    pub fn includes_task(self) -> bool {
        matches!(self, Self::Task | Self::TaskAndCode)
    }

    pub fn includes_code(self) -> bool {
        matches!(self, Self::Code | Self::TaskAndCode)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Task => "task",
            Self::Code => "code",
            Self::TaskAndCode => "task_and_code",
        }
    }
}

impl std::fmt::Display for AwarenessLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AwarenessLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown awareness level `{s}`"))
    }
}
