use serde::{Deserialize, Serialize};

use super::{AwarenessLevel, PolicyError, MAX_HINT_LEVEL};
use crate::provider::{ChatMessage, ChatRole};
use crate::service::TaskDescription;

/// Must appear verbatim in every system text.
pub const GROUNDING_INSTRUCTION: &str = "answer only from the provided course material; do not provide complete solutions; respond with hints and guiding questions";

const BUILTIN_TEMPLATE: &str = "You are a patient programming tutor for the course \"{course_name}\". \
Help students reach the solution on their own instead of handing it to them.\n\
Rules: answer only from the provided course material; do not provide complete solutions; respond with hints and guiding questions.\n\
If a question is not covered by the course material, say so and decline to answer it.\n\
Current hint level: {hint_level} of 3.";

const PLACEHOLDERS: [&str; 2] = ["hint_level", "course_name"];

/// Plain-text system prompt with `{hint_level}` and `{course_name}` slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemPromptTemplate {
    pub version: String,
    text: String,
}

impl SystemPromptTemplate {
    pub fn builtin() -> Self {
        Self {
            version: "v1".into(),
            text: BUILTIN_TEMPLATE.into(),
        }
    }

    pub fn parse(version: impl Into<String>, text: impl Into<String>) -> Result<Self, PolicyError> {
        let text = text.into();
        for name in placeholder_names(&text) {
            if !PLACEHOLDERS.contains(&name.as_str()) {
                return Err(PolicyError::UnknownPlaceholder(name));
            }
        }
        Ok(Self {
            version: version.into(),
            text,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn render(&self, hint_level: u8, course_name: &str) -> String {
        let mut out = self
            .text
            .replace("{hint_level}", &hint_level.to_string())
            .replace("{course_name}", course_name);
        if !self.text.contains("{hint_level}") {
            out.push_str(&format!("\nCurrent hint level: {hint_level} of {MAX_HINT_LEVEL}."));
        }
        if !out.contains(GROUNDING_INSTRUCTION) {
            out.push_str(&format!("\nRules: {GROUNDING_INSTRUCTION}."));
        }
        out
    }
}

fn placeholder_names(text: &str) -> Vec<String> {
    let mut names = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        rest = &rest[open + 1..];
        if let Some(close) = rest.find('}') {
            let candidate = &rest[..close];
            if !candidate.is_empty() && candidate.chars().all(|c| c.is_ascii_lowercase() || c == '_') {
                names.push(candidate.to_string());
            }
        }
    }
    names
}

fn hint_guidance(level: u8) -> &'static str {
    match level {
        0 | 1 => "Give a short conceptual hint or a guiding question. Do not show code for the task.",
        2 => "The student has asked for the solution again. Give a more specific hint that names the relevant construct; a tiny illustrative snippet unrelated to the task is fine.",
        _ => "The student keeps asking for the solution. Outline the approach step by step in prose or pseudocode and ask them to write each step, still without the complete code.",
    }
}

pub trait TokenEstimator: Send + Sync {
    fn estimate(&self, text: &str) -> u64;
}

/// `ceil(chars / 4)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CharQuarterEstimator;

impl TokenEstimator for CharQuarterEstimator {
    fn estimate(&self, text: &str) -> u64 {
        estimate_tokens(text)
    }
}

pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Student,
    Tutor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    CourseMaterial,
    Task,
    Code,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSection {
    pub kind: SectionKind,
    pub label: String,
    pub text: String,
}

/// A retrieved passage handed to prompt assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct CourseExcerpt {
    pub label: String,
    pub text: String,
}

/// Fully assembled provider request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub context_sections: Vec<ContextSection>,
    pub history: Vec<Turn>,
    pub user_message: String,
    pub token_estimate: u64,
}

pub(crate) const HEADER_SYSTEM: &str = "### SYSTEM";
pub(crate) const HEADER_STUDENT_MESSAGE: &str = "### STUDENT MESSAGE";

fn section_header(section: &ContextSection) -> String {
    match section.kind {
        SectionKind::CourseMaterial => format!("### COURSE MATERIAL [{}]", section.label),
        SectionKind::Task => format!("### TASK [{}]", section.label),
        SectionKind::Code => "### CURRENT CODE".to_string(),
    }
}

fn history_header(role: Role) -> &'static str {
    match role {
        Role::Student => "### HISTORY STUDENT",
        Role::Tutor => "### HISTORY TUTOR",
    }
}

impl PromptBundle {
    /// Canonical text form, sections in fixed order, each introduced by a
    /// `### ` header line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut block = |header: &str, body: &str| {
            out.push_str(header);
            out.push('\n');
            out.push_str(body);
            out.push_str("\n\n");
        };
        block(HEADER_SYSTEM, &self.system_text);
        for section in &self.context_sections {
            block(&section_header(section), &section.text);
        }
        for turn in &self.history {
            block(history_header(turn.role), &turn.text);
        }
        block(HEADER_STUDENT_MESSAGE, &self.user_message);
        out
    }

    /// Chat-completions message list: one system message carrying the
    /// policy and context sections, the history, then the student message.
    pub fn to_chat_messages(&self) -> Vec<ChatMessage> {
        let mut system = self.system_text.clone();
        for section in &self.context_sections {
            system.push_str("\n\n");
            system.push_str(&section_header(section));
            system.push('\n');
            system.push_str(&section.text);
        }
        let mut messages = vec![ChatMessage {
            role: ChatRole::System,
            content: system,
        }];
        messages.extend(self.history.iter().map(|t| ChatMessage {
            role: match t.role {
                Role::Student => ChatRole::User,
                Role::Tutor => ChatRole::Assistant,
            },
            content: t.text.clone(),
        }));
        messages.push(ChatMessage {
            role: ChatRole::User,
            content: self.user_message.clone(),
        });
        messages
    }
}

/// Keeps the longest suffix of `history` whose estimate fits `budget`.
pub fn truncate_history(history: &[Turn], budget: u64, estimator: &dyn TokenEstimator) -> Vec<Turn> {
    let mut used = 0u64;
    let mut keep_from = history.len();
    for (i, turn) in history.iter().enumerate().rev() {
        let cost = estimator.estimate(&turn.text);
        if used + cost > budget {
            break;
        }
        used += cost;
        keep_from = i;
    }
    history[keep_from..].to_vec()
}

pub struct PromptInputs<'a> {
    pub history: &'a [Turn],
    pub hint_level: u8,
    pub user_message: &'a str,
    pub awareness: AwarenessLevel,
    pub task: Option<&'a TaskDescription>,
    pub code: Option<&'a str>,
    pub excerpts: &'a [CourseExcerpt],
    pub template: &'a SystemPromptTemplate,
    pub course_name: &'a str,
    pub token_budget: u64,
}

/// Builds the provider request for one student message.
///
/// Context order is retrieved excerpts, then the task (if the awareness level
/// includes it), then the code snapshot (likewise). When the fixed parts
/// overrun the budget the lowest-ranked excerpts are dropped first; history
/// gets whatever budget remains.
pub fn assemble_prompt(inputs: &PromptInputs<'_>, estimator: &dyn TokenEstimator) -> Result<PromptBundle, PolicyError> {
    let awareness = inputs.awareness;
    let task = if awareness.includes_task() {
        Some(inputs.task.ok_or(PolicyError::MissingContext {
            awareness,
            missing: "task description",
        })?)
    } else {
        None
    };
    let code = if awareness.includes_code() {
        match inputs.code {
            Some(code) if !code.trim().is_empty() => Some(code),
            _ => {
                return Err(PolicyError::MissingContext {
                    awareness,
                    missing: "code snapshot",
                })
            }
        }
    } else {
        None
    };

    let system_text = format!(
        "{}\n{}",
        inputs.template.render(inputs.hint_level, inputs.course_name),
        hint_guidance(inputs.hint_level)
    );
    let mut live_context = Vec::new();
    if let Some(task) = task {
        live_context.push(ContextSection {
            kind: SectionKind::Task,
            label: format!("{}: {}", task.task_id, task.title),
            text: task.statement.clone(),
        });
    }
    if let Some(code) = code {
        live_context.push(ContextSection {
            kind: SectionKind::Code,
            label: "current code".into(),
            text: code.to_string(),
        });
    }

    let section_cost = |s: &ContextSection| estimator.estimate(&s.label) + estimator.estimate(&s.text);
    let fixed_cost = estimator.estimate(&system_text)
        + estimator.estimate(inputs.user_message)
        + live_context.iter().map(section_cost).sum::<u64>();
    let mut excerpts: Vec<ContextSection> = inputs
        .excerpts
        .iter()
        .map(|e| ContextSection {
            kind: SectionKind::CourseMaterial,
            label: e.label.clone(),
            text: e.text.clone(),
        })
        .collect();
    let mut excerpt_cost: u64 = excerpts.iter().map(section_cost).sum();
    while fixed_cost + excerpt_cost > inputs.token_budget {
        match excerpts.pop() {
            Some(dropped) => excerpt_cost -= section_cost(&dropped),
            None => {
                return Err(PolicyError::BudgetExceeded {
                    needed: fixed_cost,
                    budget: inputs.token_budget,
                })
            }
        }
    }

    let history_budget = inputs.token_budget - fixed_cost - excerpt_cost;
    let history = truncate_history(inputs.history, history_budget, estimator);
    let history_cost: u64 = history.iter().map(|t| estimator.estimate(&t.text)).sum();

    let mut context_sections = excerpts;
    context_sections.extend(live_context);
    Ok(PromptBundle {
        system_text,
        context_sections,
        history,
        user_message: inputs.user_message.to_string(),
        token_estimate: fixed_cost + excerpt_cost + history_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn task() -> TaskDescription {
        TaskDescription {
            task_id: "functions-1".into(),
            title: "Write a greeting function".into(),
            statement: "Define greet(name) returning a greeting.".into(),
            topic: "functions".into(),
        }
    }

    fn turns(n: usize, chars: usize) -> Vec<Turn> {
        (0..n)
            .map(|i| Turn {
                role: if i % 2 == 0 { Role::Student } else { Role::Tutor },
                text: format!("{i:0>width$}", width = chars),
            })
            .collect()
    }

    fn inputs<'a>(
        awareness: AwarenessLevel,
        task: Option<&'a TaskDescription>,
        code: Option<&'a str>,
        excerpts: &'a [CourseExcerpt],
        template: &'a SystemPromptTemplate,
    ) -> PromptInputs<'a> {
        PromptInputs {
            history: &[],
            hint_level: 1,
            user_message: "How do I start?",
            awareness,
            task,
            code,
            excerpts,
            template,
            course_name: "Intro to Python",
            token_budget: 4000,
        }
    }

    fn excerpts() -> Vec<CourseExcerpt> {
        vec![CourseExcerpt {
            label: "loops#0000".into(),
            text: "A for loop repeats a block for each item.".into(),
        }]
    }

    #[test]
    fn token_estimate_is_quarter_chars() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abc"), 1);
        assert_eq!(estimate_tokens(&"x".repeat(20)), 5);
        assert_eq!(estimate_tokens(&"x".repeat(21)), 6);
    }

    #[test]
    fn history_truncation_examples() {
        let est = CharQuarterEstimator;
        let h = turns(10, 400);
        assert_eq!(truncate_history(&h, 10_000, &est), h);
        assert!(truncate_history(&h, 0, &est).is_empty());
        assert_eq!(truncate_history(&h, 350, &est), h[7..].to_vec());
    }

    #[test]
    fn none_awareness_has_only_excerpts() {
        let t = task();
        let ex = excerpts();
        let tpl = SystemPromptTemplate::builtin();
        let b = assemble_prompt(
            &inputs(AwarenessLevel::None, Some(&t), Some("x = 1"), &ex, &tpl),
            &CharQuarterEstimator,
        )
        .unwrap();
        assert_eq!(b.context_sections.len(), 1);
        assert_eq!(b.context_sections[0].kind, SectionKind::CourseMaterial);
        assert!(!b.render().contains("greet(name)"));
    }

    #[test]
    fn task_and_code_order() {
        let t = task();
        let ex = excerpts();
        let tpl = SystemPromptTemplate::builtin();
        let b = assemble_prompt(
            &inputs(AwarenessLevel::TaskAndCode, Some(&t), Some("x = 1"), &ex, &tpl),
            &CharQuarterEstimator,
        )
        .unwrap();
        let kinds: Vec<_> = b.context_sections.iter().map(|s| s.kind).collect();
        assert_eq!(
            kinds,
            [SectionKind::CourseMaterial, SectionKind::Task, SectionKind::Code]
        );
    }

    #[test]
    fn missing_code_is_an_error() {
        let ex = excerpts();
        let tpl = SystemPromptTemplate::builtin();
        for code in [None, Some("   ")] {
            let err = assemble_prompt(
                &inputs(AwarenessLevel::Code, None, code, &ex, &tpl),
                &CharQuarterEstimator,
            )
            .unwrap_err();
            assert!(matches!(
                err,
                PolicyError::MissingContext {
                    missing: "code snapshot",
                    ..
                }
            ));
        }
    }

    #[test]
    fn system_text_carries_rules_and_level() {
        let ex = excerpts();
        let tpl = SystemPromptTemplate::builtin();
        let mut i = inputs(AwarenessLevel::None, None, None, &ex, &tpl);
        i.hint_level = 3;
        let b = assemble_prompt(&i, &CharQuarterEstimator).unwrap();
        assert!(b.system_text.contains(GROUNDING_INSTRUCTION));
        assert!(b.system_text.contains("Current hint level: 3 of 3."));
        assert!(b.system_text.contains("Intro to Python"));
    }

    #[test]
    fn custom_template_gets_rules_appended() {
        let tpl = SystemPromptTemplate::parse("v2", "Tutor for {course_name}.").unwrap();
        let text = tpl.render(2, "CS1");
        assert!(text.starts_with("Tutor for CS1."));
        assert!(text.contains("Current hint level: 2 of 3."));
        assert!(text.contains(GROUNDING_INSTRUCTION));
        assert_eq!(
            SystemPromptTemplate::parse("v3", "Hi {student}").unwrap_err(),
            PolicyError::UnknownPlaceholder("student".into())
        );
        assert!(SystemPromptTemplate::parse("v4", "dict literal {} and { spaced }").is_ok());
    }

    #[test]
    fn excerpts_dropped_before_failing() {
        let tpl = SystemPromptTemplate::builtin();
        let ex = vec![
            CourseExcerpt {
                label: "a".into(),
                text: "a".repeat(400),
            },
            CourseExcerpt {
                label: "b".into(),
                text: "b".repeat(4000),
            },
        ];
        let mut i = inputs(AwarenessLevel::None, None, None, &ex, &tpl);
        i.token_budget = 400;
        let b = assemble_prompt(&i, &CharQuarterEstimator).unwrap();
        assert_eq!(b.context_sections.len(), 1);
        assert!(b.token_estimate <= 400);
        i.token_budget = 10;
        assert!(matches!(
            assemble_prompt(&i, &CharQuarterEstimator),
            Err(PolicyError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn chat_messages_layout() {
        let ex = excerpts();
        let tpl = SystemPromptTemplate::builtin();
        let history = turns(2, 8);
        let mut i = inputs(AwarenessLevel::None, None, None, &ex, &tpl);
        i.history = &history;
        let msgs = assemble_prompt(&i, &CharQuarterEstimator).unwrap().to_chat_messages();
        let roles: Vec<_> = msgs.iter().map(|m| m.role).collect();
        assert_eq!(
            roles,
            [ChatRole::System, ChatRole::User, ChatRole::Assistant, ChatRole::User]
        );
        assert!(msgs[0].content.contains("A for loop repeats"));
        assert_eq!(msgs[3].content, "How do I start?");
    }

    proptest! {
        #[test]
        fn truncation_is_a_fitting_suffix(
            lens in prop::collection::vec(0usize..200, 0..30),
            budget in 0u64..600,
        ) {
            let history: Vec<Turn> = lens.iter().map(|&n| Turn { role: Role::Student, text: "y".repeat(n) }).collect();
            let est = CharQuarterEstimator;
            let kept = truncate_history(&history, budget, &est);
            prop_assert!(history.ends_with(&kept));
            prop_assert!(kept.iter().map(|t| est.estimate(&t.text)).sum::<u64>() <= budget);
            // Maximal: adding the next older turn would overflow.
            if kept.len() < history.len() {
                let next = &history[history.len() - kept.len() - 1];
                let used: u64 = kept.iter().map(|t| est.estimate(&t.text)).sum();
                prop_assert!(used + est.estimate(&next.text) > budget);
            }
        }
    }
}
