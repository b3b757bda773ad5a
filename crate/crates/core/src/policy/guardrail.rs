use serde::{Deserialize, Serialize};

use super::PromptBundle;
use crate::provider::{
    complete, Completion, CompletionProvider, CompletionRequest, ProviderError, RetryObserver, RetryPolicy,
};

pub const DEFAULT_MAX_CODE_LINES: usize = 8;
pub const REDACTION_PLACEHOLDER: &str = "[code withheld: try building this step yourself, then ask for a hint]";

/// A code block in a response. Line numbers are 1-based and inclusive and
/// cover the fences of a fenced block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeBlock {
    pub start_line: usize,
    pub end_line: usize,
    pub line_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakAction {
    #[default]
    None,
    Regenerated,
    Redacted,
}

impl LeakAction {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Regenerated => "regenerated",
            Self::Redacted => "redacted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LeakReport {
    pub leaked: bool,
    pub offending_blocks: Vec<CodeBlock>,
    pub action_taken: LeakAction,
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

fn is_indented(line: &str) -> bool {
    line.starts_with("    ") || line.starts_with('\t')
}

fn is_blank(line: &str) -> bool {
    line.trim().is_empty()
}

/// Finds fenced (```) blocks and indented code runs. An indented run must
/// start after a blank line or at the top of the text; an unclosed fence
/// extends to the end.
fn code_blocks(lines: &[&str]) -> Vec<CodeBlock> {
    let mut blocks = Vec::new();
    let mut i = 0;
    let mut after_blank = true;
    while i < lines.len() {
        let line = lines[i];
        if is_fence(line) {
            let close = (i + 1..lines.len()).find(|&j| is_fence(lines[j]));
            let content_end = close.unwrap_or(lines.len());
            blocks.push(CodeBlock {
                start_line: i + 1,
                end_line: close.map_or(lines.len(), |c| c + 1),
                line_count: lines[i + 1..content_end].iter().filter(|l| !is_blank(l)).count(),
            });
            i = close.map_or(lines.len(), |c| c + 1);
            after_blank = false;
            continue;
        }
        if after_blank && is_indented(line) && !is_blank(line) {
            let mut last_code = i;
            let mut j = i;
            while j < lines.len() && (is_indented(lines[j]) || is_blank(lines[j])) {
                if !is_blank(lines[j]) {
                    last_code = j;
                }
                j += 1;
            }
            blocks.push(CodeBlock {
                start_line: i + 1,
                end_line: last_code + 1,
                line_count: lines[i..=last_code].iter().filter(|l| !is_blank(l)).count(),
            });
            i = last_code + 1;
            after_blank = false;
            continue;
        }
        after_blank = is_blank(line);
        i += 1;
    }
    blocks
}

/// Flags every code block with more than `max_code_lines` non-blank lines.
pub fn detect_solution_leak(response_text: &str, max_code_lines: usize) -> LeakReport {
    let lines: Vec<&str> = response_text.lines().collect();
    let offending: Vec<CodeBlock> = code_blocks(&lines)
        .into_iter()
        .filter(|b| b.line_count > max_code_lines)
        .collect();
    LeakReport {
        leaked: !offending.is_empty(),
        offending_blocks: offending,
        action_taken: LeakAction::None,
    }
}

/// Replaces each block's lines with the placeholder.
pub fn redact(text: &str, blocks: &[CodeBlock]) -> String {
    let lines: Vec<&str> = text.lines().collect();
    let mut out: Vec<&str> = Vec::with_capacity(lines.len());
    let mut i = 0;
    for block in blocks {
        let start = block.start_line - 1;
        if start < i || start >= lines.len() {
            continue;
        }
        out.extend_from_slice(&lines[i..start]);
        out.push(REDACTION_PLACEHOLDER);
        i = block.end_line.min(lines.len());
    }
    out.extend_from_slice(&lines[i..]);
    let mut joined = out.join("\n");
    if text.ends_with('\n') {
        joined.push('\n');
    }
    joined
}

#[derive(Debug, Clone)]
pub struct GuardrailOutcome {
    pub text: String,
    pub report: LeakReport,
    /// The extra provider call made to regenerate, if any.
    pub regeneration: Option<Completion>,
}

fn reminder(max_code_lines: usize) -> String {
    format!(
        "\n\nReminder: your previous answer contained a complete code solution. \
Do not include any code block longer than {max_code_lines} lines. \
Explain the idea, point to the relevant course material and ask a guiding question instead."
    )
}

/// Passes clean responses through. A leaking response triggers one
/// regeneration with a reminder appended to the system text; if that still
/// leaks, its offending blocks are redacted.
pub async fn enforce_guardrail(
    response_text: &str,
    leak: LeakReport,
    provider: &dyn CompletionProvider,
    request: CompletionRequest<'_>,
    max_code_lines: usize,
    retry: &RetryPolicy,
    observer: &dyn RetryObserver,
) -> Result<GuardrailOutcome, ProviderError> {
    if !leak.leaked {
        return Ok(GuardrailOutcome {
            text: response_text.to_string(),
            report: LeakReport {
                action_taken: LeakAction::None,
                ..leak
            },
            regeneration: None,
        });
    }
    let mut bundle: PromptBundle = request.bundle.clone();
    bundle.system_text.push_str(&reminder(max_code_lines));
    let retry_request = CompletionRequest {
        conversation: request.conversation,
        bundle: &bundle,
    };
    let second = complete(provider, retry_request, retry, observer).await?;
    let second_leak = detect_solution_leak(&second.text, max_code_lines);
    if !second_leak.leaked {
        return Ok(GuardrailOutcome {
            text: second.text.clone(),
            report: LeakReport {
                action_taken: LeakAction::Regenerated,
                ..leak
            },
            regeneration: Some(second),
        });
    }
    Ok(GuardrailOutcome {
        text: redact(&second.text, &second_leak.offending_blocks),
        report: LeakReport {
            action_taken: LeakAction::Redacted,
            ..second_leak
        },
        regeneration: Some(second),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{MockProvider, NoopObserver};
    use proptest::prelude::*;

    fn fenced(n: usize) -> String {
        let body: Vec<String> = (0..n).map(|i| format!("x{i} = {i}")).collect();
        format!("```python\n{}\n```", body.join("\n"))
    }

    #[test]
    fn prose_is_clean() {
        let r = detect_solution_leak("Think about what a loop does.\nWhat changes each time?", 8);
        assert!(!r.leaked);
        assert!(r.offending_blocks.is_empty());
    }

    #[test]
    fn twelve_line_block_leaks() {
        let text = format!("Here you go:\n{}\nDone.", fenced(12));
        let r = detect_solution_leak(&text, 8);
        assert!(r.leaked);
        assert_eq!(
            r.offending_blocks,
            [CodeBlock {
                start_line: 2,
                end_line: 15,
                line_count: 12
            }]
        );
    }

    #[test]
    fn blocks_are_judged_separately() {
        let text = format!("{}\nand\n{}", fenced(5), fenced(6));
        assert!(!detect_solution_leak(&text, 8).leaked);
    }

    #[test]
    fn blank_lines_do_not_count() {
        let text = "```\na\n\n\nb\n```";
        assert!(!detect_solution_leak(text, 2).leaked);
        assert!(detect_solution_leak(text, 1).leaked);
    }

    #[test]
    fn indented_code_is_detected() {
        let code: Vec<String> = (0..10).map(|i| format!("    line_{i}()")).collect();
        let text = format!("Try this:\n\n{}\n\nOk?", code.join("\n"));
        let r = detect_solution_leak(&text, 8);
        assert_eq!(
            r.offending_blocks,
            [CodeBlock {
                start_line: 3,
                end_line: 12,
                line_count: 10
            }]
        );
    }

    #[test]
    fn unclosed_fence_runs_to_end() {
        let text = format!("```\n{}", (0..9).map(|i| i.to_string()).collect::<Vec<_>>().join("\n"));
        let r = detect_solution_leak(&text, 8);
        assert_eq!(
            r.offending_blocks,
            [CodeBlock {
                start_line: 1,
                end_line: 10,
                line_count: 9
            }]
        );
    }

    #[test]
    fn redaction_replaces_block() {
        let text = format!("Intro\n{}\nOutro\n", fenced(12));
        let r = detect_solution_leak(&text, 8);
        let out = redact(&text, &r.offending_blocks);
        assert_eq!(out, format!("Intro\n{REDACTION_PLACEHOLDER}\nOutro\n"));
    }

    fn bundle() -> PromptBundle {
        PromptBundle {
            system_text: "sys".into(),
            context_sections: vec![],
            history: vec![],
            user_message: "give me the code".into(),
            token_estimate: 5,
        }
    }

    async fn run(script: Vec<String>, first: &str) -> (GuardrailOutcome, MockProvider) {
        let mock = MockProvider::replies(script).unwrap();
        let b = bundle();
        let leak = detect_solution_leak(first, 8);
        let req = CompletionRequest {
            conversation: "t",
            bundle: &b,
        };
        let out = enforce_guardrail(first, leak, &mock, req, 8, &RetryPolicy::default(), &NoopObserver)
            .await
            .unwrap();
        (out, mock)
    }

    #[tokio::test]
    async fn clean_text_passes_through() {
        let (out, mock) = run(vec!["unused".into()], "What does range() return?").await;
        assert_eq!(out.text, "What does range() return?");
        assert_eq!(out.report.action_taken, LeakAction::None);
        assert_eq!(mock.call_count(), 0);
    }

    #[tokio::test]
    async fn leak_then_comply_regenerates() {
        let leaky = fenced(12);
        let (out, mock) = run(vec!["Think about the loop body first.".into()], &leaky).await;
        assert_eq!(out.text, "Think about the loop body first.");
        assert_eq!(out.report.action_taken, LeakAction::Regenerated);
        assert!(out.report.leaked);
        let calls = mock.calls();
        assert!(calls[0].bundle.system_text.starts_with("sys\n\nReminder:"));
    }

    #[tokio::test]
    async fn leak_twice_redacts() {
        let leaky = fenced(12);
        let (out, _) = run(vec![format!("Sure:\n{leaky}\nHope it helps")], &leaky).await;
        assert_eq!(out.report.action_taken, LeakAction::Redacted);
        assert!(out.text.contains(REDACTION_PLACEHOLDER));
        assert!(!detect_solution_leak(&out.text, 8).leaked);
    }

    proptest! {
        #[test]
        fn redaction_removes_all_offending_blocks(
            sizes in prop::collection::vec(0usize..15, 1..5),
            indented in any::<bool>(),
        ) {
            let mut parts = vec!["Intro".to_string()];
            for (k, n) in sizes.iter().enumerate() {
                if indented && k % 2 == 1 {
                    parts.push(String::new());
                    parts.extend((0..*n).map(|i| format!("    y{i}")));
                    parts.push(String::new());
                } else {
                    parts.push(fenced(*n));
                }
                parts.push(format!("prose {k}"));
            }
            let text = parts.join("\n");
            let r = detect_solution_leak(&text, 8);
            let out = redact(&text, &r.offending_blocks);
            prop_assert!(!detect_solution_leak(&out, 8).leaked);
        }
    }
}
