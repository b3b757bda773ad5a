use serde::{Deserialize, Serialize};

pub const MAX_HINT_LEVEL: u8 = 3;

pub fn default_solution_keywords() -> Vec<String> {
    [
        "implement",
        "write the code",
        "full solution",
        "solve it for me",
        "give me the code",
    ]
    .into_iter()
    .map(String::from)
    .collect()
}

/// True iff the lowercased message contains any keyword (matched lowercased).
pub fn classify_solution_request(message: &str, keywords: &[String]) -> bool {
    let message = message.to_lowercase();
    keywords
        .iter()
        .filter(|k| !k.trim().is_empty())
        .any(|k| message.contains(&k.to_lowercase()))
}

/// Hint depth for a thread: `min(3, 1 + consecutive solution requests)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintState {
    pub level: u8,
    pub consecutive_solution_requests: u32,
}

impl Default for HintState {
    fn default() -> Self {
        Self {
            level: 1,
            consecutive_solution_requests: 0,
        }
    }
}

impl HintState {
    #[must_use]
    pub fn update(self, is_solution_request: bool) -> Self {
        if !is_solution_request {
            return Self::default();
        }
        let consecutive = self.consecutive_solution_requests.saturating_add(1);
        Self {
            level: level_for(consecutive),
            consecutive_solution_requests: consecutive,
        }
    }
}

fn level_for(consecutive: u32) -> u8 {
    consecutive.saturating_add(1).min(u32::from(MAX_HINT_LEVEL)) as u8
}
