//! Offline analysis of interaction logs: merging split questions, manual
//! category tags and per-category counts.

mod merge;
mod stats;
mod tags;

pub use merge::{merge_interactions, MergedInteraction, DEFAULT_MERGE_WINDOW_SECS};
pub use stats::{category_stats, CategoryStats, StatsFormat};
pub use tags::TagTable;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::telemetry::{InteractionRecord, INTERACTIONS_PREFIX};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("records out of order at thread `{thread_id}`, interaction `{interaction_id}`")]
    UnsortedInput { thread_id: String, interaction_id: String },
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("unknown merged id `{0}`")]
    UnknownMergedId(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AnalyticsError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QuestionCategory {
    GiveExample,
    FollowUp,
    CourseMaterial,
    CodeCorrectness,
    ExplainCode,
    ExplainConcept,
    ExplainTaskDetail,
    HowTo,
    Implement,
    Unrelated,
    CodeOnly,
    Misc,
}

impl QuestionCategory {
    pub const ALL: [QuestionCategory; 12] = [
        Self::GiveExample,
        Self::FollowUp,
        Self::CourseMaterial,
        Self::CodeCorrectness,
        Self::ExplainCode,
        Self::ExplainConcept,
        Self::ExplainTaskDetail,
        Self::HowTo,
        Self::Implement,
        Self::Unrelated,
        Self::CodeOnly,
        Self::Misc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::GiveExample => "GiveExample",
            Self::FollowUp => "FollowUp",
            Self::CourseMaterial => "CourseMaterial",
            Self::CodeCorrectness => "CodeCorrectness",
            Self::ExplainCode => "ExplainCode",
            Self::ExplainConcept => "ExplainConcept",
            Self::ExplainTaskDetail => "ExplainTaskDetail",
            Self::HowTo => "HowTo",
            Self::Implement => "Implement",
            Self::Unrelated => "Unrelated",
            Self::CodeOnly => "CodeOnly",
            Self::Misc => "Misc",
        }
    }
}

impl fmt::Display for QuestionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Case-insensitive; `_` and `-` are ignored, so `how_to` parses as `HowTo`.
impl FromStr for QuestionCategory {
    type Err = AnalyticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '_' | '-' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        Self::ALL
            .into_iter()
            .find(|c| c.as_str().to_lowercase() == key)
            .ok_or_else(|| AnalyticsError::UnknownCategory(s.to_string()))
    }
}

/// Reads every `interactions-*.jsonl` file in `dir`, sorted by
/// `(thread_id, timestamp)`.
pub fn read_interaction_log(dir: &Path) -> Result<Vec<InteractionRecord>, AnalyticsError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| AnalyticsError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(&format!("{INTERACTIONS_PREFIX}-")) && n.ends_with(".jsonl"))
        })
        .collect();
    files.sort();
    let mut records = Vec::new();
    for path in files {
        let text = std::fs::read_to_string(&path).map_err(|e| AnalyticsError::io(&path, e))?;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(line).map_err(|e| AnalyticsError::Parse {
                path: path.clone(),
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push(record);
        }
    }
    records.sort_by(|a: &InteractionRecord, b| (&a.thread_id, a.timestamp).cmp(&(&b.thread_id, b.timestamp)));
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_distinct_names_round_trip() {
        let mut names: Vec<_> = QuestionCategory::ALL.iter().map(|c| c.as_str()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 12);
        for c in QuestionCategory::ALL {
            assert_eq!(c.as_str().parse::<QuestionCategory>().unwrap(), c);
            assert_eq!(c.as_str().to_uppercase().parse::<QuestionCategory>().unwrap(), c);
        }
        assert_eq!("how_to".parse::<QuestionCategory>().unwrap(), QuestionCategory::HowTo);
    }

    #[test]
    fn banana_is_not_a_category() {
        assert!(
            matches!("Banana".parse::<QuestionCategory>(), Err(AnalyticsError::UnknownCategory(s)) if s == "Banana")
        );
    }
}
