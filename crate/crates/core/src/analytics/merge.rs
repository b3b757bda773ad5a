use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::{AnalyticsError, QuestionCategory};
use crate::policy::AwarenessLevel;
use crate::telemetry::InteractionRecord;

pub const DEFAULT_MERGE_WINDOW_SECS: u64 = 60;

/// One logical question, possibly sent as several prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedInteraction {
    pub merged_id: String,
    pub thread_id: String,
    pub interaction_ids: Vec<String>,
    pub combined_text: String,
    pub first_timestamp: DateTime<Utc>,
    /// Awareness of the first constituent.
    pub awareness: AwarenessLevel,
    #[serde(default)]
    pub category: Option<QuestionCategory>,
}

/// Groups consecutive prompts of a thread whose gap is at most `window_secs`.
///
/// Input must be sorted by thread, then by strictly increasing timestamp.
pub fn merge_interactions(
    records: &[InteractionRecord],
    window_secs: u64,
) -> Result<Vec<MergedInteraction>, AnalyticsError> {
    let window = Duration::seconds(window_secs.min(i64::MAX as u64 / 1000) as i64);
    let mut out: Vec<MergedInteraction> = Vec::new();
    let mut prev: Option<&InteractionRecord> = None;
    for record in records {
        let joins = match prev {
            Some(p) if p.thread_id == record.thread_id => {
                if record.timestamp <= p.timestamp {
                    return Err(unsorted(record));
                }
                record.timestamp - p.timestamp <= window
            }
            Some(p) if record.thread_id < p.thread_id => return Err(unsorted(record)),
            _ => false,
        };
        match out.last_mut() {
            Some(current) if joins => {
                current.interaction_ids.push(record.interaction_id.clone());
                current.combined_text.push('\n');
                current.combined_text.push_str(&record.prompt_text);
            }
            _ => out.push(MergedInteraction {
                merged_id: format!("m-{}", record.interaction_id),
                thread_id: record.thread_id.clone(),
                interaction_ids: vec![record.interaction_id.clone()],
                combined_text: record.prompt_text.clone(),
                first_timestamp: record.timestamp,
                awareness: record.awareness,
                category: None,
            }),
        }
        prev = Some(record);
    }
    Ok(out)
}

fn unsorted(record: &InteractionRecord) -> AnalyticsError {
    AnalyticsError::UnsortedInput {
        thread_id: record.thread_id.clone(),
        interaction_id: record.interaction_id.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::LeakAction;
    use crate::retrieval::ScopeVerdict;
    use crate::telemetry::Cost;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn rec(thread: &str, id: &str, secs: i64) -> InteractionRecord {
        InteractionRecord {
            interaction_id: id.into(),
            timestamp: Utc.with_ymd_and_hms(2024, 10, 1, 12, 0, 0).unwrap() + Duration::seconds(secs),
            thread_id: thread.into(),
            awareness: AwarenessLevel::None,
            task_id: None,
            prompt_text: format!("part {id}"),
            response_text: String::new(),
            prompt_tokens: 0,
            completion_tokens: 0,
            cost: Cost::ZERO,
            latency_ms: 0,
            scope_verdict: ScopeVerdict::InScope,
            leak_action: LeakAction::None,
            config_version: 1,
        }
    }

    #[test]
    fn close_prompts_merge() {
        let merged = merge_interactions(&[rec("t", "a", 0), rec("t", "b", 30)], 60).unwrap();
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].interaction_ids, ["a", "b"]);
        assert_eq!(merged[0].combined_text, "part a\npart b");
        assert_eq!(merged[0].merged_id, "m-a");
    }

    #[test]
    fn distant_prompts_stay_apart() {
        assert_eq!(
            merge_interactions(&[rec("t", "a", 0), rec("t", "b", 120)], 60)
                .unwrap()
                .len(),
            2
        );
    }

    #[test]
    fn gap_equal_to_window_merges() {
        assert_eq!(
            merge_interactions(&[rec("t", "a", 0), rec("t", "b", 60)], 60)
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn threads_never_merge() {
        assert_eq!(
            merge_interactions(&[rec("s", "a", 0), rec("t", "b", 1)], 60)
                .unwrap()
                .len(),
            2
        );
    }

    #[test]
    fn chains_merge_transitively() {
        let recs = [rec("t", "a", 0), rec("t", "b", 50), rec("t", "c", 100)];
        assert_eq!(merge_interactions(&recs, 60).unwrap().len(), 1);
    }

    #[test]
    fn unsorted_input_rejected() {
        assert!(matches!(
            merge_interactions(&[rec("t", "a", 10), rec("t", "b", 0)], 60),
            Err(AnalyticsError::UnsortedInput { .. })
        ));
        assert!(matches!(
            merge_interactions(&[rec("u", "a", 0), rec("t", "b", 1)], 60),
            Err(AnalyticsError::UnsortedInput { .. })
        ));
        assert!(matches!(
            merge_interactions(&[rec("t", "a", 0), rec("t", "b", 0)], 60),
            Err(AnalyticsError::UnsortedInput { .. })
        ));
    }

    #[test]
    fn empty_input() {
        assert!(merge_interactions(&[], 60).unwrap().is_empty());
    }

    fn arb_log() -> impl Strategy<Value = Vec<InteractionRecord>> {
        prop::collection::vec(prop::collection::vec(1i64..200, 0..12), 0..6).prop_map(|threads| {
            let mut out = Vec::new();
            for (t, gaps) in threads.into_iter().enumerate() {
                let mut at = 0;
                for gap in gaps {
                    at += gap;
                    let id = format!("{}-{}", out.len(), at);
                    out.push(rec(&format!("thread-{t:02}"), &id, at));
                }
            }
            out
        })
    }

    proptest! {
        #[test]
        fn merging_partitions_the_input(log in arb_log(), window in 0u64..250) {
            let merged = merge_interactions(&log, window).unwrap();
            let flat: Vec<&str> = merged.iter().flat_map(|m| m.interaction_ids.iter().map(String::as_str)).collect();
            let input: Vec<&str> = log.iter().map(|r| r.interaction_id.as_str()).collect();
            prop_assert_eq!(flat, input);
        }

        #[test]
        fn zero_window_is_identity(log in arb_log()) {
            prop_assert_eq!(merge_interactions(&log, 0).unwrap().len(), log.len());
        }

        #[test]
        fn wider_window_never_adds_groups(log in arb_log(), a in 0u64..250, b in 0u64..250) {
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(merge_interactions(&log, hi).unwrap().len() <= merge_interactions(&log, lo).unwrap().len());
        }
    }
}
