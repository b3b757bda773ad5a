//! Regenerates `fixtures/study`: a synthetic interaction log of 354 student
//! prompts in which exactly 50 questions were sent in two parts 30 s apart,
//! the merged view at a 60 s window, and a tag file.
//!
//! Usage: cargo run -p tutor-cli --example make_study_fixture -- [out_dir]

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::{Duration, TimeZone, Utc};
use tutor_core::analytics::{merge_interactions, QuestionCategory, TagTable};
use tutor_core::policy::{AwarenessLevel, LeakAction};
use tutor_core::retrieval::ScopeVerdict;
use tutor_core::service::REJECTION_NOTICE;
use tutor_core::telemetry::{compute_cost, log_file_name, InteractionRecord, Price, Pricing, INTERACTIONS_PREFIX};

const THREADS: usize = 38;
const QUESTIONS_PER_THREAD: usize = 8;
const SPLIT_QUESTIONS: usize = 50;
/// Distinct questions that follow the previous one after only 90 s.
const QUICK_FOLLOWERS: usize = 20;

const COUNTS: [(QuestionCategory, usize); 12] = [
    (QuestionCategory::ExplainConcept, 61),
    (QuestionCategory::Implement, 47),
    (QuestionCategory::HowTo, 38),
    (QuestionCategory::CodeCorrectness, 34),
    (QuestionCategory::CodeOnly, 31),
    (QuestionCategory::Unrelated, 23),
    (QuestionCategory::ExplainTaskDetail, 19),
    (QuestionCategory::FollowUp, 17),
    (QuestionCategory::GiveExample, 13),
    (QuestionCategory::ExplainCode, 13),
    (QuestionCategory::CourseMaterial, 5),
    (QuestionCategory::Misc, 3),
];

const TOPICS: &[&str] = &[
    "lists",
    "dictionaries",
    "tuples",
    "sets",
    "for loops",
    "while loops",
    "functions",
    "strings",
    "f-strings",
    "exceptions",
    "list comprehensions",
    "files",
    "recursion",
    "default parameters",
    "return values",
    "slicing",
    "sorting",
    "range",
];

const ACTIONS: &[&str] = &[
    "loop over a dictionary and print every key and value",
    "remove an element from a list by its value",
    "read a text file line by line",
    "convert user input into an integer",
    "sort a list of tuples by the second element",
    "count how often each word appears in a sentence",
    "check whether a key exists in a dictionary",
    "return two values from one function",
    "stop a while loop when the user types quit",
    "format a number with two decimals",
    "split a sentence into words",
    "catch a ValueError when parsing a number",
    "build a list of squares with a comprehension",
];

const SNIPPETS: &[&str] = &[
    "for i in range(len(words)):\n    print(words[i])",
    "counts = {}\nfor w in text.split():\n    counts[w] = counts.get(w, 0) + 1",
    "def average(scores):\n    return sum(scores) / len(scores)",
    "while n > 0:\n    n = n // 2",
    "top = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))[:n]",
    "if score >= 90:\n    return 'A'\nelif score >= 80:\n    return 'B'",
    "words = [w.strip('.,!?').lower() for w in text.split()]",
    "try:\n    x = int(value)\nexcept ValueError:\n    x = 0",
];

const UNRELATED: &[&str] = &[
    "What is the weather like today?",
    "Can you recommend a good series to watch tonight?",
    "Who won the football match yesterday?",
    "What should I cook for dinner?",
    "Tell me a joke",
    "How late does the cafeteria close?",
    "What is the best laptop for gaming?",
    "Can you help me write an email to my landlord?",
];

const TASK_DETAILS: &[&str] = &[
    "In the word frequency task, should punctuation like quotes also be removed?",
    "Does top_words have to sort words with the same count alphabetically?",
    "For the grade task, what should average return for an empty list?",
    "Is a score of exactly 90 an A or a B in letter_grade?",
    "Do we need docstrings for every function in the assignment?",
    "Should word_frequencies treat The and the as the same word?",
    "How many assert statements does the grade report need?",
];

const FOLLOW_UPS: &[&str] = &[
    "Can you explain that again more simply?",
    "Why is that?",
    "And what if the list is empty?",
    "Could you show that with a smaller example?",
    "What did you mean by the last sentence?",
];

const MISC: &[&str] = &["hello", "thanks!", "test"];

fn pick<'a>(items: &[&'a str], i: usize) -> &'a str {
    items[i % items.len()]
}

fn question_text(category: QuestionCategory, i: usize) -> String {
    let topic = pick(TOPICS, i);
    let other = pick(TOPICS, i * 7 + 3);
    match category {
        QuestionCategory::ExplainConcept => match i % 4 {
            0 => format!("What is the difference between {topic} and {other}?"),
            1 => format!("Can you explain what {topic} are used for in Python?"),
            2 => format!("What does it mean that {topic} are mutable or immutable?"),
            _ => format!("Why would I use {topic} instead of {other}?"),
        },
        QuestionCategory::Implement => match i % 3 {
            0 => "Can you write the word_frequencies function for me?".to_string(),
            1 => format!("Please give me the full solution for the exercise on {topic}"),
            _ => "Write the complete grade_report function so I can hand it in".to_string(),
        },
        QuestionCategory::HowTo => format!("How do I {}?", pick(ACTIONS, i)),
        QuestionCategory::CodeCorrectness => match i % 3 {
            0 => format!("Is my code correct?\n{}", pick(SNIPPETS, i)),
            1 => format!("Why does my code with {topic} raise a TypeError?"),
            _ => format!("My loop prints nothing, what is wrong?\n{}", pick(SNIPPETS, i + 3)),
        },
        QuestionCategory::CodeOnly => pick(SNIPPETS, i).to_string(),
        QuestionCategory::Unrelated => pick(UNRELATED, i).to_string(),
        QuestionCategory::ExplainTaskDetail => pick(TASK_DETAILS, i).to_string(),
        QuestionCategory::FollowUp => pick(FOLLOW_UPS, i).to_string(),
        QuestionCategory::GiveExample => format!("Can you give me an example of {topic}?"),
        QuestionCategory::ExplainCode => format!("What does this code do?\n{}", pick(SNIPPETS, i + 1)),
        QuestionCategory::CourseMaterial => format!("Which lecture slide covers {topic}?"),
        QuestionCategory::Misc => pick(MISC, i).to_string(),
    }
}

/// Splits at the word boundary nearest the middle.
fn halves(text: &str) -> (String, String) {
    let words: Vec<&str> = text.split(' ').collect();
    let mid = words.len().div_ceil(2).max(1);
    (words[..mid].join(" "), words[mid..].join(" "))
}

fn main() {
    let out_dir: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/study")));
    std::fs::create_dir_all(&out_dir).expect("create output dir");

    // Category per question, interleaved by a fixed stride so blocks do not cluster.
    let total: usize = COUNTS.iter().map(|(_, n)| n).sum();
    assert_eq!(total, THREADS * QUESTIONS_PER_THREAD);
    let flat: Vec<QuestionCategory> = COUNTS.iter().flat_map(|(c, n)| std::iter::repeat_n(*c, *n)).collect();
    let stride = 97; // coprime with 304
    let categories: Vec<QuestionCategory> = (0..total).map(|k| flat[(k * stride) % total]).collect();

    let pricing = Pricing::new(Price::from_f64(0.15).unwrap(), Price::from_f64(0.60).unwrap());
    let days = [
        Utc.with_ymd_and_hms(2024, 11, 5, 10, 15, 0).unwrap(),
        Utc.with_ymd_and_hms(2024, 11, 12, 10, 15, 0).unwrap(),
        Utc.with_ymd_and_hms(2024, 11, 19, 10, 15, 0).unwrap(),
    ];

    let mut records: Vec<InteractionRecord> = Vec::new();
    let mut expected_groups: Vec<(String, QuestionCategory)> = Vec::new();
    let (mut splits, mut quick) = (0, 0);
    for (q, &category) in categories.iter().enumerate().take(total) {
        let thread = q / QUESTIONS_PER_THREAD;
        let slot = q % QUESTIONS_PER_THREAD;
        let thread_id = format!("thread-{thread:02}");
        let text = question_text(category, q);
        let mut at = match records.last() {
            Some(prev) if prev.thread_id == thread_id => {
                let quick_gap = slot % 4 == 3 && quick < QUICK_FOLLOWERS;
                quick += usize::from(quick_gap);
                prev.timestamp + Duration::seconds(if quick_gap { 90 } else { 300 })
            }
            _ => days[thread % days.len()] + Duration::minutes((thread / days.len()) as i64 * 3),
        };
        let split = q % 6 == 1 && splits < SPLIT_QUESTIONS && text.contains(' ');
        splits += usize::from(split);
        let parts = if split {
            let (a, b) = halves(&text);
            vec![a, b]
        } else {
            vec![text]
        };
        for (p, part) in parts.into_iter().enumerate() {
            if p > 0 {
                at += Duration::seconds(30);
            }
            let n = records.len() + 1;
            let id = format!("i{n:04}");
            if p == 0 {
                expected_groups.push((format!("m-{id}"), category));
            }
            let rejected = category == QuestionCategory::Unrelated;
            let (prompt_tokens, completion_tokens) = if rejected {
                (0, 0)
            } else {
                (
                    380 + part.len() as u64 / 4 + (n as u64 * 13) % 90,
                    60 + (n as u64 * 37) % 180,
                )
            };
            records.push(InteractionRecord {
                interaction_id: id,
                timestamp: at,
                thread_id: thread_id.clone(),
                awareness: AwarenessLevel::None,
                task_id: None,
                prompt_text: part,
                response_text: if rejected {
                    REJECTION_NOTICE.to_string()
                } else {
                    "Let's work through it step by step. What have you tried so far?".to_string()
                },
                prompt_tokens,
                completion_tokens,
                cost: compute_cost(prompt_tokens, completion_tokens, &pricing),
                latency_ms: if rejected { 4 } else { 900 + (n as u64 * 53) % 1400 },
                scope_verdict: if rejected {
                    ScopeVerdict::OutOfScope
                } else {
                    ScopeVerdict::InScope
                },
                leak_action: LeakAction::None,
                config_version: 1,
            });
        }
    }
    assert_eq!(splits, SPLIT_QUESTIONS);
    assert_eq!(records.len(), total + SPLIT_QUESTIONS);

    let mut files: BTreeMap<String, String> = BTreeMap::new();
    for r in &records {
        let name = log_file_name(INTERACTIONS_PREFIX, r.timestamp.date_naive());
        let line = files.entry(name).or_default();
        line.push_str(&serde_json::to_string(r).unwrap());
        line.push('\n');
    }
    for (name, body) in &files {
        std::fs::write(out_dir.join(name), body).unwrap();
    }

    let mut sorted = records.clone();
    sorted.sort_by(|a, b| (&a.thread_id, a.timestamp).cmp(&(&b.thread_id, b.timestamp)));
    let merged = merge_interactions(&sorted, 60).unwrap();
    assert_eq!(merged.len(), total);
    let mut text = serde_json::to_string_pretty(&merged).unwrap();
    text.push('\n');
    std::fs::write(out_dir.join("merged.json"), text).unwrap();

    let mut tags = TagTable::default();
    for (merged_id, category) in &expected_groups {
        tags.tag(&merged, merged_id, category.as_str()).unwrap();
    }
    tags.save(&out_dir.join("tags.json")).unwrap();
    println!(
        "{} records in {} files, {} merged interactions -> {}",
        records.len(),
        files.len(),
        merged.len(),
        out_dir.display()
    );
}
