use std::fmt::Write;
use std::str::FromStr;

use serde::Serialize;

use super::{MergedInteraction, QuestionCategory, TagTable};
use crate::policy::AwarenessLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StatsFormat {
    #[default]
    Table,
    Csv,
    Json,
}

impl FromStr for StatsFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Self::Table),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown format `{other}` (expected table, csv or json)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CategoryCount {
    pub category: QuestionCategory,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoryStats {
    /// Descending by count, ties by name.
    pub rows: Vec<CategoryCount>,
    pub total: usize,
    pub untagged: usize,
}

/// Counts tagged interactions per category. A tag in `tags` overrides the
/// interaction's own `category` field. With `awareness` set, only
/// interactions at that level are counted.
pub fn category_stats(
    merged: &[MergedInteraction],
    tags: &TagTable,
    awareness: Option<AwarenessLevel>,
) -> CategoryStats {
    let mut counts = [0usize; 12];
    let mut untagged = 0;
    for m in merged.iter().filter(|m| awareness.is_none_or(|a| m.awareness == a)) {
        match tags.get(&m.merged_id).or(m.category) {
            Some(c) => counts[QuestionCategory::ALL.iter().position(|x| *x == c).expect("listed")] += 1,
            None => untagged += 1,
        }
    }
    let mut rows: Vec<CategoryCount> = QuestionCategory::ALL
        .into_iter()
        .zip(counts)
        .filter(|(_, n)| *n > 0)
        .map(|(category, count)| CategoryCount { category, count })
        .collect();
    rows.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.category.as_str().cmp(b.category.as_str()))
    });
    CategoryStats {
        total: rows.iter().map(|r| r.count).sum(),
        rows,
        untagged,
    }
}

impl CategoryStats {
    pub fn render(&self, format: StatsFormat) -> String {
        match format {
            StatsFormat::Table => self.table(),
            StatsFormat::Csv => self.csv(),
            StatsFormat::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("stats serialize");
                s.push('\n');
                s
            }
        }
    }

    fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<18} {:>6}", "Category", "Count");
        for r in &self.rows {
            let _ = writeln!(out, "{:<18} {:>6}", r.category.as_str(), r.count);
        }
        let _ = writeln!(out, "{:<18} {:>6}", "Total", self.total);
        if self.untagged > 0 {
            let _ = writeln!(out, "{:<18} {:>6}", "(untagged)", self.untagged);
        }
        out
    }

    fn csv(&self) -> String {
        let mut out = String::from("category,count\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{}", r.category.as_str(), r.count);
        }
        let _ = writeln!(out, "Total,{}", self.total);
        if self.untagged > 0 {
            let _ = writeln!(out, "Untagged,{}", self.untagged);
        }
        out
    }
}
