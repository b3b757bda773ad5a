use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnalyticsError, MergedInteraction, QuestionCategory};

/// Category per merged id, persisted as a JSON object.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TagTable {
    tags: BTreeMap<String, QuestionCategory>,
}

impl TagTable {
    /// A missing file is an empty table.
    pub fn load(path: &Path) -> Result<Self, AnalyticsError> {
        match std::fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| AnalyticsError::Parse {
                path: path.to_path_buf(),
                line: e.line(),
                message: e.to_string(),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(AnalyticsError::io(path, e)),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), AnalyticsError> {
        let mut text = serde_json::to_string_pretty(self).expect("tag table serializes");
        text.push('\n');
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text).map_err(|e| AnalyticsError::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| AnalyticsError::io(path, e))
    }

    /// Sets the category of `merged_id`, replacing any earlier tag.
    pub fn tag(
        &mut self,
        merged: &[MergedInteraction],
        merged_id: &str,
        category: &str,
    ) -> Result<QuestionCategory, AnalyticsError> {
        let category: QuestionCategory = category.parse()?;
        if !merged.iter().any(|m| m.merged_id == merged_id) {
            return Err(AnalyticsError::UnknownMergedId(merged_id.to_string()));
        }
        self.tags.insert(merged_id.to_string(), category);
        Ok(category)
    }

    pub fn get(&self, merged_id: &str) -> Option<QuestionCategory> {
        self.tags.get(merged_id).copied()
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}
