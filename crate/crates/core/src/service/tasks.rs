use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ServiceError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDescription {
    pub task_id: String,
    pub title: String,
    pub statement: String,
    /// e.g. `collections`, `functions`
    pub topic: String,
}

/// Exercise tasks keyed (and listed) by `task_id`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskStore {
    tasks: BTreeMap<String, TaskDescription>,
}

impl TaskStore {
    pub fn from_tasks(tasks: Vec<TaskDescription>) -> Result<Self, ServiceError> {
        let mut map = BTreeMap::new();
        for task in tasks {
            if task.statement.trim().is_empty() {
                return Err(ServiceError::InvalidTasks(format!(
                    "task `{}` has an empty statement",
                    task.task_id
                )));
            }
            let id = task.task_id.clone();
            if map.insert(id.clone(), task).is_some() {
                return Err(ServiceError::InvalidTasks(format!("duplicate task id `{id}`")));
            }
        }
        Ok(Self { tasks: map })
    }

    /// Reads a JSON array of tasks.
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::InvalidTasks(format!("{}: {e}", path.display())))?;
        let tasks: Vec<TaskDescription> =
            serde_json::from_str(&text).map_err(|e| ServiceError::InvalidTasks(format!("{}: {e}", path.display())))?;
        Self::from_tasks(tasks)
    }

    pub fn list(&self) -> Vec<TaskDescription> {
        self.tasks.values().cloned().collect()
    }

    pub fn get(&self, task_id: &str) -> Result<TaskDescription, ServiceError> {
        self.tasks
            .get(task_id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownTask(task_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}
