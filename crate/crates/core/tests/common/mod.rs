#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use tutor_core::kb::load_index;
use tutor_core::provider::{MockProvider, RetryPolicy};
use tutor_core::service::{RuntimeConfig, ServiceConfig, TaskStore, TutorService};
use tutor_core::telemetry::{EventRecord, InteractionRecord, SinkConfig, TelemetrySink};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture_runtime() -> RuntimeConfig {
    let text = std::fs::read_to_string(fixtures().join("service.json")).unwrap();
    let config: ServiceConfig = serde_json::from_str(&text).unwrap();
    config.runtime
}

pub fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        max_retries: 2,
        base_backoff: Duration::from_millis(1),
        deadline: Duration::from_secs(5),
    }
}

pub struct Harness {
    pub service: Arc<TutorService>,
    pub mock: Arc<MockProvider>,
    pub sink: TelemetrySink,
    pub log_dir: tempfile::TempDir,
}

pub fn harness(mock: MockProvider) -> Harness {
    harness_with(mock, |_| {})
}

pub fn harness_with(mock: MockProvider, tweak: impl FnOnce(&mut RuntimeConfig)) -> Harness {
    let log_dir = tempfile::tempdir().unwrap();
    let sink = TelemetrySink::start(SinkConfig::new(log_dir.path()));
    let index = load_index(&fixtures().join("course.index")).unwrap();
    let embedder = Arc::new(tutor_core::kb::OfflineEmbedder::with_dimension(index.dimension()));
    let mock = Arc::new(mock);
    let mut runtime = fixture_runtime();
    tweak(&mut runtime);
    let service = TutorService::builder(index, embedder, mock.clone(), sink.clone())
        .runtime(runtime)
        .retry(fast_retry())
        .tasks(TaskStore::load(&fixtures().join("tasks.json")).unwrap())
        .build()
        .unwrap();
    Harness {
        service: Arc::new(service),
        mock,
        sink,
        log_dir,
    }
}

fn read_prefixed<T: serde::de::DeserializeOwned>(dir: &Path, prefix: &str) -> Vec<T> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map(|rd| rd.filter_map(|e| e.ok().map(|e| e.path())).collect())
        .unwrap_or_default();
    files.retain(|p| p.file_name().unwrap().to_string_lossy().starts_with(prefix));
    files.sort();
    files
        .iter()
        .flat_map(|p| {
            std::fs::read_to_string(p)
                .unwrap()
                .lines()
                .map(|l| serde_json::from_str(l).unwrap())
                .collect::<Vec<T>>()
        })
        .collect()
}

impl Harness {
    pub async fn interactions(&self) -> Vec<InteractionRecord> {
        self.sink.flush().await;
        read_prefixed(self.log_dir.path(), "interactions-")
    }

    pub async fn events(&self) -> Vec<EventRecord> {
        self.sink.flush().await;
        read_prefixed(self.log_dir.path(), "events-")
    }
}
