use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender, TrySendError};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use chrono::NaiveDate;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;

use super::{log_file_name, EventRecord, InteractionRecord, TelemetryError, EVENTS_PREFIX, INTERACTIONS_PREFIX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FsyncPolicy {
    #[default]
    Never,
    EveryRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SinkConfig {
    pub dir: PathBuf,
    #[serde(default = "default_capacity")]
    pub queue_capacity: usize,
    #[serde(default)]
    pub fsync: FsyncPolicy,
}

fn default_capacity() -> usize {
    4096
}

impl SinkConfig {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            queue_capacity: default_capacity(),
            fsync: FsyncPolicy::Never,
        }
    }
}

enum Message {
    Line {
        prefix: &'static str,
        date: NaiveDate,
        line: String,
    },
    Flush(oneshot::Sender<()>),
}

/// Handle to a single appender thread fed by a bounded queue.
///
/// Enqueueing never blocks: when the queue is full or the log directory is
/// unusable the record is counted in [`TelemetrySink::dropped`] instead.
#[derive(Clone)]
pub struct TelemetrySink {
    tx: SyncSender<Message>,
    dropped: Arc<AtomicU64>,
    written: Arc<AtomicU64>,
    worker: Arc<Mutex<Option<JoinHandle<()>>>>,
}

impl TelemetrySink {
    pub fn start(config: SinkConfig) -> Self {
        let (tx, rx) = sync_channel(config.queue_capacity.max(1));
        let dropped = Arc::new(AtomicU64::new(0));
        let written = Arc::new(AtomicU64::new(0));
        let worker = {
            let dropped = dropped.clone();
            let written = written.clone();
            std::thread::Builder::new()
                .name("telemetry-appender".into())
                .spawn(move || run_appender(rx, config, &dropped, &written))
                .expect("spawn telemetry thread")
        };
        Self {
            tx,
            dropped,
            written,
            worker: Arc::new(Mutex::new(Some(worker))),
        }
    }

    pub fn record(&self, record: &InteractionRecord) -> Result<(), TelemetryError> {
        self.enqueue(INTERACTIONS_PREFIX, record.timestamp.date_naive(), record)
    }

    pub fn event(&self, event: &EventRecord) -> Result<(), TelemetryError> {
        self.enqueue(EVENTS_PREFIX, event.timestamp().date_naive(), event)
    }

    fn enqueue<T: Serialize>(&self, prefix: &'static str, date: NaiveDate, value: &T) -> Result<(), TelemetryError> {
        let line = serde_json::to_string(value).map_err(|e| self.drop_one(format!("unserializable record: {e}")))?;
        match self.tx.try_send(Message::Line { prefix, date, line }) {
            Ok(()) => Ok(()),
            Err(TrySendError::Full(_)) => Err(self.drop_one("queue full".into())),
            Err(TrySendError::Disconnected(_)) => Err(self.drop_one("appender stopped".into())),
        }
    }

    fn drop_one(&self, reason: String) -> TelemetryError {
        self.dropped.fetch_add(1, Ordering::Relaxed);
        tracing::warn!(%reason, "telemetry record dropped");
        TelemetryError::SinkUnavailable(reason)
    }

    /// Records lost to backpressure or I/O failure.
    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }

    pub fn written(&self) -> u64 {
        self.written.load(Ordering::Relaxed)
    }

    /// Resolves once every record enqueued before the call has been handled.
    pub async fn flush(&self) {
        let (ack, done) = oneshot::channel();
        let mut message = Message::Flush(ack);
        loop {
            match self.tx.try_send(message) {
                Ok(()) => break,
                Err(TrySendError::Full(m)) => {
                    message = m;
                    tokio::time::sleep(Duration::from_millis(2)).await;
                }
                Err(TrySendError::Disconnected(_)) => return,
            }
        }
        let _ = done.await;
    }

    /// Blocking variant of [`flush`](Self::flush) for non-async callers.
    pub fn flush_blocking(&self) {
        let (ack, done) = oneshot::channel();
        if self.tx.send(Message::Flush(ack)).is_ok() {
            let _ = done.blocking_recv();
        }
    }

    /// Stops the appender after draining. Later records are dropped.
    pub fn shutdown(self) {
        let worker = self.worker.lock().take();
        drop(self.tx);
        if let Some(worker) = worker {
            let _ = worker.join();
        }
    }
}

fn run_appender(rx: Receiver<Message>, config: SinkConfig, dropped: &AtomicU64, written: &AtomicU64) {
    let mut files: HashMap<(&'static str, NaiveDate), File> = HashMap::new();
    let dir_ok = std::fs::create_dir_all(&config.dir).is_ok();
    for message in rx {
        match message {
            Message::Flush(ack) => {
                for file in files.values_mut() {
                    let _ = file.flush();
                }
                let _ = ack.send(());
            }
            Message::Line { prefix, date, mut line } => {
                line.push('\n');
                let result = if dir_ok {
                    append(&mut files, &config, prefix, date, line.as_bytes())
                } else {
                    Err(std::io::Error::other("log directory unavailable"))
                };
                match result {
                    Ok(()) => written.fetch_add(1, Ordering::Relaxed),
                    Err(e) => {
                        tracing::warn!(error = %e, "telemetry write failed");
                        dropped.fetch_add(1, Ordering::Relaxed)
                    }
                };
            }
        }
    }
}

fn append(
    files: &mut HashMap<(&'static str, NaiveDate), File>,
    config: &SinkConfig,
    prefix: &'static str,
    date: NaiveDate,
    bytes: &[u8],
) -> std::io::Result<()> {
    let file = match files.entry((prefix, date)) {
        std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
        std::collections::hash_map::Entry::Vacant(e) => e.insert(open_log(&config.dir, prefix, date)?),
    };
    file.write_all(bytes)?;
    if config.fsync == FsyncPolicy::EveryRecord {
        file.sync_data()?;
    }
    Ok(())
}

fn open_log(dir: &Path, prefix: &str, date: NaiveDate) -> std::io::Result<File> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join(log_file_name(prefix, date)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{AwarenessLevel, LeakAction};
    use crate::retrieval::ScopeVerdict;
    use crate::telemetry::Cost;
    use chrono::{TimeZone, Utc};

    fn record(i: usize) -> InteractionRecord {
        InteractionRecord {
            interaction_id: format!("i{i}"),
            timestamp: Utc.with_ymd_and_hms(2025, 11, 3, 10, 0, 0).unwrap() + chrono::Duration::seconds(i as i64),
            thread_id: format!("t{}", i % 7),
            awareness: AwarenessLevel::None,
            task_id: None,
            prompt_text: format!("question {i} with \"quotes\" and\nnewlines"),
            response_text: "hint".repeat(i % 50),
            prompt_tokens: i as u64,
            completion_tokens: 1,
            cost: Cost::from_micros(i as u64),
            latency_ms: 3,
            scope_verdict: ScopeVerdict::InScope,
            leak_action: LeakAction::None,
            config_version: 1,
        }
    }

    fn read_lines(path: &Path) -> Vec<String> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(String::from)
            .collect()
    }

    #[tokio::test]
    async fn one_record_one_line() {
        let dir = tempfile::tempdir().unwrap();
        let sink = TelemetrySink::start(SinkConfig::new(dir.path()));
        sink.record(&record(1)).unwrap();
        sink.flush().await;
        let lines = read_lines(&dir.path().join("interactions-2025-11-03.jsonl"));
        assert_eq!(lines.len(), 1);
        let back: InteractionRecord = serde_json::from_str(&lines[0]).unwrap();
        assert_eq!(back, record(1));
    }

    #[tokio::test(flavor = "multi_thread", worker_threads = 4)]
    async fn concurrent_writers_produce_intact_lines() {
        let dir = tempfile::tempdir().unwrap();
        let sink = TelemetrySink::start(SinkConfig::new(dir.path()));
        let tasks: Vec<_> = (0..100)
            .map(|i| {
                let sink = sink.clone();
                tokio::spawn(async move { sink.record(&record(i)).unwrap() })
            })
            .collect();
        for t in tasks {
            t.await.unwrap();
        }
        sink.flush().await;
        let lines = read_lines(&dir.path().join("interactions-2025-11-03.jsonl"));
        assert_eq!(lines.len(), 100);
        let mut ids: Vec<String> = lines
            .iter()
            .map(|l| serde_json::from_str::<InteractionRecord>(l).unwrap().interaction_id)
            .collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 100);
    }

    #[tokio::test]
    async fn rotates_by_date() {
        let dir = tempfile::tempdir().unwrap();
        let sink = TelemetrySink::start(SinkConfig::new(dir.path()));
        let mut late = record(2);
        late.timestamp = Utc.with_ymd_and_hms(2025, 11, 4, 0, 0, 1).unwrap();
        sink.record(&record(1)).unwrap();
        sink.record(&late).unwrap();
        sink.flush().await;
        assert!(dir.path().join("interactions-2025-11-03.jsonl").exists());
        assert!(dir.path().join("interactions-2025-11-04.jsonl").exists());
    }

    #[tokio::test]
    async fn unusable_directory_counts_drops() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("not-a-dir");
        std::fs::write(&blocker, "x").unwrap();
        let sink = TelemetrySink::start(SinkConfig::new(&blocker));
        sink.record(&record(1)).unwrap();
        sink.flush().await;
        assert_eq!(sink.dropped(), 1);
        assert_eq!(sink.written(), 0);
    }

    #[tokio::test]
    async fn full_queue_drops_instead_of_blocking() {
        let dir = tempfile::tempdir().unwrap();
        let sink = TelemetrySink::start(SinkConfig {
            dir: dir.path().to_path_buf(),
            queue_capacity: 1,
            fsync: FsyncPolicy::EveryRecord,
        });
        let results: Vec<_> = (0..200).map(|i| sink.record(&record(i))).collect();
        sink.flush().await;
        let failed = results.iter().filter(|r| r.is_err()).count() as u64;
        assert_eq!(failed, sink.dropped());
        assert_eq!(sink.written() + sink.dropped(), 200);
    }

    #[tokio::test]
    async fn events_go_to_their_own_file() {
        let dir = tempfile::tempdir().unwrap();
        let sink = TelemetrySink::start(SinkConfig::new(dir.path()));
        let event = EventRecord::ConfigChanged {
            timestamp: Utc.with_ymd_and_hms(2025, 11, 3, 9, 0, 0).unwrap(),
            config_version: 2,
            changed_fields: vec!["scope_threshold".into()],
        };
        sink.event(&event).unwrap();
        sink.flush().await;
        let lines = read_lines(&dir.path().join("events-2025-11-03.jsonl"));
        assert!(lines[0].starts_with(r#"{"event":"config_changed""#));
        assert_eq!(serde_json::from_str::<EventRecord>(&lines[0]).unwrap(), event);
    }
}
