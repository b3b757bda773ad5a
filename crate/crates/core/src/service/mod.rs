//! The prompt manager: sessions, tasks, live configuration and the
//! per-message pipeline, plus the HTTP API in [`http`].

mod bootstrap;
mod config;
pub mod http;
mod tasks;

pub use bootstrap::{completion_provider, embedding_provider, load_templates};
pub use config::{
    EmbeddingSettings, FieldError, ProviderSettings, RetrySettings, RuntimeConfig, ServiceConfig, TelemetrySettings,
    TemplateFile,
};
pub use tasks::{TaskDescription, TaskStore};

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use arc_swap::ArcSwap;
use chrono::{DateTime, Utc};
use dashmap::DashMap;
use parking_lot::{Mutex, RwLock};
use serde::Serialize;
use thiserror::Error;

use crate::kb::{embed_text, EmbeddingProvider, KbError, VectorIndex};
use crate::policy::{
    assemble_prompt, classify_solution_request, detect_solution_leak, enforce_guardrail, AwarenessLevel,
    CharQuarterEstimator, CourseExcerpt, HintState, LeakReport, PolicyError, PromptInputs, Role, SystemPromptTemplate,
    Turn,
};
use crate::provider::{complete, CompletionProvider, CompletionRequest, ProviderError, RetryEvent, RetryPolicy};
use crate::retrieval::{retrieve, scope_check, ScopeDecision, ScopeVerdict};
use crate::telemetry::{compute_cost, Cost, EventRecord, InteractionRecord, TelemetrySink};

/// Returned instead of a model answer when the question is out of scope.
pub const REJECTION_NOTICE: &str = "This question is outside the scope of this course, so I can't help with it here. \
Please ask about the course material, the current task, or your code.";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown thread `{0}`")]
    UnknownThread(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("{0}")]
    MissingContext(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("invalid config")]
    InvalidConfig(Vec<FieldError>),
    #[error("invalid task file: {0}")]
    InvalidTasks(String),
    #[error(transparent)]
    Prompt(PolicyError),
    #[error(transparent)]
    Knowledge(KbError),
    #[error("startup failed: {0}")]
    Startup(String),
}

impl From<PolicyError> for ServiceError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::MissingContext { .. } => ServiceError::MissingContext(e.to_string()),
            other => ServiceError::Prompt(other),
        }
    }
}

impl From<KbError> for ServiceError {
    fn from(e: KbError) -> Self {
        match e {
            KbError::Provider(p) => ServiceError::Provider(p),
            other => ServiceError::Knowledge(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Message {
    pub role: Role,
    pub text: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub struct SessionThread {
    pub thread_id: String,
    pub created_at: DateTime<Utc>,
    pub history: Vec<Message>,
    pub hint_state: HintState,
    pub active_task_id: Option<String>,
    last_record_at: Option<DateTime<Utc>>,
}

impl SessionThread {
    fn new(thread_id: String) -> Self {
        Self {
            thread_id,
            created_at: Utc::now(),
            history: Vec::new(),
            hint_state: HintState::default(),
            active_task_id: None,
            last_record_at: None,
        }
    }

    /// Wall-clock time, nudged forward so records of one thread strictly increase.
    fn next_record_time(&mut self) -> DateTime<Utc> {
        let mut now = Utc::now();
        if let Some(last) = self.last_record_at {
            if now <= last {
                now = last + chrono::Duration::nanoseconds(1);
            }
        }
        self.last_record_at = Some(now);
        now
    }
}

/// A runtime config together with its version counter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigSnapshot {
    pub config_version: u64,
    #[serde(flatten)]
    pub config: RuntimeConfig,
}

#[derive(Debug, Clone, Default)]
pub struct PostMessage {
    pub text: String,
    /// Falls back to the configured default when absent.
    pub awareness: Option<AwarenessLevel>,
    pub task_id: Option<String>,
    pub code: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub cost: Cost,
}

#[derive(Debug, Clone)]
pub struct TutorResponse {
    pub text: String,
    pub scope: ScopeDecision,
    pub leak: LeakReport,
    pub usage: Usage,
    pub interaction_id: String,
}

type Session = Arc<tokio::sync::Mutex<SessionThread>>;

pub struct TutorService {
    index: RwLock<VectorIndex<f64>>,
    embedder: Arc<dyn EmbeddingProvider<f64>>,
    provider: Arc<dyn CompletionProvider>,
    retry: RetryPolicy,
    config: ArcSwap<ConfigSnapshot>,
    config_write: Mutex<()>,
    templates: HashMap<String, SystemPromptTemplate>,
    tasks: RwLock<TaskStore>,
    tasks_path: Option<PathBuf>,
    sessions: DashMap<String, Session>,
    telemetry: TelemetrySink,
}

pub struct TutorServiceBuilder {
    index: VectorIndex<f64>,
    embedder: Arc<dyn EmbeddingProvider<f64>>,
    provider: Arc<dyn CompletionProvider>,
    telemetry: TelemetrySink,
    retry: RetryPolicy,
    runtime: RuntimeConfig,
    templates: HashMap<String, SystemPromptTemplate>,
    tasks: TaskStore,
    tasks_path: Option<PathBuf>,
}

impl TutorServiceBuilder {
    pub fn runtime(mut self, runtime: RuntimeConfig) -> Self {
        self.runtime = runtime;
        self
    }

    pub fn retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn template(mut self, template: SystemPromptTemplate) -> Self {
        self.templates.insert(template.version.clone(), template);
        self
    }

    pub fn tasks(mut self, tasks: TaskStore) -> Self {
        self.tasks = tasks;
        self
    }

    /// Loads tasks from `path` now and on every [`TutorService::reload_tasks`].
    pub fn tasks_file(mut self, path: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let path = path.into();
        self.tasks = TaskStore::load(&path)?;
        self.tasks_path = Some(path);
        Ok(self)
    }

    pub fn build(self) -> Result<TutorService, ServiceError> {
        let versions: Vec<&str> = self.templates.keys().map(String::as_str).collect();
        self.runtime.validate(&versions).map_err(ServiceError::InvalidConfig)?;
        if self.index.dimension() != self.embedder.dimension() {
            return Err(ServiceError::Knowledge(KbError::DimensionMismatch {
                expected: self.index.dimension(),
                actual: self.embedder.dimension(),
            }));
        }
        Ok(TutorService {
            index: RwLock::new(self.index),
            embedder: self.embedder,
            provider: self.provider,
            retry: self.retry,
            config: ArcSwap::from_pointee(ConfigSnapshot {
                config_version: 1,
                config: self.runtime,
            }),
            config_write: Mutex::new(()),
            templates: self.templates,
            tasks: RwLock::new(self.tasks),
            tasks_path: self.tasks_path,
            sessions: DashMap::new(),
            telemetry: self.telemetry,
        })
    }
}

impl TutorService {
    pub fn builder(
        index: VectorIndex<f64>,
        embedder: Arc<dyn EmbeddingProvider<f64>>,
        provider: Arc<dyn CompletionProvider>,
        telemetry: TelemetrySink,
    ) -> TutorServiceBuilder {
        let builtin = SystemPromptTemplate::builtin();
        TutorServiceBuilder {
            index,
            embedder,
            provider,
            telemetry,
            retry: RetryPolicy::default(),
            runtime: RuntimeConfig::default(),
            templates: HashMap::from([(builtin.version.clone(), builtin)]),
            tasks: TaskStore::default(),
            tasks_path: None,
        }
    }

    pub fn telemetry(&self) -> &TelemetrySink {
        &self.telemetry
    }

    pub fn index_version(&self) -> u64 {
        self.index.read().version()
    }

    /// Runs `mutate` with exclusive access to the index.
    pub fn update_index<R>(&self, mutate: impl FnOnce(&mut VectorIndex<f64>) -> R) -> R {
        mutate(&mut self.index.write())
    }

    pub fn create_session(&self) -> String {
        let thread_id = uuid::Uuid::new_v4().simple().to_string();
        self.sessions.insert(
            thread_id.clone(),
            Arc::new(tokio::sync::Mutex::new(SessionThread::new(thread_id.clone()))),
        );
        thread_id
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    fn session(&self, thread_id: &str) -> Result<Session, ServiceError> {
        self.sessions
            .get(thread_id)
            .map(|s| s.value().clone())
            .ok_or_else(|| ServiceError::UnknownThread(thread_id.to_string()))
    }

    /// A copy of the thread's state, taken after any in-flight message on it.
    pub async fn session_snapshot(&self, thread_id: &str) -> Result<SessionThread, ServiceError> {
        Ok(self.session(thread_id)?.lock().await.clone())
    }

    pub fn config(&self) -> Arc<ConfigSnapshot> {
        self.config.load_full()
    }

    pub fn template_versions(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.templates.keys().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    /// Atomically applies a partial update; readers see either the old or the
    /// new snapshot, never a mix.
    pub fn put_config(&self, patch: &serde_json::Value) -> Result<Arc<ConfigSnapshot>, ServiceError> {
        let _guard = self.config_write.lock();
        let current = self.config.load_full();
        let (config, changed) = current
            .config
            .patched(patch, &self.template_versions())
            .map_err(ServiceError::InvalidConfig)?;
        let next = Arc::new(ConfigSnapshot {
            config_version: current.config_version + 1,
            config,
        });
        self.config.store(next.clone());
        let _ = self.telemetry.event(&EventRecord::ConfigChanged {
            timestamp: Utc::now(),
            config_version: next.config_version,
            changed_fields: changed,
        });
        Ok(next)
    }

    pub fn list_tasks(&self) -> Vec<TaskDescription> {
        self.tasks.read().list()
    }

    pub fn get_task(&self, task_id: &str) -> Result<TaskDescription, ServiceError> {
        self.tasks.read().get(task_id)
    }

    /// Re-reads the task file. Returns the number of tasks now loaded.
    pub fn reload_tasks(&self) -> Result<usize, ServiceError> {
        let Some(path) = &self.tasks_path else {
            return Ok(self.tasks.read().len());
        };
        let store = TaskStore::load(path)?;
        let count = store.len();
        *self.tasks.write() = store;
        Ok(count)
    }

    /// Handles one student message end to end.
    ///
    /// Messages on the same thread are processed one at a time in arrival
    /// order. History and hint state change only when the pipeline succeeds.
    pub async fn post_message(&self, thread_id: &str, request: PostMessage) -> Result<TutorResponse, ServiceError> {
        let started = Instant::now();
        let session = self.session(thread_id)?;
        let mut session = session.lock().await;
        let snapshot = self.config.load_full();
        let cfg = &snapshot.config;
        let awareness = request.awareness.unwrap_or(cfg.default_awareness);
        let received_at = Utc::now();

        // Resolve live context up front; the prompt cannot be built without it.
        let task_id = request.task_id.clone().or_else(|| session.active_task_id.clone());
        let task = if awareness.includes_task() {
            let id = task_id
                .clone()
                .ok_or_else(|| ServiceError::MissingContext(format!("awareness `{awareness}` requires a task_id")))?;
            Some(self.get_task(&id)?)
        } else {
            None
        };
        if awareness.includes_code() && request.code.as_deref().is_none_or(|c| c.trim().is_empty()) {
            return Err(ServiceError::MissingContext(format!(
                "awareness `{awareness}` requires a code snapshot"
            )));
        }

        // The scope query is the raw question only.
        let query = match embed_text(&request.text, self.embedder.as_ref()).await {
            Ok(q) => q,
            Err(e) => {
                let err = ServiceError::from(e);
                self.log_failure(&session, awareness, &err, 1, snapshot.config_version);
                return Err(err);
            }
        };
        let (scope, excerpts) = {
            let index = self.index.read();
            let hits = retrieve(&index, query.as_slice(), cfg.retrieval_k);
            let scope = scope_check(&hits, cfg.scope_threshold);
            let excerpts: Vec<CourseExcerpt> = hits
                .iter()
                .map(|h| CourseExcerpt {
                    label: h.chunk.chunk_id.clone(),
                    text: h.chunk.text.clone(),
                })
                .collect();
            (scope, excerpts)
        };

        if scope.verdict == ScopeVerdict::OutOfScope {
            self.commit_turns(&mut session, &request.text, received_at, REJECTION_NOTICE);
            let response = TutorResponse {
                text: REJECTION_NOTICE.to_string(),
                scope,
                leak: LeakReport::default(),
                usage: Usage::default(),
                interaction_id: new_interaction_id(),
            };
            self.log_interaction(
                &mut session,
                &snapshot,
                awareness,
                task_id.filter(|_| task.is_some()),
                &request.text,
                &response,
                started,
            );
            return Ok(response);
        }

        let is_solution_request = classify_solution_request(&request.text, &cfg.solution_keywords);
        let hint_state = session.hint_state.update(is_solution_request);
        let history: Vec<Turn> = session
            .history
            .iter()
            .map(|m| Turn {
                role: m.role,
                text: m.text.clone(),
            })
            .collect();
        let template = self
            .templates
            .get(&cfg.system_prompt_version)
            .ok_or_else(|| ServiceError::InvalidConfig(vec![]))?;
        let bundle = assemble_prompt(
            &PromptInputs {
                history: &history,
                hint_level: hint_state.level,
                user_message: &request.text,
                awareness,
                task: task.as_ref(),
                code: request.code.as_deref(),
                excerpts: &excerpts,
                template,
                course_name: &cfg.course_name,
                token_budget: cfg.token_budget,
            },
            &CharQuarterEstimator,
        )?;

        let retries: Mutex<Vec<RetryEvent>> = Mutex::new(Vec::new());
        let observer = |e: &RetryEvent| retries.lock().push(e.clone());
        let call = CompletionRequest {
            conversation: thread_id,
            bundle: &bundle,
        };
        let outcome = async {
            let first = complete(self.provider.as_ref(), call, &self.retry, &observer).await?;
            let leak = detect_solution_leak(&first.text, cfg.max_code_lines);
            let guarded = enforce_guardrail(
                &first.text,
                leak,
                self.provider.as_ref(),
                call,
                cfg.max_code_lines,
                &self.retry,
                &observer,
            )
            .await?;
            Ok::<_, ProviderError>((first, guarded))
        }
        .await;
        for event in retries.lock().iter() {
            let _ = self.telemetry.event(&EventRecord::ProviderRetry {
                timestamp: Utc::now(),
                thread_id: thread_id.to_string(),
                attempt: event.attempt,
                error: event.error.clone(),
                backoff_ms: event.backoff.as_millis() as u64,
            });
        }
        let (first, guarded) = match outcome {
            Ok(done) => done,
            Err(e) => {
                let attempts = match &e {
                    ProviderError::Unavailable { attempts, .. } => *attempts,
                    _ => 1,
                };
                let err = ServiceError::Provider(e);
                self.log_failure(&session, awareness, &err, attempts, snapshot.config_version);
                return Err(err);
            }
        };

        let (prompt_tokens, completion_tokens) = guarded
            .regeneration
            .iter()
            .fold((first.prompt_tokens, first.completion_tokens), |(p, c), r| {
                (p + r.prompt_tokens, c + r.completion_tokens)
            });
        session.hint_state = hint_state;
        if task.is_some() {
            session.active_task_id = task_id.clone();
        }
        self.commit_turns(&mut session, &request.text, received_at, &guarded.text);
        let response = TutorResponse {
            text: guarded.text,
            scope,
            leak: guarded.report,
            usage: Usage {
                prompt_tokens,
                completion_tokens,
                cost: compute_cost(prompt_tokens, completion_tokens, &cfg.pricing),
            },
            interaction_id: new_interaction_id(),
        };
        self.log_interaction(
            &mut session,
            &snapshot,
            awareness,
            task_id.filter(|_| task.is_some()),
            &request.text,
            &response,
            started,
        );
        Ok(response)
    }

    fn commit_turns(&self, session: &mut SessionThread, question: &str, asked_at: DateTime<Utc>, answer: &str) {
        session.history.push(Message {
            role: Role::Student,
            text: question.to_string(),
            timestamp: asked_at,
        });
        session.history.push(Message {
            role: Role::Tutor,
            text: answer.to_string(),
            timestamp: Utc::now(),
        });
    }

    #[allow(clippy::too_many_arguments)]
    fn log_interaction(
        &self,
        session: &mut SessionThread,
        snapshot: &ConfigSnapshot,
        awareness: AwarenessLevel,
        task_id: Option<String>,
        question: &str,
        response: &TutorResponse,
        started: Instant,
    ) {
        let record = InteractionRecord {
            interaction_id: response.interaction_id.clone(),
            timestamp: session.next_record_time(),
            thread_id: session.thread_id.clone(),
            awareness,
            task_id,
            prompt_text: question.to_string(),
            response_text: response.text.clone(),
            prompt_tokens: response.usage.prompt_tokens,
            completion_tokens: response.usage.completion_tokens,
            cost: response.usage.cost,
            latency_ms: started.elapsed().as_millis() as u64,
            scope_verdict: response.scope.verdict,
            leak_action: response.leak.action_taken,
            config_version: snapshot.config_version,
        };
        // A lost record never fails the request; the sink counts it.
        let _ = self.telemetry.record(&record);
    }

    fn log_failure(
        &self,
        session: &SessionThread,
        awareness: AwarenessLevel,
        err: &ServiceError,
        attempts: u32,
        config_version: u64,
    ) {
        let _ = self.telemetry.event(&EventRecord::ProviderFailure {
            timestamp: Utc::now(),
            thread_id: session.thread_id.clone(),
            awareness,
            error: err.to_string(),
            attempts,
            config_version,
        });
    }
}

fn new_interaction_id() -> String {
    uuid::Uuid::new_v4().to_string()
}
