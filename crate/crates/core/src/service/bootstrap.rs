use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use super::{EmbeddingSettings, ProviderSettings, ServiceConfig, ServiceError, TutorService};
use crate::kb::{EmbeddingProvider, OfflineEmbedder, VectorIndex};
use crate::policy::SystemPromptTemplate;
use crate::provider::{CompletionProvider, HttpChatProvider, HttpEmbeddingProvider, MockProvider};
use crate::telemetry::TelemetrySink;

pub fn completion_provider(
    settings: &ProviderSettings,
    request_timeout: Duration,
) -> Result<Arc<dyn CompletionProvider>, ServiceError> {
    Ok(match settings {
        ProviderSettings::Http(config) => {
            Arc::new(HttpChatProvider::new(config.clone().with_env_key(), request_timeout)?)
        }
        ProviderSettings::Mock { script, cycle } => {
            let mock = MockProvider::new(script.clone())?;
            Arc::new(if *cycle { mock.cycling() } else { mock })
        }
    })
}

/// The offline embedder takes its dimension from the index it must match.
pub fn embedding_provider(
    config: &ServiceConfig,
    index_dimension: usize,
) -> Result<Arc<dyn EmbeddingProvider<f64>>, ServiceError> {
    Ok(match &config.embedding {
        EmbeddingSettings::Offline => Arc::new(OfflineEmbedder::with_dimension(index_dimension)),
        EmbeddingSettings::Http { provider, dimension } => Arc::new(HttpEmbeddingProvider::new(
            provider.clone().with_env_key(),
            *dimension,
            config.retry.into(),
            Duration::from_millis(config.request_timeout_ms),
        )?),
    })
}

/// Template files are resolved relative to `base_dir`.
pub fn load_templates(config: &ServiceConfig, base_dir: &Path) -> Result<Vec<SystemPromptTemplate>, ServiceError> {
    config
        .system_prompts
        .iter()
        .map(|t| {
            let path = base_dir.join(&t.path);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| ServiceError::Startup(format!("{}: {e}", path.display())))?;
            SystemPromptTemplate::parse(t.version.clone(), text)
                .map_err(|e| ServiceError::Startup(format!("{}: {e}", path.display())))
        })
        .collect()
}

impl TutorService {
    /// Wires a service from a parsed config file. `config_dir` anchors
    /// relative template paths.
    pub fn from_config(
        config: &ServiceConfig,
        config_dir: &Path,
        index: VectorIndex<f64>,
        tasks_path: Option<&Path>,
        telemetry: TelemetrySink,
    ) -> Result<Self, ServiceError> {
        let timeout = Duration::from_millis(config.request_timeout_ms);
        let embedder = embedding_provider(config, index.dimension())?;
        let provider = completion_provider(&config.provider, timeout)?;
        let mut builder = TutorService::builder(index, embedder, provider, telemetry)
            .runtime(config.runtime.clone())
            .retry(config.retry.into());
        for template in load_templates(config, config_dir)? {
            builder = builder.template(template);
        }
        if let Some(path) = tasks_path {
            builder = builder.tasks_file(path)?;
        }
        builder.build()
    }
}
