use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use tutor_core::analytics::{
    category_stats, merge_interactions, read_interaction_log, MergedInteraction, StatsFormat, TagTable,
    DEFAULT_MERGE_WINDOW_SECS,
};
use tutor_core::kb::{
    build_index, chunk_document, load_index, load_materials, save_index, ChunkingPolicy, OfflineEmbedder,
    OFFLINE_DIMENSION,
};
use tutor_core::policy::AwarenessLevel;
use tutor_core::service::{embedding_provider, http, EmbeddingSettings, ServiceConfig, TutorService};
use tutor_core::telemetry::{SinkConfig, TelemetrySink};

#[derive(Parser)]
#[command(name = "tutor", version, about = "Course-aware tutoring service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Chunk and embed course materials into an index file.
    Ingest(IngestArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
    /// Offline log analysis.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    materials: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1200)]
    chunk_size: usize,
    #[arg(long, default_value_t = 200)]
    overlap: usize,
    /// Vector size of the offline embedder.
    #[arg(long, default_value_t = OFFLINE_DIMENSION)]
    dimension: usize,
    /// Service config whose `embedding` section selects a remote embedder.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    tasks: PathBuf,
    /// Directory for interaction and event logs.
    #[arg(long)]
    log: PathBuf,
    /// Overrides `bind` from the config file.
    #[arg(long)]
    bind: Option<SocketAddr>,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Merge split questions from a log directory.
    Merge {
        #[arg(long)]
        log: PathBuf,
        /// Maximum gap in seconds between parts of one question.
        #[arg(long, default_value_t = DEFAULT_MERGE_WINDOW_SECS)]
        window: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Set the category of a merged interaction.
    Tag {
        #[arg(long)]
        merged: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long)]
        category: String,
        /// Defaults to `tags.json` next to the merged file.
        #[arg(long)]
        tags: Option<PathBuf>,
    },
    /// Count tagged interactions per category.
    Stats {
        #[arg(long)]
        merged: PathBuf,
        /// Defaults to `tags.json` next to the merged file.
        #[arg(long)]
        tags: Option<PathBuf>,
        #[arg(long, default_value = "table")]
        format: StatsFormat,
        /// Count only interactions at this awareness level.
        #[arg(long)]
        awareness: Option<AwarenessLevel>,
    },
}

#[tokio::main]
async fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Ingest(args) => ingest(args).await,
        Command::Serve(args) => serve(args).await,
        Command::Analyze(cmd) => analyze(cmd),
    }
}

fn read_service_config(path: &Path) -> Result<ServiceConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

async fn ingest(args: IngestArgs) -> Result<()> {
    let policy = ChunkingPolicy::new(args.chunk_size, args.overlap)?;
    let docs = load_materials(&args.materials).with_context(|| format!("loading {}", args.materials.display()))?;
    let mut chunks = Vec::new();
    for doc in &docs {
        chunks.extend(chunk_document(doc, &policy)?);
    }
    let embedder = match &args.config {
        Some(path) => {
            let config = read_service_config(path)?;
            if matches!(config.embedding, EmbeddingSettings::Offline) {
                Arc::new(OfflineEmbedder::with_dimension(args.dimension))
            } else {
                embedding_provider(&config, args.dimension)?
            }
        }
        None => Arc::new(OfflineEmbedder::with_dimension(args.dimension)) as _,
    };
    let index = build_index(chunks, embedder.as_ref()).await?;
    save_index(&index, &args.out)?;
    println!(
        "indexed {} documents into {} chunks (dimension {}) -> {}",
        docs.len(),
        index.len(),
        index.dimension(),
        args.out.display()
    );
    Ok(())
}

async fn serve(args: ServeArgs) -> Result<()> {
    let config = read_service_config(&args.config)?;
    let index = load_index(&args.index).with_context(|| format!("loading {}", args.index.display()))?;
    let mut sink_config = SinkConfig::new(&args.log);
    sink_config.fsync = config.telemetry.fsync;
    if let Some(capacity) = config.telemetry.queue_capacity {
        sink_config.queue_capacity = capacity;
    }
    let telemetry = TelemetrySink::start(sink_config);
    let config_dir = args.config.parent().unwrap_or(Path::new("."));
    let service = Arc::new(TutorService::from_config(
        &config,
        config_dir,
        index,
        Some(&args.tasks),
        telemetry.clone(),
    )?);
    spawn_reload_on_hangup(service.clone());

    let addr: SocketAddr = match args.bind {
        Some(addr) => addr,
        None => config
            .bind
            .parse()
            .with_context(|| format!("invalid bind address `{}`", config.bind))?,
    };
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, http::router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    telemetry.flush().await;
    tracing::info!(
        written = telemetry.written(),
        dropped = telemetry.dropped(),
        "telemetry flushed"
    );
    Ok(())
}

#[cfg(unix)]
fn spawn_reload_on_hangup(service: Arc<TutorService>) {
    use tokio::signal::unix::{signal, SignalKind};
    let Ok(mut hangups) = signal(SignalKind::hangup()) else {
        tracing::warn!("SIGHUP handler unavailable; task reload disabled");
        return;
    };
    tokio::spawn(async move {
        while hangups.recv().await.is_some() {
            match service.reload_tasks() {
                Ok(count) => tracing::info!(count, "tasks reloaded"),
                Err(e) => tracing::error!(error = %e, "task reload failed; keeping previous tasks"),
            }
        }
    });
}

#[cfg(not(unix))]
fn spawn_reload_on_hangup(_service: Arc<TutorService>) {}

fn sibling_tags(merged: &Path) -> PathBuf {
    merged.with_file_name("tags.json")
}

fn read_merged(path: &Path) -> Result<Vec<MergedInteraction>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn analyze(cmd: AnalyzeCommand) -> Result<()> {
    match cmd {
        AnalyzeCommand::Merge { log, window, out } => {
            let records = read_interaction_log(&log)?;
            let merged = merge_interactions(&records, window)?;
            let mut text = serde_json::to_string_pretty(&merged)?;
            text.push('\n');
            std::fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
            println!("merged {} records into {} interactions", records.len(), merged.len());
        }
        AnalyzeCommand::Tag {
            merged,
            id,
            category,
            tags,
        } => {
            let tags_path = tags.unwrap_or_else(|| sibling_tags(&merged));
            let all = read_merged(&merged)?;
            let mut table = TagTable::load(&tags_path)?;
            let category = table.tag(&all, &id, &category)?;
            table.save(&tags_path)?;
            println!("{id} -> {category}");
        }
        AnalyzeCommand::Stats {
            merged,
            tags,
            format,
            awareness,
        } => {
            let tags_path = tags.unwrap_or_else(|| sibling_tags(&merged));
            let all = read_merged(&merged)?;
            if !tags_path.exists() {
                bail!("tag file {} not found", tags_path.display());
            }
            let table = TagTable::load(&tags_path)?;
            print!("{}", category_stats(&all, &table, awareness).render(format));
        }
    }
    Ok(())
}
