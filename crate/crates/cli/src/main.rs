//! `cadrefine` command line: single runs, benchmarks, and the HTTP server.

mod config;

use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use cadrefine::api::{self, ApiConfig, AppState};
use cadrefine::bench::{
    emit_report, execute_dataset, load_dataset, load_results, write_results, MetricsReport,
};
use cadrefine::executor::{mock_eval, mock_parse};
use cadrefine::feedback::{mailbox, FeedbackHub, FeedbackMode};
use cadrefine::llm::{ProviderKind, ProviderSpec};
use cadrefine::pipeline::{build_deps, RunSession};
use cadrefine::store::{EventBody, EventStore, FileStore};
use cadrefine::{PipelineConfig, RunStatus, SceneDescriptor};
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::FileConfig;

#[derive(Parser)]
#[command(
    name = "cadrefine",
    version,
    about = "Iterative text-to-CAD refinement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one query to completion and print the run record as JSON.
    Run(RunArgs),
    /// Compute success@k metrics, optionally executing the dataset first.
    Bench(BenchArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Auto,
    Interactive,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExecutorArg {
    Freecad,
    Mock,
}

#[derive(Clone, Copy, ValueEnum)]
enum LlmArg {
    Http,
    Replay,
}

#[derive(Args)]
struct Overrides {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    executor: Option<ExecutorArg>,
    #[arg(long, value_enum)]
    llm: Option<LlmArg>,
    /// Replay script (JSON object of named response lists).
    #[arg(long)]
    script: Option<PathBuf>,
    /// Run store directory.
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    query: String,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    error_iter: Option<u32>,
    #[arg(long)]
    model_iter: Option<u32>,
    /// In interactive mode captions are read from stdin, one per line.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Script name within the replay file.
    #[arg(long)]
    script_name: Option<String>,
    /// Reference for the stub scorer: a scene descriptor (JSON) or a mock-dialect macro.
    #[arg(long)]
    expected_scene: Option<PathBuf>,
    #[command(flatten)]
    common: Overrides,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Precomputed results JSONL.
    #[arg(long, conflicts_with = "execute", required_unless_present = "execute")]
    results: Option<PathBuf>,
    /// Run every dataset item through the pipeline.
    #[arg(long)]
    execute: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Largest k reported.
    #[arg(long)]
    k_max: Option<usize>,
    #[command(flatten)]
    common: Overrides,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    bind: Option<std::net::SocketAddr>,
    #[arg(long)]
    static_dir: Option<PathBuf>,
    #[arg(long)]
    reports_dir: Option<PathBuf>,
    #[command(flatten)]
    common: Overrides,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// File config, then flags.
fn resolve(common: &Overrides) -> Result<(FileConfig, PipelineConfig)> {
    let file = FileConfig::load(common.config.as_deref())?;
    let mut config = file.pipeline()?;
    if let Some(e) = common.executor {
        let (kind, prompts) = match e {
            ExecutorArg::Freecad => (cadrefine::pipeline::ExecutorKind::Freecad, "freecad"),
            ExecutorArg::Mock => (cadrefine::pipeline::ExecutorKind::Mock, "mock"),
        };
        config.executor_kind = kind;
        if file
            .pipeline
            .as_ref()
            .is_none_or(|t| !t.contains_key("prompt_set"))
        {
            config.prompt_set = prompts.into();
        }
    }
    match common.llm {
        Some(LlmArg::Replay) => {
            let script = common
                .script
                .clone()
                .or_else(|| config.llm_provider.script.clone())
                .context("--llm replay needs --script")?;
            config.llm_provider = ProviderSpec::replay(script, "default");
        }
        Some(LlmArg::Http) => {
            if config.llm_provider.kind != ProviderKind::HttpChat {
                config.llm_provider = ProviderSpec::default();
            }
        }
        None => {
            if let Some(script) = &common.script {
                config.llm_provider.script = Some(script.clone());
            }
        }
    }
    Ok((file, config))
}

fn store_dir(common: &Overrides, file: &FileConfig, fallback: &Path) -> PathBuf {
    common
        .store
        .clone()
        .or_else(|| file.store.clone())
        .unwrap_or_else(|| fallback.to_path_buf())
}

/// 0 success, 3 failure, 4 aborted.
fn status_code(status: RunStatus) -> ExitCode {
    match status {
        RunStatus::Success => ExitCode::SUCCESS,
        RunStatus::Failure => ExitCode::from(3),
        _ => ExitCode::from(4),
    }
}

fn cmd_run(a: RunArgs) -> Result<ExitCode> {
    let (file, mut config) = resolve(&a.common)?;
    if let Some(t) = a.threshold {
        config.threshold = t;
    }
    if let Some(e) = a.error_iter {
        config.error_iter = e;
    }
    if let Some(m) = a.model_iter {
        config.model_iter = m;
    }
    if let Some(mode) = a.mode {
        config.feedback_mode = match mode {
            ModeArg::Auto => FeedbackMode::Auto,
            ModeArg::Interactive => FeedbackMode::Interactive,
        };
    }
    if let Some(name) = a.script_name {
        config.llm_provider.script_name = Some(name);
    }
    config.validate().map_err(anyhow::Error::msg)?;

    let store = FileStore::open(store_dir(&a.common, &file, Path::new("runs")))?;
    let mut backends = file.backends();
    if let Some(path) = &a.expected_scene {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        backends.expected_scene = Some(
            reference_scene(&text)
                .map_err(|e| anyhow::anyhow!("parsing reference {}: {e}", path.display()))?,
        );
    }
    let deps = build_deps(&config, &backends).map_err(anyhow::Error::msg)?;

    let (tx, rx) = mailbox();
    if config.feedback_mode == FeedbackMode::Interactive {
        std::thread::spawn(move || {
            for line in std::io::stdin().lock().lines() {
                let Ok(line) = line else { break };
                if !tx.send(line) {
                    break;
                }
            }
        });
    } else {
        drop(tx);
    }

    let interactive = config.feedback_mode == FeedbackMode::Interactive;
    let session = RunSession::begin(&store, None, &a.query, config)?;
    let run_id = session.run_id().to_string();
    eprintln!("run {run_id}");
    let done = AtomicBool::new(false);
    let record = std::thread::scope(|s| {
        if interactive {
            s.spawn(|| prompt_captions(&store, &run_id, &done));
        }
        let r = session.drive(&deps.borrow(&store, Some(&rx)));
        done.store(true, Ordering::Relaxed);
        r
    })?;
    println!("{}", serde_json::to_string_pretty(&record)?);
    Ok(status_code(record.status))
}

/// Tells the operator on stderr when a caption is wanted.
fn prompt_captions(store: &FileStore, run_id: &str, done: &AtomicBool) {
    let mut seen = 0;
    while !done.load(Ordering::Relaxed) {
        if let Ok(events) = store.events(run_id) {
            for ev in events.iter().skip(seen) {
                if let EventBody::CaptionRequested {
                    attempt,
                    machine_caption,
                    deadline,
                    ..
                } = &ev.body
                {
                    let machine = machine_caption
                        .as_ref()
                        .map_or("(none)", |c| c.text.as_str());
                    eprintln!(
                        "caption requested for attempt {attempt}; machine caption: {machine}\n\
                         type a caption and press enter before {deadline}"
                    );
                }
            }
            seen = events.len();
        }
        std::thread::sleep(Duration::from_millis(50));
    }
}

fn cmd_bench(a: BenchArgs) -> Result<ExitCode> {
    let items = load_dataset(&a.dataset)
        .with_context(|| format!("loading dataset {}", a.dataset.display()))?;
    std::fs::create_dir_all(&a.out)?;

    let rows = if let Some(results) = &a.results {
        let rows = load_results(results)
            .with_context(|| format!("loading results {}", results.display()))?;
        let known: std::collections::HashMap<_, _> = items
            .iter()
            .map(|i| (i.id.as_str(), i.difficulty))
            .collect();
        for row in &rows {
            match known.get(row.item_id.as_str()) {
                None => bail!("result row '{}' is not in the dataset", row.item_id),
                Some(d) if *d != row.difficulty => bail!(
                    "result row '{}' has difficulty {} but the dataset says {}",
                    row.item_id,
                    row.difficulty,
                    d
                ),
                _ => {}
            }
        }
        rows
    } else {
        let (file, config) = resolve(&a.common)?;
        config.validate().map_err(anyhow::Error::msg)?;
        let store = FileStore::open(store_dir(&a.common, &file, &a.out.join("runs")))?;
        let backends = file.backends();
        let factory = |item: &cadrefine::bench::DatasetItem, config: &PipelineConfig| {
            let mut b = backends.clone();
            b.expected_scene = item.expected_scene.clone();
            build_deps(config, &b)
        };
        let outcomes = execute_dataset(&items, &config, &store, a.jobs, &factory);
        let mut rows = Vec::new();
        for o in &outcomes {
            match (&o.result, o.row()) {
                (_, Some(row)) => rows.push(row),
                (Err(e), None) => eprintln!("{}: error: {e}", o.item_id),
                (Ok(rec), None) => eprintln!(
                    "{}: run {} ended {:?}{}",
                    o.item_id,
                    rec.run_id,
                    rec.status,
                    rec.cause
                        .as_deref()
                        .map(|c| format!(": {c}"))
                        .unwrap_or_default()
                ),
            }
        }
        write_results(&a.out.join("results.jsonl"), &rows)?;
        rows
    };

    let report = MetricsReport::from_rows(&rows, a.k_max.unwrap_or(0))?;
    for path in emit_report(&report, &a.out)? {
        eprintln!("wrote {}", path.display());
    }
    print!("{}", cadrefine::bench::render_markdown(&report));
    Ok(ExitCode::SUCCESS)
}

fn cmd_serve(a: ServeArgs) -> Result<ExitCode> {
    let (file, config) = resolve(&a.common)?;
    config.validate().map_err(anyhow::Error::msg)?;
    let store: Arc<dyn EventStore> = Arc::new(FileStore::open(store_dir(
        &a.common,
        &file,
        Path::new("runs"),
    ))?);
    let backends = file.backends();
    let launcher = move |c: &PipelineConfig| build_deps(c, &backends);

    let mut api = ApiConfig::default();
    if let Some(bind) = a.bind.or(file.serve.bind) {
        api.bind = bind;
    }
    api.static_dir = a.static_dir.or(file.serve.static_dir.clone());
    api.reports_dir = a.reports_dir.or(file.serve.reports_dir.clone());
    api.auth_token = file
        .serve
        .auth_token
        .clone()
        .or_else(|| std::env::var("CADREFINE_TOKEN").ok());
    if let Some(s) = file.serve.long_poll {
        api.long_poll = Duration::from_secs_f64(s);
    }

    let state = AppState {
        store,
        hub: Arc::new(FeedbackHub::new()),
        launcher: Arc::new(launcher),
        base_config: config,
        api,
    };
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    rt.block_on(api::serve(state))?;
    Ok(ExitCode::SUCCESS)
}

/// A scene descriptor as JSON, or failing that a mock macro to evaluate.
fn reference_scene(text: &str) -> Result<SceneDescriptor, String> {
    if text.trim_start().starts_with('{') {
        return serde_json::from_str(text).map_err(|e| e.to_string());
    }
    let program = mock_parse(text).map_err(|e| e.to_string())?;
    mock_eval(&program).map_err(|e| e.to_string())
}
