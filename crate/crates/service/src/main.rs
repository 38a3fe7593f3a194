use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use placewise_core::scene::{parse_scene, ParseMode, TaskDescription};
use placewise_service::bench::{load_suite, run_benchmark, DEFAULT_REPETITIONS};
use placewise_service::{
    DensityFormat, PipelineConfig, PipelineError, Planner, ReasonerKind, RunRecord, RunStore, Service, Stage,
};

#[derive(Parser)]
#[command(name = "placewise", version, about = "Stable, task-aware placement recommendations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan placements for one scene file.
    Plan {
        scene: PathBuf,
        #[arg(long)]
        task: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        reasoner: Option<ReasonerKind>,
        #[arg(long)]
        seed: Option<u64>,
        /// Writes plan.json, sweep.csv and density.bin here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also append the run to this store.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Run a directory of scenario manifests.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long, default_value_t = DEFAULT_REPETITIONS)]
        reps: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        reasoner: Option<ReasonerKind>,
        /// Report JSON destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the REST API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "runs.jsonl")]
        store: PathBuf,
    },
    /// Write a stored run's density lattice.
    ExportDensity {
        run_id: String,
        #[arg(long, default_value = "text")]
        format: String,
        #[arg(long, default_value = "runs.jsonl")]
        store: PathBuf,
        /// Standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, PipelineError> {
    path.map_or_else(|| Ok(PipelineConfig::default()), PipelineConfig::load)
}

fn io_err(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::new(Stage::Store, "io", format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Plan { scene, task, config, reasoner, seed, out, store } => {
            let mut cfg = load_config(config.as_deref())?;
            cfg.reasoner = reasoner.unwrap_or(cfg.reasoner);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let text = std::fs::read_to_string(&scene).map_err(|e| io_err(&scene, e))?;
            let parsed = parse_scene(&text, ParseMode::Lenient)
                .map_err(|e| PipelineError::new(Stage::Ingest, "invalid_scene", e.to_string()))?;
            for w in &parsed.warnings {
                log::warn!("{w}");
            }
            let planner = Planner::from_config(&cfg)?;
            let task = TaskDescription::new(task);
            let art = planner.plan(&parsed.scene, &task, &cfg)?;
            let json = serde_json::to_string_pretty(&art.result).expect("plan results serialize");
            println!("{json}");
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
                write_file(&dir.join("plan.json"), json.as_bytes())?;
                let (sweep, _) = planner.sweep(&parsed.scene, &cfg)?;
                write_file(&dir.join("sweep.csv"), sweep.outcome.diagnostics.to_csv().as_bytes())?;
                if let (Some(support), Some(d)) = (&art.support, &art.result.density) {
                    let grid = placewise_service::pipeline::render_density(support, &cfg, d.grid)?;
                    write_file(&dir.join("density.bin"), &grid.to_binary())?;
                }
            }
            if let Some(path) = store {
                let record = RunRecord::new(None, parsed.scene, task, Vec::new(), cfg, art);
                RunStore::open(&path)?.add_run(record)?;
            }
        }
        Command::Bench { suite, reps, config, reasoner, out } => {
            let mut cfg = load_config(config.as_deref())?;
            cfg.reasoner = reasoner.unwrap_or(cfg.reasoner);
            let scenarios = load_suite(&suite)?;
            let planner = Planner::from_config(&cfg)?;
            let report = run_benchmark(&planner, &scenarios, reps, &cfg)?;
            print!("{}", report.to_table());
            if let Some(path) = out {
                write_file(&path, report.to_json().as_bytes())?;
            }
        }
        Command::Serve { bind, config, store } => {
            let cfg = load_config(config.as_deref())?;
            let svc = Arc::new(Service::new(Planner::from_config(&cfg)?, RunStore::open(&store)?, cfg));
            let rt = tokio::runtime::Runtime::new()
                .map_err(|e| PipelineError::new(Stage::Config, "runtime", e.to_string()))?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&bind)
                    .await
                    .map_err(|e| PipelineError::new(Stage::Config, "bind", format!("{bind}: {e}")))?;
                log::info!("listening on {}", listener.local_addr().map(|a| a.to_string()).unwrap_or(bind));
                let stop = async {
                    let _ = tokio::signal::ctrl_c().await;
                };
                placewise_service::api::serve(listener, svc, stop)
                    .await
                    .map_err(|e| PipelineError::new(Stage::Config, "serve", e.to_string()))
            })?;
        }
        Command::ExportDensity { run_id, format, store, out } => {
            let format: DensityFormat = format.parse()?;
            let svc = Service::new(Planner::default(), RunStore::open(&store)?, PipelineConfig::default());
            let bytes = svc.density(&run_id, format)?;
            match out {
                Some(path) => write_file(&path, &bytes)?,
                None => std::io::stdout().write_all(&bytes).map_err(|e| io_err(Path::new("stdout"), e))?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e).expect("errors serialize"));
            ExitCode::FAILURE
        }
    }
}
