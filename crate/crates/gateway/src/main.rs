//! The `ecom` CLI: generate tasks, run agents, evaluate results, serve the
//! HTTP session API, replay transcript logs, and export training segments.

use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use ecom_core::agents::ModelBackend;
use ecom_core::episode::Limits;
use ecom_core::forge::GenConfig;
use ecom_core::pipeline::{self, AgentKind, RunOptions, SelectorKind};
use ecom_core::score::{FallbackJudge, Judge, RemoteJudge};
use ecom_core::TaskFamily;

use ecom_gateway::backend::{HttpChatBackend, BACKEND_KEY_ENV, JUDGE_KEY_ENV};

#[derive(Parser)]
#[command(
    name = "ecom",
    version,
    about = "E-commerce customer-service agent environment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a validated task file.
    Gen {
        /// logistics | pre-sales | after-sales (omit for a mixed batch)
        #[arg(long)]
        family: Option<String>,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an agent over a task file and write scored results.
    Run(RunArgs),
    /// Aggregate a results file into a report (JSON + text table).
    Eval {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Serve the HTTP session API for external agents.
    Serve {
        #[arg(long, default_value_t = 8089)]
        port: u16,
        #[arg(long)]
        tasks: PathBuf,
        /// Strip asset payloads (markers only).
        #[arg(long)]
        no_multimodal: bool,
    },
    /// Re-execute a transcript log and verify byte-identical observations.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        /// Defaults to the log file's stem.
        #[arg(long)]
        task_id: Option<String>,
    },
    /// Export supervised fine-tuning segments from a results file.
    ExportSft {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    tasks: Option<PathBuf>,
    /// scripted | react | e-react | plan-solve | e-plan-solve
    #[arg(long)]
    agent: Option<String>,
    /// Chat-completion endpoint URL for model-backed agents.
    #[arg(long)]
    backend_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// identity | category
    #[arg(long)]
    selector: Option<String>,
    /// Chat-completion endpoint URL for the scoring judge (deterministic
    /// fallback judge when omitted).
    #[arg(long)]
    judge_url: Option<String>,
    #[arg(long)]
    judge_model: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for per-episode transcript logs.
    #[arg(long)]
    logs_dir: Option<PathBuf>,
    /// Strip asset payloads to reproduce the no-multimodal ablation.
    #[arg(long)]
    no_multimodal: bool,
}

/// The run config file: every key optional, flags win.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFileConfig {
    tasks: Option<PathBuf>,
    agent: Option<String>,
    backend_url: Option<String>,
    model: Option<String>,
    selector: Option<String>,
    judge_url: Option<String>,
    judge_model: Option<String>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    logs_dir: Option<PathBuf>,
    multimodal: Option<bool>,
}

fn parse_family(s: &str) -> anyhow::Result<TaskFamily> {
    TaskFamily::ALL
        .into_iter()
        .find(|f| f.as_str() == s)
        .with_context(|| format!("unknown family {s:?} (logistics, pre-sales, after-sales)"))
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen {
            family,
            count,
            seed,
            out,
        } => {
            let family = family.as_deref().map(parse_family).transpose()?;
            let cfg = GenConfig::new(seed, count, family);
            let n = pipeline::generate_to_file(&cfg, &out)?;
            println!("wrote {n} tasks to {}", out.display());
        }
        Command::Run(args) => run_command(args)?,
        Command::Eval { results, report } => {
            let summary = pipeline::evaluate_file(&results, &report)?;
            print!("{}", ecom_core::score::render_report(&summary));
            println!("report written to {}", report.display());
        }
        Command::Serve {
            port,
            tasks,
            no_multimodal,
        } => {
            let task_list = pipeline::read_tasks(&tasks)?;
            if task_list.is_empty() {
                bail!("task file {} is empty", tasks.display());
            }
            println!("serving {} tasks on port {port}", task_list.len());
            let state = Arc::new(ecom_gateway::AppState::new(
                task_list,
                Limits::default(),
                !no_multimodal,
            ));
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(ecom_gateway::serve(state, port))?;
        }
        Command::Replay {
            log,
            tasks,
            task_id,
        } => {
            let outcome = pipeline::replay_log_file(&log, &tasks, task_id.as_deref())?;
            println!(
                "replay ok: termination {:?}, {} tool calls, final version {}",
                outcome.termination, outcome.tool_call_count, outcome.final_snapshot.version
            );
        }
        Command::ExportSft { results, out } => {
            let n = pipeline::export_sft_file(&results, &out)?;
            println!("wrote {n} segments to {}", out.display());
        }
    }
    Ok(())
}

fn run_command(args: RunArgs) -> anyhow::Result<()> {
    let file: RunFileConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => RunFileConfig::default(),
    };
    let tasks = args
        .tasks
        .or(file.tasks)
        .context("missing --tasks (or `tasks` in the config file)")?;
    let out = args
        .out
        .or(file.out)
        .context("missing --out (or `out` in the config file)")?;
    let agent_name = args
        .agent
        .or(file.agent)
        .unwrap_or_else(|| "scripted".to_string());
    let agent = AgentKind::from_str(&agent_name).map_err(anyhow::Error::msg)?;
    let selector_name = args
        .selector
        .or(file.selector)
        .unwrap_or_else(|| "category".to_string());
    let selector = SelectorKind::from_str(&selector_name).map_err(anyhow::Error::msg)?;
    let seed = args.seed.or(file.seed).unwrap_or(7);
    let multimodal = if args.no_multimodal {
        false
    } else {
        file.multimodal.unwrap_or(true)
    };
    let logs_dir = args.logs_dir.or(file.logs_dir);

    let backend: Option<Arc<dyn ModelBackend>> = match args.backend_url.or(file.backend_url) {
        Some(url) => {
            let model = args
                .model
                .or(file.model)
                .unwrap_or_else(|| "default".to_string());
            Some(Arc::new(HttpChatBackend::from_env(
                &url,
                &model,
                BACKEND_KEY_ENV,
            )))
        }
        None => None,
    };
    let judge: Option<Box<dyn Judge>> = match args.judge_url.or(file.judge_url) {
        Some(url) => {
            let model = args
                .judge_model
                .or(file.judge_model)
                .unwrap_or_else(|| "default".to_string());
            let judge_backend: Arc<dyn ModelBackend> =
                Arc::new(HttpChatBackend::from_env(&url, &model, JUDGE_KEY_ENV));
            Some(Box::new(RemoteJudge::new(
                judge_backend,
                seed,
                FallbackJudge::new(Vec::<String>::new()),
            )))
        }
        None => None,
    };

    let opts = RunOptions {
        agent,
        selector,
        seed,
        limits: Limits::default(),
        multimodal,
    };
    let report = pipeline::run_to_file(
        &tasks,
        &out,
        logs_dir.as_deref(),
        &opts,
        backend.as_ref(),
        judge.as_deref(),
    )?;
    print!("{}", ecom_core::score::render_report(&report));
    println!("results written to {}", out.display());
    Ok(())
}
