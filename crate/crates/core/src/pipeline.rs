//! Batch orchestration and the line-delimited file formats: task files,
//! result files, reports, transcript logs, and training-segment exports.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    AgentPolicy, CategorySelector, EPlanSolvePolicy, EReactPolicy, IdentitySelector, ModelBackend,
    PlanSolvePolicy, ReactPolicy, Selector,
};
use crate::episode::{replay, run_episode, EpisodeConfig, EpisodeOutcome, Limits, LogRecord};
use crate::forge::{self, GenConfig, TaskSpec};
use crate::score::{self, Judge, Report, ScoreRecord};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {problem}")]
    Malformed {
        path: String,
        line: usize,
        problem: String,
    },
    #[error("agent kind {0:?} requires a model backend (configure a backend URL)")]
    BackendRequired(AgentKind),
    #[error("unknown task id {0:?}")]
    UnknownTask(String),
    #[error("world error: {0}")]
    World(#[from] crate::world::WorldError),
    #[error("replay divergence: {0}")]
    Replay(#[from] crate::episode::ReplayError),
    #[error("scoring error: {0}")]
    Score(#[from] score::ScoreError),
}

// ---------------------------------------------------------------------------
// Agent and selector kinds
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    Scripted,
    React,
    EReact,
    PlanSolve,
    EPlanSolve,
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scripted" => Ok(AgentKind::Scripted),
            "react" => Ok(AgentKind::React),
            "e-react" => Ok(AgentKind::EReact),
            "plan-solve" => Ok(AgentKind::PlanSolve),
            "e-plan-solve" => Ok(AgentKind::EPlanSolve),
            other => Err(format!(
                "unknown agent kind {other:?} (expected scripted, react, e-react, plan-solve, e-plan-solve)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectorKind {
    Identity,
    Category,
}

impl FromStr for SelectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(SelectorKind::Identity),
            "category" => Ok(SelectorKind::Category),
            other => Err(format!(
                "unknown selector kind {other:?} (expected identity, category)"
            )),
        }
    }
}

impl SelectorKind {
    pub fn build(self) -> Box<dyn Selector> {
        match self {
            SelectorKind::Identity => Box::new(IdentitySelector),
            SelectorKind::Category => Box::new(CategorySelector),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub agent: AgentKind,
    pub selector: SelectorKind,
    pub seed: u64,
    pub limits: Limits,
    pub multimodal: bool,
}

impl Default for RunOptions {
    fn default() -> RunOptions {
        RunOptions {
            agent: AgentKind::Scripted,
            selector: SelectorKind::Category,
            seed: 7,
            limits: Limits::default(),
            multimodal: true,
        }
    }
}

/// One line of a results file: the score plus the full episode outcome
/// (transcript, trajectory, final snapshot, replayable log).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub score: ScoreRecord,
    pub outcome: EpisodeOutcome,
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

fn build_policy(
    task: &TaskSpec,
    opts: &RunOptions,
    backend: Option<&Arc<dyn ModelBackend>>,
) -> Result<Box<dyn AgentPolicy>, PipelineError> {
    let need_backend = || -> Result<Arc<dyn ModelBackend>, PipelineError> {
        backend
            .cloned()
            .ok_or(PipelineError::BackendRequired(opts.agent))
    };
    Ok(match opts.agent {
        AgentKind::Scripted => Box::new(task.oracle_policy()),
        AgentKind::React => Box::new(ReactPolicy::new(need_backend()?, opts.seed)),
        AgentKind::EReact => Box::new(EReactPolicy::new(
            need_backend()?,
            opts.seed,
            opts.selector.build(),
        )),
        AgentKind::PlanSolve => Box::new(PlanSolvePolicy::new(need_backend()?, opts.seed)),
        AgentKind::EPlanSolve => Box::new(EPlanSolvePolicy::new(
            need_backend()?,
            opts.seed,
            opts.selector.build(),
        )),
    })
}

/// Run one task and score the outcome. With no judge configured, each
/// task gets the deterministic fallback judge built from its own world's
/// brand vocabulary.
pub fn run_single(
    task: &TaskSpec,
    opts: &RunOptions,
    backend: Option<&Arc<dyn ModelBackend>>,
    judge: Option<&dyn Judge>,
) -> Result<RunRecord, PipelineError> {
    let mut policy = build_policy(task, opts, backend)?;
    let outcome = run_episode(
        EpisodeConfig {
            world: task.initial_state()?,
            assets: task.marker_assets(),
            preattached: task.upfront_assets(),
            limits: opts.limits,
            multimodal: opts.multimodal,
        },
        policy.as_mut(),
        Box::new(task.scripted_user()),
    );
    let score = match judge {
        Some(judge) => forge::score_outcome(task, &outcome, judge),
        None => {
            let fallback = score::FallbackJudge::for_world(&task.initial_world);
            forge::score_outcome(task, &outcome, &fallback)
        }
    };
    Ok(RunRecord { score, outcome })
}

/// Run a batch sequentially in task order (episodes are independent;
/// callers that want parallelism can shard the task list).
pub fn run_tasks(
    tasks: &[TaskSpec],
    opts: &RunOptions,
    backend: Option<&Arc<dyn ModelBackend>>,
    judge: Option<&dyn Judge>,
) -> Result<Vec<RunRecord>, PipelineError> {
    tasks
        .iter()
        .map(|t| run_single(t, opts, backend, judge))
        .collect()
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), PipelineError> {
    let io_err = |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = fs::File::create(path).map_err(io_err)?;
    for item in items {
        let line = serde_json::to_string(item).expect("record serializes");
        file.write_all(line.as_bytes()).map_err(io_err)?;
        file.write_all(b"\n").map_err(io_err)?;
    }
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let io_err = |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = fs::File::open(path).map_err(io_err)?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| PipelineError::Malformed {
            path: path.display().to_string(),
            line: i + 1,
            problem: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

pub fn read_tasks(path: &Path) -> Result<Vec<TaskSpec>, PipelineError> {
    read_jsonl(path)
}

pub fn read_results(path: &Path) -> Result<Vec<RunRecord>, PipelineError> {
    read_jsonl(path)
}

/// Generate tasks and write the task file. Returns the task count.
pub fn generate_to_file(cfg: &GenConfig, out: &Path) -> Result<usize, PipelineError> {
    let tasks = forge::generate_tasks(cfg);
    write_jsonl(out, &tasks)?;
    Ok(tasks.len())
}

/// Run a task file and write the results file; optionally dump each
/// episode's transcript log as `<task_id>.jsonl` under `logs_dir`.
pub fn run_to_file(
    tasks_path: &Path,
    out: &Path,
    logs_dir: Option<&Path>,
    opts: &RunOptions,
    backend: Option<&Arc<dyn ModelBackend>>,
    judge: Option<&dyn Judge>,
) -> Result<Report, PipelineError> {
    let tasks = read_tasks(tasks_path)?;
    let records = run_tasks(&tasks, opts, backend, judge)?;
    if let Some(dir) = logs_dir {
        fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        for record in &records {
            let path = dir.join(format!("{}.jsonl", record.score.task_id));
            write_jsonl(&path, &record.outcome.log)?;
        }
    }
    write_jsonl(out, &records)?;
    let report = score::aggregate(&records.iter().map(|r| r.score.clone()).collect::<Vec<_>>())?;
    Ok(report)
}

/// Aggregate a results file into a report; writes the JSON report next to
/// an aligned text table.
pub fn evaluate_file(results_path: &Path, report_path: &Path) -> Result<Report, PipelineError> {
    let records = read_results(results_path)?;
    let scores: Vec<ScoreRecord> = records.into_iter().map(|r| r.score).collect();
    let report = score::aggregate(&scores)?;
    let io_err = |source| PipelineError::Io {
        path: report_path.display().to_string(),
        source,
    };
    let mut body = serde_json::to_string_pretty(&report).expect("report serializes");
    body.push('\n');
    fs::write(report_path, body).map_err(io_err)?;
    let table_path = report_path.with_extension("txt");
    fs::write(&table_path, score::render_report(&report)).map_err(|source| PipelineError::Io {
        path: table_path.display().to_string(),
        source,
    })?;
    Ok(report)
}

/// Export supervised fine-tuning segments from a results file.
pub fn export_sft_file(results_path: &Path, out: &Path) -> Result<usize, PipelineError> {
    let records = read_results(results_path)?;
    let outcomes: Vec<&EpisodeOutcome> = records.iter().map(|r| &r.outcome).collect();
    let segments = forge::export_training_segments(&outcomes);
    write_jsonl(out, &segments)?;
    Ok(segments.len())
}

/// Re-execute a transcript log against its task's initial world and check
/// byte-identical observations. The task is found by explicit id or the
/// log file's stem.
pub fn replay_log_file(
    log_path: &Path,
    tasks_path: &Path,
    task_id: Option<&str>,
) -> Result<EpisodeOutcome, PipelineError> {
    let log: Vec<LogRecord> = read_jsonl(log_path)?;
    let tasks = read_tasks(tasks_path)?;
    let wanted = match task_id {
        Some(id) => id.to_string(),
        None => log_path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_default(),
    };
    let task = tasks
        .iter()
        .find(|t| t.task_id == wanted)
        .ok_or_else(|| PipelineError::UnknownTask(wanted.clone()))?;
    let outcome = replay(
        &log,
        task.initial_state()?,
        task.marker_assets(),
        Limits::default(),
        true,
    )?;
    Ok(outcome)
}
