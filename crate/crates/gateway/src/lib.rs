//! HTTP session service: exposes the environment to external agents over
//! the same tagged protocol the in-process runner uses, one isolated
//! session per episode.
//!
//! The hidden database is never serialized by any endpoint; agents only
//! ever see it through tool observations.

pub mod backend;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use ecom_core::episode::{EpisodeSession, Limits, StepFeedback, Termination};
use ecom_core::forge::TaskSpec;
use ecom_core::rules;
use ecom_core::score::{FallbackJudge, ScoreRecord};
use ecom_core::tools;

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

struct SessionEntry {
    task_id: String,
    session: EpisodeSession,
}

pub struct AppState {
    tasks: BTreeMap<String, TaskSpec>,
    sessions: Mutex<BTreeMap<String, SessionEntry>>,
    next_id: AtomicU64,
    limits: Limits,
    multimodal: bool,
}

impl AppState {
    pub fn new(tasks: Vec<TaskSpec>, limits: Limits, multimodal: bool) -> AppState {
        AppState {
            tasks: tasks.into_iter().map(|t| (t.task_id.clone(), t)).collect(),
            sessions: Mutex::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
            limits,
            multimodal,
        }
    }
}

pub fn app(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/agent-turn", post(agent_turn))
        .route("/sessions/{id}/state", get(session_state))
        .route("/sessions/{id}/result", get(session_result))
        .route("/sessions/{id}", delete(delete_session))
        .with_state(state)
}

/// Serve until the process is stopped.
pub async fn serve(state: Arc<AppState>, port: u16) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app(state)).await?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Wire types
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
}

fn err(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    (
        status,
        Json(ApiError {
            code: code.into(),
            message: message.into(),
        }),
    )
        .into_response()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub task_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateSessionResponse {
    pub session_id: String,
    pub question: String,
    pub tool_catalog: Vec<tools::ToolCatalogEntry>,
    pub rules: Vec<rules::Rule>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AgentTurnRequest {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentTurnResponse {
    Observation { text: String },
    UserUtterance { text: String },
    Terminal { termination: Termination },
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionStateResponse {
    pub session_id: String,
    pub task_id: String,
    pub status: String,
    pub tool_calls: u32,
    pub state_version: u64,
}

/// Post-episode view with the hidden database redacted: scores keep diff
/// paths but drop field values, and the raw final snapshot is omitted.
#[derive(Debug, Serialize, Deserialize)]
pub struct SessionResultResponse {
    pub session_id: String,
    pub task_id: String,
    pub score: RedactedScore,
    pub termination: Termination,
    pub tool_call_count: u32,
    pub transcript: ecom_core::episode::Transcript,
    pub trajectory: ecom_core::episode::Trajectory,
    pub log: Vec<ecom_core::episode::LogRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RedactedScore {
    pub task_id: String,
    pub family: ecom_core::TaskFamily,
    pub ka: bool,
    pub db: bool,
    pub score: bool,
    pub missing_keys: Vec<String>,
    pub diff_paths: Vec<String>,
}

impl RedactedScore {
    fn from(record: ScoreRecord) -> RedactedScore {
        RedactedScore {
            task_id: record.task_id,
            family: record.family,
            ka: record.ka,
            db: record.db,
            score: record.score,
            missing_keys: record.missing_keys,
            diff_paths: record.diffs.into_iter().map(|d| d.path).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Handlers
// ---------------------------------------------------------------------------

async fn create_session(
    State(state): State<Arc<AppState>>,
    Json(request): Json<CreateSessionRequest>,
) -> Response {
    let Some(task) = state.tasks.get(&request.task_id) else {
        return err(
            StatusCode::NOT_FOUND,
            "unknown_task",
            format!("no task {:?}", request.task_id),
        );
    };
    let world = match task.initial_state() {
        Ok(world) => world,
        Err(e) => {
            return err(
                StatusCode::INTERNAL_SERVER_ERROR,
                "bad_world",
                e.to_string(),
            )
        }
    };
    let mut session = EpisodeSession::new(
        world,
        Box::new(task.scripted_user()),
        task.marker_assets(),
        state.limits,
        state.multimodal,
    );
    session.preattach(&task.upfront_assets());
    let session_id = format!("s-{}", state.next_id.fetch_add(1, Ordering::Relaxed));
    let question = session.question().to_string();
    state.sessions.lock().expect("sessions lock").insert(
        session_id.clone(),
        SessionEntry {
            task_id: task.task_id.clone(),
            session,
        },
    );
    (
        StatusCode::CREATED,
        Json(CreateSessionResponse {
            session_id,
            question,
            tool_catalog: tools::catalog(),
            rules: rules::catalog(),
        }),
    )
        .into_response()
}

async fn agent_turn(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(request): Json<AgentTurnRequest>,
) -> Response {
    let mut sessions = state.sessions.lock().expect("sessions lock");
    let Some(entry) = sessions.get_mut(&id) else {
        return err(
            StatusCode::NOT_FOUND,
            "unknown_session",
            format!("no session {id:?}"),
        );
    };
    if entry.session.is_terminated() {
        return err(
            StatusCode::CONFLICT,
            "out_of_phase",
            "session already terminated; fetch the result instead",
        );
    }
    let feedback = entry.session.step_raw(&request.text);
    let body = match feedback {
        StepFeedback::Observation { text } => AgentTurnResponse::Observation { text },
        StepFeedback::UserUtterance { text, .. } => AgentTurnResponse::UserUtterance { text },
        StepFeedback::Terminal { termination } => AgentTurnResponse::Terminal { termination },
    };
    Json(body).into_response()
}

async fn session_state(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let sessions = state.sessions.lock().expect("sessions lock");
    let Some(entry) = sessions.get(&id) else {
        return err(
            StatusCode::NOT_FOUND,
            "unknown_session",
            format!("no session {id:?}"),
        );
    };
    let status = match entry.session.termination() {
        None => "awaiting_agent".to_string(),
        Some(_) => "terminated".to_string(),
    };
    Json(SessionStateResponse {
        session_id: id,
        task_id: entry.task_id.clone(),
        status,
        tool_calls: entry.session.outcome().tool_call_count,
        state_version: entry.session.state_version(),
    })
    .into_response()
}

async fn session_result(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let sessions = state.sessions.lock().expect("sessions lock");
    let Some(entry) = sessions.get(&id) else {
        return err(
            StatusCode::NOT_FOUND,
            "unknown_session",
            format!("no session {id:?}"),
        );
    };
    if !entry.session.is_terminated() {
        return err(
            StatusCode::CONFLICT,
            "not_terminated",
            "the episode is still running",
        );
    }
    let task = &state.tasks[&entry.task_id];
    let outcome = entry.session.outcome();
    let judge = FallbackJudge::for_world(&task.initial_world);
    let score = ecom_core::forge::score_outcome(task, &outcome, &judge);
    Json(SessionResultResponse {
        session_id: id,
        task_id: entry.task_id.clone(),
        score: RedactedScore::from(score),
        termination: outcome.termination,
        tool_call_count: outcome.tool_call_count,
        transcript: outcome.transcript,
        trajectory: outcome.trajectory,
        log: outcome.log,
    })
    .into_response()
}

async fn delete_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let mut sessions = state.sessions.lock().expect("sessions lock");
    match sessions.remove(&id) {
        Some(_) => StatusCode::NO_CONTENT.into_response(),
        None => err(
            StatusCode::NOT_FOUND,
            "unknown_session",
            format!("no session {id:?}"),
        ),
    }
}
