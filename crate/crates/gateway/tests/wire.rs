//! The chat-completion wire contract: a model-backed ReAct agent driven
//! through a real HTTP round trip against a mock endpoint.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::routing::post;
use axum::Json;
use serde_json::{json, Value};

use ecom_core::forge::{generate_tasks, GenConfig};
use ecom_core::pipeline::{run_single, AgentKind, RunOptions};
use ecom_core::protocol::{render_turn, AgentTurn};
use ecom_gateway::backend::HttpChatBackend;

type Script = Arc<Mutex<VecDeque<String>>>;

async fn completions(State(script): State<Script>, Json(body): Json<Value>) -> Json<Value> {
    // A well-formed request carries model, messages, and a seed.
    assert!(body["model"].is_string());
    assert!(body["messages"].is_array());
    assert!(body["seed"].is_number());
    let content = script.lock().unwrap().pop_front().unwrap_or_default();
    Json(json!({ "choices": [ { "message": { "role": "assistant", "content": content } } ] }))
}

fn spawn_mock(script: Script) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let runtime = tokio::runtime::Runtime::new().unwrap();
        runtime.block_on(async move {
            let app = axum::Router::new()
                .route("/v1/chat/completions", post(completions))
                .with_state(script);
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    let addr = rx.recv().unwrap();
    format!("http://{addr}/v1/chat/completions")
}

#[test]
fn react_agent_solves_a_task_over_http() {
    let task = generate_tasks(&GenConfig::new(41, 1, None)).remove(0);
    let completions: VecDeque<String> = task
        .action_chain
        .iter()
        .map(|s| render_turn(&AgentTurn::call(&s.thought, s.call.clone())))
        .collect();
    let script: Script = Arc::new(Mutex::new(completions));
    let url = spawn_mock(Arc::clone(&script));

    let backend: Arc<dyn ecom_core::agents::ModelBackend> =
        Arc::new(HttpChatBackend::new(&url, "test-model", None));
    let opts = RunOptions {
        agent: AgentKind::React,
        ..RunOptions::default()
    };
    let record = run_single(&task, &opts, Some(&backend), None).unwrap();
    assert!(
        record.score.score,
        "missing {:?}, diffs {:?}",
        record.score.missing_keys, record.score.diffs
    );
    assert!(
        script.lock().unwrap().is_empty(),
        "every scripted completion consumed"
    );
}

#[test]
fn backend_errors_surface_as_protocol_failure() {
    let task = generate_tasks(&GenConfig::new(42, 1, None)).remove(0);
    // Empty script: the very first completion request fails over to an
    // empty completion, which cannot parse, and the retry exhausts too.
    let script: Script = Arc::new(Mutex::new(VecDeque::new()));
    let url = spawn_mock(script);
    let backend: Arc<dyn ecom_core::agents::ModelBackend> =
        Arc::new(HttpChatBackend::new(&url, "test-model", None));
    let opts = RunOptions {
        agent: AgentKind::React,
        ..RunOptions::default()
    };
    let record = run_single(&task, &opts, Some(&backend), None).unwrap();
    assert_eq!(
        record.outcome.termination,
        ecom_core::episode::Termination::ProtocolFailure
    );
    assert!(!record.score.score);
}
