//! The episode engine: runs one dialogue between an assistant agent and a
//! simulated customer against an isolated world, records the trajectory and
//! transcript, enforces limits, and supports exact replay.
//!
//! `EpisodeSession` is the transport-neutral core — the in-process runner
//! and the HTTP gateway both drive it turn by turn, which is what makes the
//! two transports produce identical outcomes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{dynamic_filter, AgentContext, AgentPolicy, UserPolicy};
use crate::protocol::{self, AgentTurn, TurnPayload};
use crate::rules::RuleSet;
use crate::tools::{self, SessionCtx, TerminalKind, ToolOutcome, ToolResult, UserChannel};
use crate::world::{AssetModality, AssetRef, StateSnapshot, WorldState};

// ---------------------------------------------------------------------------
// Limits and outcome types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_turns: u32,
    pub max_tool_calls: u32,
    pub max_repeated_errors: u32,
}

impl Default for Limits {
    fn default() -> Limits {
        Limits {
            max_turns: 40,
            max_tool_calls: 30,
            max_repeated_errors: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Escalated,
    TurnLimit,
    ProtocolFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub speaker: Speaker,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub asset_markers: Vec<String>,
}

/// The running conversation, both sides.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn assistant_messages(&self) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(|e| e.speaker == Speaker::Assistant)
            .map(|e| e.text.as_str())
    }
}

/// One (thought, action, observation) step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub thought: String,
    pub call: tools::ToolCall,
    pub observation: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogRole {
    Question,
    Thought,
    Action,
    Observation,
    User,
    Final,
}

/// One line of the replayable transcript log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u32,
    pub role: LogRole,
    pub body: String,
    pub state_version: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub transcript: Transcript,
    pub trajectory: Trajectory,
    pub final_snapshot: StateSnapshot,
    pub termination: Termination,
    pub tool_call_count: u32,
    pub talk_to_user_count: u32,
    pub dynamic_filter_invocations: u32,
    pub clamped_filter_outputs: u32,
    pub log: Vec<LogRecord>,
}

// ---------------------------------------------------------------------------
// Session
// ---------------------------------------------------------------------------

/// What the environment hands back after one agent turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepFeedback {
    /// A tool observation (including recoverable errors).
    Observation { text: String },
    /// The customer's next utterance.
    UserUtterance {
        text: String,
        from_talk_to_user: bool,
    },
    /// The episode ended.
    Terminal { termination: Termination },
}

impl StepFeedback {
    /// The text the agent sees wrapped in `<Observation>` tags.
    pub fn observation_text(&self) -> Option<&str> {
        match self {
            StepFeedback::Observation { text } => Some(text),
            StepFeedback::UserUtterance { text, .. } => Some(text),
            StepFeedback::Terminal { .. } => None,
        }
    }
}

/// One running dialogue episode. Owns its world; strictly sequential.
pub struct EpisodeSession {
    state: WorldState,
    user: Box<dyn UserPolicy>,
    assets: Vec<AssetRef>,
    multimodal: bool,
    limits: Limits,
    question: String,
    transcript: Transcript,
    trajectory: Trajectory,
    log: Vec<LogRecord>,
    seq: u32,
    turns: u32,
    tool_calls: u32,
    talk_to_user_count: u32,
    consecutive_errors: u32,
    last_error: Option<String>,
    last_feedback: Option<String>,
    attachments: Vec<AssetRef>,
    termination: Option<Termination>,
}

impl EpisodeSession {
    pub fn new(
        world: WorldState,
        mut user: Box<dyn UserPolicy>,
        assets: Vec<AssetRef>,
        limits: Limits,
        multimodal: bool,
    ) -> EpisodeSession {
        let question = user.opening();
        let mut session = EpisodeSession {
            state: world,
            user,
            assets,
            multimodal,
            limits,
            question: question.clone(),
            transcript: Transcript::default(),
            trajectory: Trajectory::default(),
            log: Vec::new(),
            seq: 0,
            turns: 0,
            tool_calls: 0,
            talk_to_user_count: 0,
            consecutive_errors: 0,
            last_error: None,
            last_feedback: None,
            attachments: Vec::new(),
            termination: None,
        };
        session.record_user_text(&question);
        session.push_log(LogRole::Question, &question);
        session
    }

    pub fn question(&self) -> &str {
        &self.question
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    /// Assets the agent may see: resolved from user-sent markers when
    /// multimodal input is enabled, empty otherwise.
    pub fn files(&self) -> &[AssetRef] {
        &self.attachments
    }

    pub fn last_feedback(&self) -> Option<&str> {
        self.last_feedback.as_deref()
    }

    pub fn termination(&self) -> Option<Termination> {
        self.termination
    }

    pub fn is_terminated(&self) -> bool {
        self.termination.is_some()
    }

    pub fn talk_to_user_count(&self) -> u32 {
        self.talk_to_user_count
    }

    /// Attach knowledge-base files up front (pre-sales product images and
    /// live-stream clips). No-op when multimodal input is disabled.
    pub fn preattach(&mut self, assets: &[AssetRef]) {
        if !self.multimodal {
            return;
        }
        for asset in assets {
            if !self
                .attachments
                .iter()
                .any(|a| a.asset_id == asset.asset_id)
            {
                self.attachments.push(asset.clone());
            }
        }
    }

    pub fn state_version(&self) -> u64 {
        self.state.version
    }

    /// Feed one raw tagged completion. Protocol violations become
    /// recoverable error observations (and count toward the repeated-error
    /// circuit breaker).
    pub fn step_raw(&mut self, raw: &str) -> StepFeedback {
        match protocol::parse_agent_output(raw) {
            Ok(turn) => self.step(turn),
            Err(e) => {
                if let Some(t) = self.termination {
                    return StepFeedback::Terminal { termination: t };
                }
                self.turns += 1;
                if self.turns > self.limits.max_turns {
                    return self.terminate(Termination::TurnLimit);
                }
                let text = format!("ERROR: protocol violation: {e}");
                self.push_log(LogRole::Observation, &text);
                self.last_feedback = Some(text.clone());
                if self.note_error(&text) {
                    return self.terminate(Termination::ProtocolFailure);
                }
                StepFeedback::Observation { text }
            }
        }
    }

    /// Feed one parsed agent turn.
    pub fn step(&mut self, turn: AgentTurn) -> StepFeedback {
        if let Some(t) = self.termination {
            return StepFeedback::Terminal { termination: t };
        }
        self.turns += 1;
        if self.turns > self.limits.max_turns {
            return self.terminate(Termination::TurnLimit);
        }
        match turn.payload {
            TurnPayload::FinalAnswer { text } => {
                self.push_log(LogRole::Thought, &turn.thought);
                self.push_log(LogRole::Final, &text);
                self.record_assistant_text(&text);
                // The floor passes back to the customer.
                let reply = self.user.reply(&text);
                self.record_user_text(&reply);
                self.push_log(LogRole::User, &reply);
                self.consecutive_errors = 0;
                self.last_error = None;
                self.last_feedback = Some(reply.clone());
                StepFeedback::UserUtterance {
                    text: reply,
                    from_talk_to_user: false,
                }
            }
            TurnPayload::Call { call } => {
                if self.tool_calls >= self.limits.max_tool_calls {
                    return self.terminate(Termination::TurnLimit);
                }
                self.tool_calls += 1;
                self.push_log(LogRole::Thought, &turn.thought);
                self.push_log(
                    LogRole::Action,
                    &serde_json::to_string(&call).expect("call serializes"),
                );
                let is_talk = call.tool == "talk_to_user";
                let assistant_message = match call.tool.as_str() {
                    "talk_to_user" => call
                        .arguments
                        .get("content")
                        .and_then(|v| v.as_str())
                        .map(str::to_string),
                    "switch_to_human" => call
                        .arguments
                        .get("reason")
                        .and_then(|v| v.as_str())
                        .map(str::to_string),
                    _ => None,
                };
                let mut channel = PolicyChannel {
                    user: self.user.as_mut(),
                };
                let mut ctx = SessionCtx {
                    user: &mut channel,
                    now: crate::time::system_now(),
                };
                let result = tools::dispatch(&call, &mut self.state, &mut ctx);
                self.absorb_result(turn.thought, call, assistant_message, is_talk, result)
            }
        }
    }

    fn absorb_result(
        &mut self,
        thought: String,
        call: tools::ToolCall,
        assistant_message: Option<String>,
        is_talk: bool,
        result: ToolResult,
    ) -> StepFeedback {
        let observation = tools::render_observation(&result);
        self.trajectory.steps.push(TrajectoryStep {
            thought,
            call,
            observation: observation.clone(),
        });
        match result.outcome {
            ToolOutcome::UserReply { text } => {
                if let Some(msg) = assistant_message {
                    self.record_assistant_text(&msg);
                }
                if is_talk {
                    self.talk_to_user_count += 1;
                }
                self.record_user_text(&text);
                self.push_log(LogRole::User, &text);
                self.consecutive_errors = 0;
                self.last_error = None;
                self.last_feedback = Some(text.clone());
                StepFeedback::UserUtterance {
                    text,
                    from_talk_to_user: is_talk,
                }
            }
            ToolOutcome::Terminal { terminal } => {
                if let Some(msg) = assistant_message {
                    self.record_assistant_text(&msg);
                }
                self.push_log(LogRole::Observation, &observation);
                self.last_feedback = Some(observation);
                let termination = match terminal {
                    TerminalKind::Completed => Termination::Completed,
                    TerminalKind::Escalated => Termination::Escalated,
                };
                self.termination = Some(termination);
                StepFeedback::Terminal { termination }
            }
            ToolOutcome::Record { .. } => {
                self.push_log(LogRole::Observation, &observation);
                self.consecutive_errors = 0;
                self.last_error = None;
                self.last_feedback = Some(observation.clone());
                StepFeedback::Observation { text: observation }
            }
            ToolOutcome::Error { .. } => {
                self.push_log(LogRole::Observation, &observation);
                self.last_feedback = Some(observation.clone());
                if self.note_error(&observation) {
                    return self.terminate(Termination::ProtocolFailure);
                }
                StepFeedback::Observation { text: observation }
            }
        }
    }

    /// Track identical consecutive error observations; true when the
    /// circuit breaker should trip.
    fn note_error(&mut self, text: &str) -> bool {
        if self.last_error.as_deref() == Some(text) {
            self.consecutive_errors += 1;
        } else {
            self.last_error = Some(text.to_string());
            self.consecutive_errors = 1;
        }
        self.consecutive_errors >= self.limits.max_repeated_errors
    }

    fn terminate(&mut self, termination: Termination) -> StepFeedback {
        self.termination = Some(termination);
        StepFeedback::Terminal { termination }
    }

    /// Force protocol failure (policy crashed or timed out).
    pub fn abort(&mut self) {
        self.termination = Some(Termination::ProtocolFailure);
    }

    fn record_assistant_text(&mut self, text: &str) {
        self.transcript.entries.push(TranscriptEntry {
            speaker: Speaker::Assistant,
            text: text.to_string(),
            asset_markers: Vec::new(),
        });
    }

    fn record_user_text(&mut self, text: &str) {
        let markers = extract_markers(text);
        if self.multimodal {
            for marker in &markers {
                if let Some(asset) = self.resolve_marker(marker) {
                    if !self
                        .attachments
                        .iter()
                        .any(|a| a.asset_id == asset.asset_id)
                    {
                        self.attachments.push(asset);
                    }
                }
            }
        }
        self.transcript.entries.push(TranscriptEntry {
            speaker: Speaker::User,
            text: text.to_string(),
            asset_markers: markers,
        });
    }

    /// `[Image n]` resolves to the n-th image asset, `[Video n]` to the
    /// n-th video asset, in task asset order.
    fn resolve_marker(&self, marker: &str) -> Option<AssetRef> {
        let (modality, n) = parse_marker(marker)?;
        self.assets
            .iter()
            .filter(|a| a.modality == modality)
            .nth(n.checked_sub(1)?)
            .cloned()
    }

    fn push_log(&mut self, role: LogRole, body: &str) {
        self.log.push(LogRecord {
            seq: self.seq,
            role,
            body: body.to_string(),
            state_version: self.state.version,
        });
        self.seq += 1;
    }

    pub fn outcome(&self) -> EpisodeOutcome {
        EpisodeOutcome {
            transcript: self.transcript.clone(),
            trajectory: self.trajectory.clone(),
            final_snapshot: self.state.snapshot(),
            termination: self.termination.unwrap_or(Termination::ProtocolFailure),
            tool_call_count: self.tool_calls,
            talk_to_user_count: self.talk_to_user_count,
            dynamic_filter_invocations: 0,
            clamped_filter_outputs: 0,
            log: self.log.clone(),
        }
    }
}

/// Adapter: the dispatcher talks to the session's user policy.
struct PolicyChannel<'a> {
    user: &'a mut dyn UserPolicy,
}

impl UserChannel for PolicyChannel<'_> {
    fn reply(&mut self, assistant_message: &str) -> String {
        self.user.reply(assistant_message)
    }
}

/// Extract `[Image n]` / `[Video n]` markers from an utterance.
pub fn extract_markers(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'[' {
            if let Some(end) = text[i..].find(']') {
                let token = &text[i + 1..i + end];
                if token.starts_with("Image ") || token.starts_with("Video ") {
                    let (_, num) = token.split_once(' ').unwrap();
                    if !num.is_empty() && num.chars().all(|c| c.is_ascii_digit()) {
                        out.push(format!("[{token}]"));
                    }
                }
                i += end + 1;
                continue;
            }
        }
        i += 1;
    }
    out
}

fn parse_marker(marker: &str) -> Option<(AssetModality, usize)> {
    let inner = marker.strip_prefix('[')?.strip_suffix(']')?;
    let (kind, num) = inner.split_once(' ')?;
    let n: usize = num.parse().ok()?;
    match kind {
        "Image" => Some((AssetModality::Image, n)),
        "Video" => Some((AssetModality::Video, n)),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// In-process runner
// ---------------------------------------------------------------------------

pub struct EpisodeConfig {
    pub world: WorldState,
    /// Assets the customer may send mid-conversation (marker pool).
    pub assets: Vec<AssetRef>,
    /// Knowledge-base files available to the agent from the start.
    pub preattached: Vec<AssetRef>,
    pub limits: Limits,
    pub multimodal: bool,
}

/// Drive a policy against a session until termination. The engine, not the
/// policy, owns the dynamic-module trigger: the selector (when the policy
/// has one) runs exactly once after every talk_to_user observation.
pub fn run_episode(
    cfg: EpisodeConfig,
    assistant: &mut dyn AgentPolicy,
    user: Box<dyn UserPolicy>,
) -> EpisodeOutcome {
    let mut session = EpisodeSession::new(cfg.world, user, cfg.assets, cfg.limits, cfg.multimodal);
    session.preattach(&cfg.preattached);
    let mut rules = RuleSet::full();
    let mut trajectory_kept: Option<Vec<usize>> = None;
    let mut filter_invocations = 0u32;
    let mut clamped_outputs = 0u32;

    while !session.is_terminated() {
        let plan_view = assistant.plan().cloned();
        let turn = {
            let ctx = AgentContext {
                question: &session.question,
                transcript: &session.transcript,
                files: &session.attachments,
                rules: &rules,
                trajectory: &session.trajectory,
                trajectory_kept: trajectory_kept.as_deref(),
                plan: plan_view.as_ref(),
                last_feedback: session.last_feedback.as_deref(),
            };
            match assistant.next_turn(&ctx) {
                Ok(turn) => turn,
                Err(_) => {
                    session.abort();
                    break;
                }
            }
        };
        let feedback = session.step(turn);
        if let StepFeedback::UserUtterance {
            from_talk_to_user: true,
            ..
        } = feedback
        {
            if let Some(selector) = assistant.selector() {
                filter_invocations += 1;
                let (output, clamped) = dynamic_filter(
                    &session.transcript,
                    &session.trajectory,
                    assistant.plan(),
                    selector,
                );
                rules = RuleSet::clamped(&output.rules_kept);
                trajectory_kept = output.trajectory_kept;
                if let Some(plan) = output.revised_plan {
                    assistant.accept_revised_plan(plan);
                }
                if clamped {
                    clamped_outputs += 1;
                }
            }
        }
    }
    let mut outcome = session.outcome();
    outcome.dynamic_filter_invocations = filter_invocations;
    outcome.clamped_filter_outputs = clamped_outputs;
    outcome
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("log has no opening question record")]
    NoQuestion,
    #[error("malformed log at seq {seq}: {problem}")]
    Malformed { seq: u32, problem: String },
    #[error("divergence at seq {seq}: expected {expected:?}, replay produced {actual:?}")]
    Divergence {
        seq: u32,
        expected: String,
        actual: String,
    },
}

struct ReplayUser {
    opening: String,
    replies: std::collections::VecDeque<String>,
}

impl UserPolicy for ReplayUser {
    fn opening(&mut self) -> String {
        self.opening.clone()
    }

    fn reply(&mut self, _assistant_message: &str) -> String {
        self.replies.pop_front().unwrap_or_default()
    }
}

/// Re-execute a transcript log against the initial state and assert that
/// every observation is byte-identical. Returns the reconstructed outcome.
pub fn replay(
    log: &[LogRecord],
    world: WorldState,
    assets: Vec<AssetRef>,
    limits: Limits,
    multimodal: bool,
) -> Result<EpisodeOutcome, ReplayError> {
    let question = log
        .iter()
        .find(|r| r.role == LogRole::Question)
        .ok_or(ReplayError::NoQuestion)?
        .body
        .clone();
    let replies: std::collections::VecDeque<String> = log
        .iter()
        .filter(|r| r.role == LogRole::User)
        .map(|r| r.body.clone())
        .collect();
    let mut session = EpisodeSession::new(
        world,
        Box::new(ReplayUser {
            opening: question,
            replies,
        }),
        assets,
        limits,
        multimodal,
    );

    let mut i = 0;
    while i < log.len() {
        let record = &log[i];
        match record.role {
            LogRole::Question | LogRole::Observation | LogRole::User => {
                i += 1;
            }
            LogRole::Thought => {
                let thought = record.body.clone();
                let next = log.get(i + 1).ok_or(ReplayError::Malformed {
                    seq: record.seq,
                    problem: "thought with no action or final answer".into(),
                })?;
                let turn = match next.role {
                    LogRole::Action => {
                        let call: tools::ToolCall =
                            serde_json::from_str(&next.body).map_err(|e| {
                                ReplayError::Malformed {
                                    seq: next.seq,
                                    problem: e.to_string(),
                                }
                            })?;
                        AgentTurn {
                            thought,
                            payload: TurnPayload::Call { call },
                        }
                    }
                    LogRole::Final => AgentTurn {
                        thought,
                        payload: TurnPayload::FinalAnswer {
                            text: next.body.clone(),
                        },
                    },
                    other => {
                        return Err(ReplayError::Malformed {
                            seq: next.seq,
                            problem: format!("thought followed by {other:?}"),
                        })
                    }
                };
                let feedback = session.step(turn);
                // The record after the action/final holds the expected
                // feedback text.
                if let Some(expected) = log.get(i + 2) {
                    if matches!(expected.role, LogRole::Observation | LogRole::User) {
                        let actual = match &feedback {
                            StepFeedback::Terminal {
                                termination: Termination::Completed,
                            } => "conversation ended".to_string(),
                            StepFeedback::Terminal {
                                termination: Termination::Escalated,
                            } => "transferred to a human agent".to_string(),
                            other => other.observation_text().unwrap_or_default().to_string(),
                        };
                        if actual != expected.body {
                            return Err(ReplayError::Divergence {
                                seq: expected.seq,
                                expected: expected.body.clone(),
                                actual,
                            });
                        }
                    }
                }
                i += 2;
            }
            LogRole::Action | LogRole::Final => {
                return Err(ReplayError::Malformed {
                    seq: record.seq,
                    problem: "action without a preceding thought".into(),
                });
            }
        }
    }
    Ok(session.outcome())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::ScriptedUser;
    use crate::fixtures;
    use serde_json::json;

    fn scripted_user(opening: &str, replies: &[&str]) -> Box<dyn UserPolicy> {
        Box::new(ScriptedUser::new(opening, replies))
    }

    fn call(tool: &str, args: &[(&str, serde_json::Value)]) -> AgentTurn {
        AgentTurn::call("step", tools::ToolCall::new(tool, args))
    }

    #[test]
    fn basic_session_flow() {
        let world = fixtures::small_world();
        let mut session = EpisodeSession::new(
            world,
            scripted_user("Where is my order O1?", &["Thanks, that is all."]),
            Vec::new(),
            Limits::default(),
            true,
        );
        assert_eq!(session.question(), "Where is my order O1?");

        let fb = session.step(call("get_order_detail", &[("order_id", json!("O1"))]));
        assert!(matches!(fb, StepFeedback::Observation { .. }));

        let fb = session.step(call(
            "talk_to_user",
            &[("content", json!("It is in transit."))],
        ));
        assert_eq!(
            fb,
            StepFeedback::UserUtterance {
                text: "Thanks, that is all.".into(),
                from_talk_to_user: true
            }
        );

        let fb = session.step(call("end_conversation", &[]));
        assert_eq!(
            fb,
            StepFeedback::Terminal {
                termination: Termination::Completed
            }
        );

        let outcome = session.outcome();
        assert_eq!(outcome.termination, Termination::Completed);
        assert_eq!(outcome.tool_call_count, 3);
        assert_eq!(outcome.talk_to_user_count, 1);
        assert_eq!(outcome.trajectory.steps.len(), 3);
        // question + assistant message + user reply
        assert_eq!(outcome.transcript.entries.len(), 3);
    }

    #[test]
    fn switch_to_human_escalates() {
        let world = fixtures::small_world();
        let mut session = EpisodeSession::new(
            world,
            scripted_user("Help!", &[]),
            Vec::new(),
            Limits::default(),
            true,
        );
        let fb = session.step(call(
            "switch_to_human",
            &[("reason", json!("I will transfer you to a human agent."))],
        ));
        assert_eq!(
            fb,
            StepFeedback::Terminal {
                termination: Termination::Escalated
            }
        );
        let outcome = session.outcome();
        assert!(outcome
            .transcript
            .assistant_messages()
            .any(|m| m.contains("human agent")));
    }

    #[test]
    fn repeated_identical_errors_trip_the_breaker() {
        let world = fixtures::small_world();
        let mut session = EpisodeSession::new(
            world,
            scripted_user("hi", &[]),
            Vec::new(),
            Limits {
                max_repeated_errors: 3,
                ..Limits::default()
            },
            true,
        );
        let bad = call("get_order_detail", &[("order_id", json!("NOPE"))]);
        let fb1 = session.step(bad.clone());
        assert!(matches!(fb1, StepFeedback::Observation { .. }));
        let fb2 = session.step(bad.clone());
        assert!(matches!(fb2, StepFeedback::Observation { .. }));
        let fb3 = session.step(bad);
        assert_eq!(
            fb3,
            StepFeedback::Terminal {
                termination: Termination::ProtocolFailure
            }
        );
    }

    #[test]
    fn distinct_errors_do_not_trip_the_breaker() {
        let world = fixtures::small_world();
        let mut session = EpisodeSession::new(
            world,
            scripted_user("hi", &[]),
            Vec::new(),
            Limits {
                max_repeated_errors: 2,
                ..Limits::default()
            },
            true,
        );
        session.step(call("get_order_detail", &[("order_id", json!("A"))]));
        let fb = session.step(call("get_order_detail", &[("order_id", json!("B"))]));
        assert!(
            matches!(fb, StepFeedback::Observation { .. }),
            "different error resets"
        );
    }

    #[test]
    fn turn_limit_terminates() {
        let world = fixtures::small_world();
        let mut session = EpisodeSession::new(
            world,
            scripted_user("hi", &[]),
            Vec::new(),
            Limits {
                max_turns: 2,
                ..Limits::default()
            },
            true,
        );
        session.step(call("get_order_detail", &[("order_id", json!("O1"))]));
        session.step(call("get_order_detail", &[("order_id", json!("O1"))]));
        let fb = session.step(call("get_order_detail", &[("order_id", json!("O1"))]));
        assert_eq!(
            fb,
            StepFeedback::Terminal {
                termination: Termination::TurnLimit
            }
        );
    }

    #[test]
    fn parse_errors_are_recoverable_observations() {
        let world = fixtures::small_world();
        let mut session = EpisodeSession::new(
            world,
            scripted_user("hi", &[]),
            Vec::new(),
            Limits::default(),
            true,
        );
        let fb = session.step_raw("just some prose");
        match fb {
            StepFeedback::Observation { text } => {
                assert!(text.starts_with("ERROR: protocol violation"))
            }
            other => panic!("expected observation, got {other:?}"),
        }
        assert!(!session.is_terminated());
        assert_eq!(session.state_version(), 0);
    }

    #[test]
    fn marker_extraction_and_attachment() {
        let world = fixtures::small_world();
        let assets = vec![world.data.assets["A1"].clone()];
        let mut session = EpisodeSession::new(
            world,
            scripted_user("My mug arrived cracked [Image 1]", &[]),
            assets,
            Limits::default(),
            true,
        );
        assert_eq!(
            session.transcript().entries[0].asset_markers,
            vec!["[Image 1]"]
        );
        assert_eq!(session.files().len(), 1);
        assert_eq!(session.files()[0].asset_id, "A1");
        session.step(call("end_conversation", &[]));
    }

    #[test]
    fn no_multimodal_hides_attachments() {
        let world = fixtures::small_world();
        let assets = vec![world.data.assets["A1"].clone()];
        let session = EpisodeSession::new(
            world,
            scripted_user("Cracked! [Image 1]", &[]),
            assets,
            Limits::default(),
            false,
        );
        assert!(session.files().is_empty(), "markers only, no payloads");
        assert_eq!(
            session.transcript().entries[0].asset_markers,
            vec!["[Image 1]"]
        );
    }

    #[test]
    fn replay_reproduces_fresh_log() {
        let make = || fixtures::small_world();
        let mut session = EpisodeSession::new(
            make(),
            scripted_user(
                "Change my address to 9 Elm Road for O1.",
                &["Great, thanks."],
            ),
            Vec::new(),
            Limits::default(),
            true,
        );
        session.step(call("get_order_detail", &[("order_id", json!("O1"))]));
        session.step(call(
            "modify_order_address",
            &[("order_id", json!("O1")), ("address", json!("9 Elm Road"))],
        ));
        session.step(call(
            "talk_to_user",
            &[("content", json!("Done: 9 Elm Road."))],
        ));
        session.step(call("end_conversation", &[]));
        let outcome = session.outcome();

        let replayed = replay(&outcome.log, make(), Vec::new(), Limits::default(), true).unwrap();
        assert_eq!(replayed.termination, outcome.termination);
        assert!(replayed
            .final_snapshot
            .canonical_eq(&outcome.final_snapshot));
        assert_eq!(replayed.log, outcome.log);
    }

    #[test]
    fn replay_detects_tampered_argument() {
        let make = || fixtures::small_world();
        let mut session = EpisodeSession::new(
            make(),
            scripted_user("q", &[]),
            Vec::new(),
            Limits::default(),
            true,
        );
        session.step(call("get_order_detail", &[("order_id", json!("O1"))]));
        session.step(call("end_conversation", &[]));
        let mut outcome = session.outcome();
        // Tamper with the recorded call's argument.
        let action = outcome
            .log
            .iter_mut()
            .find(|r| r.role == LogRole::Action)
            .unwrap();
        action.body = action.body.replace("O1", "O9");
        let err = replay(&outcome.log, make(), Vec::new(), Limits::default(), true).unwrap_err();
        assert!(matches!(err, ReplayError::Divergence { .. }), "{err}");
    }

    #[test]
    fn replay_of_empty_log_returns_initial_snapshot() {
        let world = fixtures::small_world();
        let snap = world.snapshot();
        let log = vec![LogRecord {
            seq: 0,
            role: LogRole::Question,
            body: "hello".into(),
            state_version: 0,
        }];
        let outcome = replay(&log, world, Vec::new(), Limits::default(), true).unwrap();
        assert!(outcome.final_snapshot.canonical_eq(&snap));
    }
}
