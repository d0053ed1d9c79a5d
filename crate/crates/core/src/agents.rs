//! Agent policies and their enhanced variants with the dynamic module,
//! the model-backend contract, selectors, and simulated-customer policies.
//!
//! Everything here is deterministic when driven by scripted backends; real
//! model backends plug in behind `ModelBackend` without touching the
//! episode engine.

use std::collections::{BTreeSet, VecDeque};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episode::{Trajectory, Transcript};
use crate::protocol::{self, AgentTurn};
use crate::rules::{self, Rule, RuleSet, TaskFamily};
use crate::tools;

// ---------------------------------------------------------------------------
// Model backends
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

/// One chat-completion request: system text, message list, seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub system: String,
    pub messages: Vec<ChatMessage>,
    pub seed: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("scripted backend exhausted")]
    Exhausted,
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend timed out")]
    Timeout,
}

/// A request -> completion function. Implementations must be safe to share
/// across concurrently running episodes.
pub trait ModelBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;
}

/// Deterministic backend returning canned completions in order.
pub struct ScriptedBackend {
    completions: Mutex<VecDeque<String>>,
}

impl ScriptedBackend {
    pub fn new(completions: Vec<String>) -> ScriptedBackend {
        ScriptedBackend {
            completions: Mutex::new(completions.into()),
        }
    }

    /// Script from turns, rendered through the tag grammar.
    pub fn from_turns(turns: &[AgentTurn]) -> ScriptedBackend {
        ScriptedBackend::new(turns.iter().map(protocol::render_turn).collect())
    }
}

impl ModelBackend for ScriptedBackend {
    fn complete(&self, _request: &CompletionRequest) -> Result<String, BackendError> {
        self.completions
            .lock()
            .expect("lock")
            .pop_front()
            .ok_or(BackendError::Exhausted)
    }
}

// ---------------------------------------------------------------------------
// Plans
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubTask {
    pub description: String,
    #[serde(default)]
    pub expected_tools: Vec<String>,
    #[serde(default)]
    pub done: bool,
}

/// An ordered sub-task list; the executor consumes sub-tasks in order and
/// plan revision may rewrite undone sub-tasks only.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub sub_tasks: Vec<SubTask>,
}

impl Plan {
    pub fn current(&self) -> Option<(usize, &SubTask)> {
        self.sub_tasks.iter().enumerate().find(|(_, s)| !s.done)
    }

    pub fn all_done(&self) -> bool {
        self.sub_tasks.iter().all(|s| s.done)
    }
}

// ---------------------------------------------------------------------------
// Agent context and policy contract
// ---------------------------------------------------------------------------

/// Everything a policy may condition on for one turn. `rules` and
/// `trajectory_kept` reflect the dynamic module's latest output; the full
/// trajectory is always available for bookkeeping.
pub struct AgentContext<'a> {
    pub question: &'a str,
    pub transcript: &'a Transcript,
    pub files: &'a [crate::world::AssetRef],
    pub rules: &'a RuleSet,
    pub trajectory: &'a Trajectory,
    /// Kept step indices (strictly increasing) or None for "all".
    pub trajectory_kept: Option<&'a [usize]>,
    pub plan: Option<&'a Plan>,
    pub last_feedback: Option<&'a str>,
}

impl AgentContext<'_> {
    /// The trajectory steps the policy should reason over.
    pub fn kept_steps(&self) -> Vec<&crate::episode::TrajectoryStep> {
        match self.trajectory_kept {
            None => self.trajectory.steps.iter().collect(),
            Some(kept) => kept
                .iter()
                .filter_map(|&i| self.trajectory.steps.get(i))
                .collect(),
        }
    }
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("unparseable completion after retry: {0}")]
    Unparseable(String),
}

/// One assistant policy driving an episode.
pub trait AgentPolicy {
    fn next_turn(&mut self, ctx: &AgentContext<'_>) -> Result<AgentTurn, PolicyError>;

    /// The dynamic-module selector, when this is an enhanced variant.
    fn selector(&self) -> Option<&dyn Selector> {
        None
    }

    fn plan(&self) -> Option<&Plan> {
        None
    }

    fn accept_revised_plan(&mut self, _plan: Plan) {}
}

// ---------------------------------------------------------------------------
// Dynamic module
// ---------------------------------------------------------------------------

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("selector failed: {0}")]
pub struct SelectorError(pub String);

/// What a selector proposes after a user utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicFilterOutput {
    pub rules_kept: Vec<String>,
    /// Kept trajectory step indices; None leaves the trajectory unfiltered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_kept: Option<Vec<usize>>,
    /// Revised plan; None leaves the plan unchanged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revised_plan: Option<Plan>,
}

impl DynamicFilterOutput {
    /// Full rules, untouched trajectory and plan.
    pub fn identity() -> DynamicFilterOutput {
        DynamicFilterOutput {
            rules_kept: RuleSet::full().ids().to_vec(),
            trajectory_kept: None,
            revised_plan: None,
        }
    }
}

pub struct FilterInput<'a> {
    pub transcript: &'a Transcript,
    pub trajectory: &'a Trajectory,
    pub plan: Option<&'a Plan>,
    pub catalog: &'a [Rule],
}

pub trait Selector: Send + Sync {
    fn name(&self) -> &'static str;
    fn select(&self, input: &FilterInput<'_>) -> Result<DynamicFilterOutput, SelectorError>;
}

/// Run the selector and enforce the subset/subsequence invariants on its
/// output. Selector failures degrade to the identity (full rules, full
/// trajectory); invariant violations are clamped, and the second return
/// value reports whether anything had to be clamped or defaulted.
pub fn dynamic_filter(
    transcript: &Transcript,
    trajectory: &Trajectory,
    plan: Option<&Plan>,
    selector: &dyn Selector,
) -> (DynamicFilterOutput, bool) {
    let catalog = rules::catalog();
    let input = FilterInput {
        transcript,
        trajectory,
        plan,
        catalog: &catalog,
    };
    let proposed = match selector.select(&input) {
        Ok(p) => p,
        Err(_) => return (DynamicFilterOutput::identity(), true),
    };
    let mut clamped = false;

    let rule_set = RuleSet::clamped(&proposed.rules_kept);
    if rule_set.len() != proposed.rules_kept.len() {
        clamped = true;
    }

    let trajectory_kept = proposed.trajectory_kept.map(|kept| {
        let mut cleaned: Vec<usize> = Vec::with_capacity(kept.len());
        for idx in kept {
            if idx < trajectory.steps.len() && cleaned.last().is_none_or(|&last| idx > last) {
                cleaned.push(idx);
            } else {
                clamped = true;
            }
        }
        cleaned
    });

    let revised_plan = match (proposed.revised_plan, plan) {
        (None, _) => None,
        (Some(_), None) => {
            // Nothing to revise yet; dropping the proposal is the clamp.
            clamped = true;
            None
        }
        (Some(revision), Some(original)) => {
            // Done sub-tasks are history: preserve them verbatim and accept
            // rewrites for the undone tail only.
            let done: Vec<SubTask> = original
                .sub_tasks
                .iter()
                .filter(|s| s.done)
                .cloned()
                .collect();
            let proposed_done: Vec<&SubTask> =
                revision.sub_tasks.iter().filter(|s| s.done).collect();
            if proposed_done.len() != done.len()
                || proposed_done.iter().zip(&done).any(|(a, b)| **a != *b)
            {
                clamped = true;
            }
            let tail = revision.sub_tasks.into_iter().filter(|s| !s.done);
            Some(Plan {
                sub_tasks: done.into_iter().chain(tail).collect(),
            })
        }
    };

    (
        DynamicFilterOutput {
            rules_kept: rule_set.ids().to_vec(),
            trajectory_kept,
            revised_plan,
        },
        clamped,
    )
}

/// Keeps everything: the enhanced variants degrade to their vanilla
/// counterparts under this selector.
pub struct IdentitySelector;

impl Selector for IdentitySelector {
    fn name(&self) -> &'static str {
        "identity"
    }

    fn select(&self, _input: &FilterInput<'_>) -> Result<DynamicFilterOutput, SelectorError> {
        Ok(DynamicFilterOutput::identity())
    }
}

/// Deterministic default: detect the question family from the latest user
/// utterance and keep the family's rule categories. Trajectory and plan
/// pass through unchanged.
pub struct CategorySelector;

impl CategorySelector {
    /// Keyword detection over a user utterance. After-sales cues win over
    /// logistics cues (complaints routinely mention shipping words).
    pub fn detect_family(text: &str) -> Option<TaskFamily> {
        let lower = text.to_lowercase();
        const AFTER_SALES: &[&str] = &[
            "refund",
            "return",
            "damaged",
            "broken",
            "cracked",
            "missing",
            "wrong item",
            "quality",
            "compensation",
            "complaint",
        ];
        const LOGISTICS: &[&str] = &[
            "address",
            "arrive",
            "arrival",
            "shipping",
            "ship",
            "deliver",
            "logistics",
            "brand",
            "package",
            "courier",
            "intercept",
        ];
        const PRE_SALES: &[&str] = &[
            "coupon",
            "recommend",
            "live stream",
            "livestream",
            "cheaper",
            "pay",
            "in stock",
        ];
        if AFTER_SALES.iter().any(|k| lower.contains(k)) {
            return Some(TaskFamily::AfterSales);
        }
        if LOGISTICS.iter().any(|k| lower.contains(k)) {
            return Some(TaskFamily::Logistics);
        }
        if PRE_SALES.iter().any(|k| lower.contains(k)) {
            return Some(TaskFamily::PreSales);
        }
        None
    }
}

impl Selector for CategorySelector {
    fn name(&self) -> &'static str {
        "category"
    }

    fn select(&self, input: &FilterInput<'_>) -> Result<DynamicFilterOutput, SelectorError> {
        let last_user = input
            .transcript
            .entries
            .iter()
            .rev()
            .find(|e| e.speaker == crate::episode::Speaker::User)
            .map(|e| e.text.as_str())
            .unwrap_or_default();
        let rules_kept = match Self::detect_family(last_user) {
            Some(family) => rules::rules_for_family(family).ids().to_vec(),
            None => RuleSet::full().ids().to_vec(),
        };
        Ok(DynamicFilterOutput {
            rules_kept,
            trajectory_kept: None,
            revised_plan: None,
        })
    }
}

/// A selector served by a model backend: the completion must be a JSON
/// `DynamicFilterOutput`. Invalid output degrades to identity via the
/// clamping in `dynamic_filter`.
pub struct BackendSelector {
    pub backend: Arc<dyn ModelBackend>,
    pub seed: u64,
}

impl Selector for BackendSelector {
    fn name(&self) -> &'static str {
        "backend"
    }

    fn select(&self, input: &FilterInput<'_>) -> Result<DynamicFilterOutput, SelectorError> {
        let rules_text = input
            .catalog
            .iter()
            .map(|r| format!("[{}] {}", r.rule_id, r.text))
            .collect::<Vec<_>>()
            .join("\n");
        let history = render_transcript(input.transcript);
        let request = CompletionRequest {
            system: "Select the rules relevant to the customer's current needs. Reply with a \
                     JSON object {\"rules_kept\": [rule ids], \"trajectory_kept\": [step \
                     indices] or null, \"revised_plan\": plan or null}."
                .to_string(),
            messages: vec![ChatMessage::user(format!(
                "Conversation so far:\n{history}\n\nRule catalog:\n{rules_text}"
            ))],
            seed: self.seed,
        };
        let completion = self
            .backend
            .complete(&request)
            .map_err(|e| SelectorError(e.to_string()))?;
        serde_json::from_str(completion.trim()).map_err(|e| SelectorError(e.to_string()))
    }
}

// ---------------------------------------------------------------------------
// Prompt rendering
// ---------------------------------------------------------------------------

fn render_transcript(transcript: &Transcript) -> String {
    transcript
        .entries
        .iter()
        .map(|e| {
            let who = match e.speaker {
                crate::episode::Speaker::User => "User",
                crate::episode::Speaker::Assistant => "Assistant",
            };
            format!("{who}: {}", e.text)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_rules(rules: &RuleSet) -> String {
    rules
        .rules()
        .iter()
        .map(|r| format!("[{}] {}", r.rule_id, r.text))
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_tools() -> String {
    tools::catalog()
        .iter()
        .map(|t| {
            let args = t
                .arguments
                .iter()
                .map(|a| {
                    let req = if a.required { "" } else { "?" };
                    match &a.allowed {
                        Some(vals) => format!("{}{req}: {}", a.name, vals.join("|")),
                        None => format!("{}{req}: {}", a.name, a.ty),
                    }
                })
                .collect::<Vec<_>>()
                .join(", ");
            format!(
                "- {} ({:?}): {} Arguments: {{{args}}}",
                t.name, t.class, t.description
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_files(files: &[crate::world::AssetRef]) -> String {
    if files.is_empty() {
        return "(none)".to_string();
    }
    files
        .iter()
        .map(|a| {
            let modality = match a.modality {
                crate::world::AssetModality::Image => "image",
                crate::world::AssetModality::Video => "video",
            };
            let mut line = format!("- {} ({modality}): {}", a.asset_id, a.description);
            if !a.evidence.is_empty() {
                let claims = a
                    .evidence
                    .iter()
                    .map(|(k, v)| format!("{k}={}", if *v { "supported" } else { "unsupported" }))
                    .collect::<Vec<_>>()
                    .join(", ");
                line.push_str(&format!(" [annotated evidence: {claims}]"));
            }
            if let Some(t) = &a.transcript {
                line.push_str(&format!(" [transcript: {t}]"));
            }
            line
        })
        .collect::<Vec<_>>()
        .join("\n")
}

const PROTOCOL_HINT: &str = "Respond with exactly one of:\n\
    <Thought>...</Thought><Action_input>{\"tool\": \"...\", \"arguments\": {...}}</Action_input>\n\
    <Thought>...</Thought><Final_Answer>...</Final_Answer>";

/// The standard reasoning prompt: files, rules, tools, protocol, then the
/// question and the (kept) trajectory as alternating messages.
pub fn render_react_prompt(ctx: &AgentContext<'_>) -> (String, Vec<ChatMessage>) {
    let system = format!(
        "You are an e-commerce customer-service assistant. Follow every rule.\n\n\
         ## Files\n{files}\n\n## Rules\n{rules}\n\n## Tools\n{tools}\n\n## Protocol\n{PROTOCOL_HINT}",
        files = render_files(ctx.files),
        rules = render_rules(ctx.rules),
        tools = render_tools(),
    );
    let mut messages = vec![ChatMessage::user(protocol::wrap_question(ctx.question))];
    for step in ctx.kept_steps() {
        messages.push(ChatMessage::assistant(protocol::render_turn(
            &AgentTurn::call(&step.thought, step.call.clone()),
        )));
        messages.push(ChatMessage::user(protocol::wrap_observation(
            &step.observation,
        )));
    }
    (system, messages)
}

fn render_plan(plan: &Plan) -> String {
    plan.sub_tasks
        .iter()
        .enumerate()
        .map(|(i, s)| {
            format!(
                "{}. [{}] {} (tools: {})",
                i + 1,
                if s.done { "done" } else { "todo" },
                s.description,
                if s.expected_tools.is_empty() {
                    "-".into()
                } else {
                    s.expected_tools.join(", ")
                }
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

/// Reason-act loop over a model backend. Retries once with an error hint if
/// the completion does not parse.
pub struct ReactPolicy {
    backend: Arc<dyn ModelBackend>,
    seed: u64,
}

impl ReactPolicy {
    pub fn new(backend: Arc<dyn ModelBackend>, seed: u64) -> ReactPolicy {
        ReactPolicy { backend, seed }
    }

    fn complete_and_parse(
        &self,
        system: String,
        mut messages: Vec<ChatMessage>,
    ) -> Result<AgentTurn, PolicyError> {
        let request = CompletionRequest {
            system: system.clone(),
            messages: messages.clone(),
            seed: self.seed,
        };
        let completion = self.backend.complete(&request)?;
        match protocol::parse_agent_output(&completion) {
            Ok(turn) => Ok(turn),
            Err(e) => {
                messages.push(ChatMessage::assistant(completion));
                messages.push(ChatMessage::user(format!(
                    "ERROR: protocol violation: {e}. {PROTOCOL_HINT}"
                )));
                let retry = CompletionRequest {
                    system,
                    messages,
                    seed: self.seed,
                };
                let completion = self.backend.complete(&retry)?;
                protocol::parse_agent_output(&completion)
                    .map_err(|e| PolicyError::Unparseable(e.to_string()))
            }
        }
    }
}

impl AgentPolicy for ReactPolicy {
    fn next_turn(&mut self, ctx: &AgentContext<'_>) -> Result<AgentTurn, PolicyError> {
        let (system, messages) = render_react_prompt(ctx);
        self.complete_and_parse(system, messages)
    }
}

/// ReactPolicy plus the dynamic module.
pub struct EReactPolicy {
    inner: ReactPolicy,
    selector: Box<dyn Selector>,
}

impl EReactPolicy {
    pub fn new(backend: Arc<dyn ModelBackend>, seed: u64, selector: Box<dyn Selector>) -> Self {
        EReactPolicy {
            inner: ReactPolicy::new(backend, seed),
            selector,
        }
    }
}

impl AgentPolicy for EReactPolicy {
    fn next_turn(&mut self, ctx: &AgentContext<'_>) -> Result<AgentTurn, PolicyError> {
        self.inner.next_turn(ctx)
    }

    fn selector(&self) -> Option<&dyn Selector> {
        Some(self.selector.as_ref())
    }
}

/// Plan first, then execute sub-tasks in order. A sub-task is marked done
/// once each of its expected tools has produced a non-error observation
/// (immediately, if it expects none).
pub struct PlanSolvePolicy {
    backend: Arc<dyn ModelBackend>,
    seed: u64,
    plan: Option<Plan>,
    seen_tools: BTreeSet<String>,
    consumed_steps: usize,
}

impl PlanSolvePolicy {
    pub fn new(backend: Arc<dyn ModelBackend>, seed: u64) -> PlanSolvePolicy {
        PlanSolvePolicy {
            backend,
            seed,
            plan: None,
            seen_tools: BTreeSet::new(),
            consumed_steps: 0,
        }
    }

    fn generate_plan(&self, ctx: &AgentContext<'_>) -> Result<Plan, PolicyError> {
        let system = format!(
            "You are an e-commerce customer-service assistant. Draft a short ordered plan \
             of sub-tasks to settle the customer's needs.\n\n## Files\n{files}\n\n## Rules\n\
             {rules}\n\n## Tools\n{tools}\n\nReply with JSON only: {{\"sub_tasks\": \
             [{{\"description\": \"...\", \"expected_tools\": [\"...\"]}}]}}",
            files = render_files(ctx.files),
            rules = render_rules(ctx.rules),
            tools = render_tools(),
        );
        let messages = vec![ChatMessage::user(protocol::wrap_question(ctx.question))];
        let completion = self.backend.complete(&CompletionRequest {
            system,
            messages,
            seed: self.seed,
        })?;
        let plan: Plan = serde_json::from_str(completion.trim()).unwrap_or_default();
        if plan.sub_tasks.is_empty() {
            // A plan must have at least one sub-task; fall back to the
            // question itself.
            return Ok(Plan {
                sub_tasks: vec![SubTask {
                    description: ctx.question.to_string(),
                    expected_tools: Vec::new(),
                    done: false,
                }],
            });
        }
        Ok(plan)
    }

    fn note_progress(&mut self, ctx: &AgentContext<'_>) {
        let Some(plan) = &mut self.plan else { return };
        for step in &ctx.trajectory.steps[self.consumed_steps.min(ctx.trajectory.steps.len())..] {
            if !step.observation.starts_with("ERROR:") {
                self.seen_tools.insert(step.call.tool.clone());
            }
        }
        self.consumed_steps = ctx.trajectory.steps.len();
        while let Some((idx, current)) = plan.current() {
            let satisfied = current.expected_tools.is_empty() && self.consumed_steps > 0
                || !current.expected_tools.is_empty()
                    && current
                        .expected_tools
                        .iter()
                        .all(|t| self.seen_tools.contains(t));
            if satisfied {
                plan.sub_tasks[idx].done = true;
                self.seen_tools.clear();
            } else {
                break;
            }
        }
    }
}

impl AgentPolicy for PlanSolvePolicy {
    fn next_turn(&mut self, ctx: &AgentContext<'_>) -> Result<AgentTurn, PolicyError> {
        if self.plan.is_none() {
            self.plan = Some(self.generate_plan(ctx)?);
        }
        self.note_progress(ctx);
        let plan = self.plan.as_ref().expect("plan generated");
        if plan.all_done() {
            return Ok(AgentTurn::final_answer(
                "",
                "All planned sub-tasks are complete. Is there anything else I can help with?",
            ));
        }
        let (_, current) = plan.current().expect("not all done");
        let system = format!(
            "You are an e-commerce customer-service assistant executing a plan.\n\n\
             ## Files\n{files}\n\n## Rules\n{rules}\n\n## Tools\n{tools}\n\n## Plan\n{plan}\n\n\
             Execute the next undone sub-task: {next}\n\n## Protocol\n{PROTOCOL_HINT}",
            files = render_files(ctx.files),
            rules = render_rules(ctx.rules),
            tools = render_tools(),
            plan = render_plan(plan),
            next = current.description,
        );
        let mut messages = vec![ChatMessage::user(protocol::wrap_question(ctx.question))];
        for step in ctx.kept_steps() {
            messages.push(ChatMessage::assistant(protocol::render_turn(
                &AgentTurn::call(&step.thought, step.call.clone()),
            )));
            messages.push(ChatMessage::user(protocol::wrap_observation(
                &step.observation,
            )));
        }
        let helper = ReactPolicy {
            backend: Arc::clone(&self.backend),
            seed: self.seed,
        };
        helper.complete_and_parse(system, messages)
    }

    fn plan(&self) -> Option<&Plan> {
        self.plan.as_ref()
    }

    fn accept_revised_plan(&mut self, plan: Plan) {
        self.plan = Some(plan);
    }
}

/// PlanSolvePolicy plus the dynamic module.
pub struct EPlanSolvePolicy {
    inner: PlanSolvePolicy,
    selector: Box<dyn Selector>,
}

impl EPlanSolvePolicy {
    pub fn new(backend: Arc<dyn ModelBackend>, seed: u64, selector: Box<dyn Selector>) -> Self {
        EPlanSolvePolicy {
            inner: PlanSolvePolicy::new(backend, seed),
            selector,
        }
    }
}

impl AgentPolicy for EPlanSolvePolicy {
    fn next_turn(&mut self, ctx: &AgentContext<'_>) -> Result<AgentTurn, PolicyError> {
        self.inner.next_turn(ctx)
    }

    fn selector(&self) -> Option<&dyn Selector> {
        Some(self.selector.as_ref())
    }

    fn plan(&self) -> Option<&Plan> {
        self.inner.plan()
    }

    fn accept_revised_plan(&mut self, plan: Plan) {
        self.inner.accept_revised_plan(plan);
    }
}

/// Replays a fixed turn sequence; the oracle agent for generated tasks.
pub struct ScriptedPolicy {
    turns: VecDeque<AgentTurn>,
}

impl ScriptedPolicy {
    pub fn new(turns: Vec<AgentTurn>) -> ScriptedPolicy {
        ScriptedPolicy {
            turns: turns.into(),
        }
    }
}

impl AgentPolicy for ScriptedPolicy {
    fn next_turn(&mut self, _ctx: &AgentContext<'_>) -> Result<AgentTurn, PolicyError> {
        Ok(self.turns.pop_front().unwrap_or_else(|| {
            AgentTurn::final_answer("script exhausted", "Thank you for your patience.")
        }))
    }
}

// ---------------------------------------------------------------------------
// User policies
// ---------------------------------------------------------------------------

/// The episode engine's view of the simulated customer. Sessions migrate
/// across threads (e.g. behind an HTTP service), so policies are Send.
pub trait UserPolicy: Send {
    /// The opening question (the first demand).
    fn opening(&mut self) -> String;
    /// React to an assistant message with the next utterance.
    fn reply(&mut self, assistant_message: &str) -> String;
}

pub const USER_DONE_ACK: &str = "That is all, thank you.";

/// Emits a fixed opening and reply queue, then acknowledges termination.
pub struct ScriptedUser {
    opening: String,
    replies: VecDeque<String>,
}

impl ScriptedUser {
    pub fn new(opening: &str, replies: &[&str]) -> ScriptedUser {
        ScriptedUser {
            opening: opening.to_string(),
            replies: replies.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn from_vec(opening: String, replies: Vec<String>) -> ScriptedUser {
        ScriptedUser {
            opening,
            replies: replies.into(),
        }
    }
}

impl UserPolicy for ScriptedUser {
    fn opening(&mut self) -> String {
        self.opening.clone()
    }

    fn reply(&mut self, _assistant_message: &str) -> String {
        self.replies
            .pop_front()
            .unwrap_or_else(|| USER_DONE_ACK.to_string())
    }
}

/// A model-backed customer simulator with a scripted fallback: any backend
/// failure hands the remaining turns to the script.
pub struct BackendUser {
    backend: Arc<dyn ModelBackend>,
    seed: u64,
    persona_prompt: String,
    history: Vec<ChatMessage>,
    fallback: ScriptedUser,
    degraded: bool,
}

impl BackendUser {
    pub fn new(
        backend: Arc<dyn ModelBackend>,
        seed: u64,
        persona_prompt: String,
        fallback: ScriptedUser,
    ) -> BackendUser {
        BackendUser {
            backend,
            seed,
            persona_prompt,
            history: Vec::new(),
            fallback,
            degraded: false,
        }
    }
}

impl UserPolicy for BackendUser {
    fn opening(&mut self) -> String {
        let opening = self.fallback.opening();
        self.history.push(ChatMessage::assistant(opening.clone()));
        opening
    }

    fn reply(&mut self, assistant_message: &str) -> String {
        if self.degraded {
            return self.fallback.reply(assistant_message);
        }
        self.history
            .push(ChatMessage::user(assistant_message.to_string()));
        let request = CompletionRequest {
            system: self.persona_prompt.clone(),
            messages: self.history.clone(),
            seed: self.seed,
        };
        match self.backend.complete(&request) {
            Ok(utterance) => {
                self.history.push(ChatMessage::assistant(utterance.clone()));
                // Keep the scripted queue aligned for a later fallback.
                let _ = self.fallback.reply(assistant_message);
                utterance
            }
            Err(_) => {
                self.degraded = true;
                self.fallback.reply(assistant_message)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::{Speaker, TranscriptEntry};
    use serde_json::json;

    fn turn_call(tool: &str) -> AgentTurn {
        AgentTurn::call("t", tools::ToolCall::new(tool, &[]))
    }

    fn empty_ctx_parts() -> (Transcript, Trajectory, RuleSet) {
        (
            Transcript::default(),
            Trajectory::default(),
            RuleSet::full(),
        )
    }

    fn ctx<'a>(
        transcript: &'a Transcript,
        trajectory: &'a Trajectory,
        rules: &'a RuleSet,
    ) -> AgentContext<'a> {
        AgentContext {
            question: "q",
            transcript,
            files: &[],
            rules,
            trajectory,
            trajectory_kept: None,
            plan: None,
            last_feedback: None,
        }
    }

    #[test]
    fn react_passes_through_scripted_backend() {
        let backend = Arc::new(ScriptedBackend::from_turns(&[turn_call(
            "end_conversation",
        )]));
        let mut policy = ReactPolicy::new(backend, 7);
        let (t, tr, r) = empty_ctx_parts();
        let turn = policy.next_turn(&ctx(&t, &tr, &r)).unwrap();
        assert_eq!(turn.as_call().unwrap().tool, "end_conversation");
    }

    #[test]
    fn react_retries_once_then_fails() {
        let backend = Arc::new(ScriptedBackend::new(vec![
            "untagged prose".into(),
            "still untagged".into(),
        ]));
        let mut policy = ReactPolicy::new(backend, 7);
        let (t, tr, r) = empty_ctx_parts();
        let err = policy.next_turn(&ctx(&t, &tr, &r)).unwrap_err();
        assert!(matches!(err, PolicyError::Unparseable(_)));
    }

    #[test]
    fn react_recovers_on_retry() {
        let backend = Arc::new(ScriptedBackend::new(vec![
            "untagged prose".into(),
            protocol::render_turn(&turn_call("end_conversation")),
        ]));
        let mut policy = ReactPolicy::new(backend, 7);
        let (t, tr, r) = empty_ctx_parts();
        let turn = policy.next_turn(&ctx(&t, &tr, &r)).unwrap();
        assert_eq!(turn.as_call().unwrap().tool, "end_conversation");
    }

    #[test]
    fn prompt_contains_exactly_kept_rule_ids() {
        let (t, tr, _) = empty_ctx_parts();
        let kept = rules::rules_for_family(TaskFamily::AfterSales);
        let context = ctx(&t, &tr, &kept);
        let (system, _) = render_react_prompt(&context);
        for rule in kept.rules() {
            assert!(system.contains(&format!("[{}]", rule.rule_id)));
        }
        assert!(
            !system.contains("[coupon-01]"),
            "filtered rules stay out of the prompt"
        );
    }

    #[test]
    fn plan_solve_generates_then_executes() {
        let plan_json = json!({
            "sub_tasks": [
                { "description": "look up the order", "expected_tools": ["get_order_detail"] },
            ]
        })
        .to_string();
        let backend = Arc::new(ScriptedBackend::new(vec![
            plan_json,
            protocol::render_turn(&AgentTurn::call(
                "",
                tools::ToolCall::new("get_order_detail", &[("order_id", json!("O1"))]),
            )),
        ]));
        let mut policy = PlanSolvePolicy::new(backend, 7);
        let (t, tr, r) = empty_ctx_parts();
        let turn = policy.next_turn(&ctx(&t, &tr, &r)).unwrap();
        assert_eq!(turn.as_call().unwrap().tool, "get_order_detail");
        assert_eq!(policy.plan().unwrap().sub_tasks.len(), 1);

        // Feed back a successful observation: the sub-task completes and the
        // policy wraps up on its own.
        let mut tr2 = Trajectory::default();
        tr2.steps.push(crate::episode::TrajectoryStep {
            thought: String::new(),
            call: tools::ToolCall::new("get_order_detail", &[("order_id", json!("O1"))]),
            observation: "{\"ok\":true}".into(),
        });
        let turn = policy.next_turn(&ctx(&t, &tr2, &r)).unwrap();
        assert!(matches!(
            turn.payload,
            protocol::TurnPayload::FinalAnswer { .. }
        ));
    }

    #[test]
    fn scripted_policy_falls_back_to_final_answer() {
        let mut policy = ScriptedPolicy::new(vec![]);
        let (t, tr, r) = empty_ctx_parts();
        let turn = policy.next_turn(&ctx(&t, &tr, &r)).unwrap();
        assert!(matches!(
            turn.payload,
            protocol::TurnPayload::FinalAnswer { .. }
        ));
    }

    #[test]
    fn dynamic_filter_clamps_unknown_rules_and_bad_indices() {
        struct Wild;
        impl Selector for Wild {
            fn name(&self) -> &'static str {
                "wild"
            }
            fn select(&self, _: &FilterInput<'_>) -> Result<DynamicFilterOutput, SelectorError> {
                Ok(DynamicFilterOutput {
                    rules_kept: vec!["basic-01".into(), "made-up-99".into()],
                    trajectory_kept: Some(vec![0, 0, 5, 1]),
                    revised_plan: None,
                })
            }
        }
        let transcript = Transcript::default();
        let mut trajectory = Trajectory::default();
        for _ in 0..2 {
            trajectory.steps.push(crate::episode::TrajectoryStep {
                thought: String::new(),
                call: tools::ToolCall::new("end_conversation", &[]),
                observation: "x".into(),
            });
        }
        let (out, clamped) = dynamic_filter(&transcript, &trajectory, None, &Wild);
        assert!(clamped);
        assert_eq!(out.rules_kept, vec!["basic-01".to_string()]);
        assert_eq!(out.trajectory_kept, Some(vec![0, 1]));
    }

    #[test]
    fn dynamic_filter_fails_open() {
        struct Broken;
        impl Selector for Broken {
            fn name(&self) -> &'static str {
                "broken"
            }
            fn select(&self, _: &FilterInput<'_>) -> Result<DynamicFilterOutput, SelectorError> {
                Err(SelectorError("boom".into()))
            }
        }
        let transcript = Transcript::default();
        let trajectory = Trajectory::default();
        let (out, clamped) = dynamic_filter(&transcript, &trajectory, None, &Broken);
        assert!(clamped);
        assert_eq!(out.rules_kept.len(), rules::CATALOG_LEN);
        assert_eq!(out.trajectory_kept, None);
    }

    #[test]
    fn category_selector_maps_after_sales_context() {
        let mut transcript = Transcript::default();
        transcript.entries.push(TranscriptEntry {
            speaker: Speaker::User,
            text: "My mug arrived cracked, I want a refund [Image 1]".into(),
            asset_markers: vec!["[Image 1]".into()],
        });
        let trajectory = Trajectory::default();
        let (out, clamped) = dynamic_filter(&transcript, &trajectory, None, &CategorySelector);
        assert!(!clamped);
        let expected = rules::rules_for_family(TaskFamily::AfterSales);
        assert_eq!(out.rules_kept, expected.ids().to_vec());
        assert_eq!(out.trajectory_kept, None);
    }

    #[test]
    fn plan_revision_preserves_done_prefix() {
        struct Rewriter;
        impl Selector for Rewriter {
            fn name(&self) -> &'static str {
                "rewriter"
            }
            fn select(&self, _: &FilterInput<'_>) -> Result<DynamicFilterOutput, SelectorError> {
                Ok(DynamicFilterOutput {
                    rules_kept: RuleSet::full().ids().to_vec(),
                    trajectory_kept: None,
                    revised_plan: Some(Plan {
                        sub_tasks: vec![
                            SubTask {
                                description: "attempt to rewrite history".into(),
                                expected_tools: vec![],
                                done: true,
                            },
                            SubTask {
                                description: "new follow-up".into(),
                                expected_tools: vec![],
                                done: false,
                            },
                        ],
                    }),
                })
            }
        }
        let plan = Plan {
            sub_tasks: vec![
                SubTask {
                    description: "done already".into(),
                    expected_tools: vec![],
                    done: true,
                },
                SubTask {
                    description: "old follow-up".into(),
                    expected_tools: vec![],
                    done: false,
                },
            ],
        };
        let transcript = Transcript::default();
        let trajectory = Trajectory::default();
        let (out, _) = dynamic_filter(&transcript, &trajectory, Some(&plan), &Rewriter);
        let revised = out.revised_plan.unwrap();
        assert_eq!(revised.sub_tasks[0].description, "done already");
        assert!(revised.sub_tasks[0].done);
        assert_eq!(revised.sub_tasks[1].description, "new follow-up");
    }

    #[test]
    fn scripted_user_acknowledges_after_queue() {
        let mut user = ScriptedUser::new("opening", &["first reply"]);
        assert_eq!(user.opening(), "opening");
        assert_eq!(user.reply("msg"), "first reply");
        assert_eq!(user.reply("msg"), USER_DONE_ACK);
    }

    #[test]
    fn backend_user_falls_back_when_backend_dies() {
        let backend = Arc::new(ScriptedBackend::new(vec!["simulated reply".into()]));
        let fallback = ScriptedUser::new("opening", &["scripted 1", "scripted 2"]);
        let mut user = BackendUser::new(backend, 7, "persona".into(), fallback);
        assert_eq!(user.opening(), "opening");
        assert_eq!(user.reply("hi"), "simulated reply");
        // Backend exhausted: degrade to the aligned script.
        assert_eq!(user.reply("hi again"), "scripted 2");
    }
}
