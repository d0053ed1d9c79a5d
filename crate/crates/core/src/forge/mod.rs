//! Synthetic task generation: seeded worlds, user profiles built around
//! oracle-derived answers, question-type classification, and the quality
//! gates that reject anything the oracle agent cannot solve perfectly.

mod scenario;
mod validate;
mod worldgen;

pub use scenario::DialoguePlan;
pub use validate::{
    export_training_segments, run_scripted, score_outcome, validate_task, SftSegment,
    ValidationReport,
};
pub use worldgen::{generate_world, WorldConfig};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{ScriptedPolicy, ScriptedUser};
use crate::episode::{run_episode, EpisodeConfig, Limits, Termination};
use crate::money::Money;
use crate::oracle::{
    AfterSalesReason, AfterSalesType, DesiredSolution, LogisticsIntent, Mood, QuestionType,
};
use crate::protocol::AgentTurn;
use crate::rules::{rules_for_family, TaskFamily};
use crate::score;
use crate::tools::ToolCall;
use crate::world::{AssetRef, LogisticsState, WorldData, WorldState};

// ---------------------------------------------------------------------------
// Profiles and demands
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub user_id: String,
    pub name: String,
    pub level: u32,
    pub address: String,
    pub mood: Mood,
}

/// One typed customer demand. A profile carries one or more, all about the
/// same customer; logistics profiles may combine several.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Demand {
    AddressChange {
        order_id: String,
        new_address: String,
    },
    ArrivalQuery {
        order_id: String,
        /// A brand the customer successfully specified earlier in the
        /// conversation (via a brand request demand).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        brand: Option<String>,
    },
    ReturnCostQuery {
        order_id: String,
    },
    BrandRequest {
        order_id: String,
        brand: String,
    },
    SignedNotReceived {
        order_id: String,
    },
    AfterSales {
        order_id: String,
        reason: AfterSalesReason,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        evidence_asset: Option<String>,
        desired: DesiredSolution,
        used: bool,
        /// Index of the resolution-ladder rung the conversation settles on
        /// (rungs before it are offered and rejected).
        realized_rung: usize,
    },
    CouponQuery {
        item_id: String,
    },
    RecommendationQuery {
        shop_id: String,
        category: String,
        max_price: Money,
    },
    LivestreamQuery {
        item_id: String,
    },
    PreSalesArrival {
        shop_id: String,
        item_id: String,
    },
}

impl Demand {
    pub fn family(&self) -> TaskFamily {
        match self {
            Demand::AddressChange { .. }
            | Demand::ArrivalQuery { .. }
            | Demand::ReturnCostQuery { .. }
            | Demand::BrandRequest { .. }
            | Demand::SignedNotReceived { .. } => TaskFamily::Logistics,
            Demand::AfterSales { .. } => TaskFamily::AfterSales,
            Demand::CouponQuery { .. }
            | Demand::RecommendationQuery { .. }
            | Demand::LivestreamQuery { .. }
            | Demand::PreSalesArrival { .. } => TaskFamily::PreSales,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub persona: Persona,
    pub demands: Vec<Demand>,
}

// ---------------------------------------------------------------------------
// Task specification
// ---------------------------------------------------------------------------

/// One step of the reference action chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionStep {
    pub thought: String,
    pub call: ToolCall,
    pub observation_digest: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskAsset {
    pub provided_upfront: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskAssetRef {
    pub asset_id: String,
    pub provided_upfront: bool,
}

/// One benchmark sample: profile, question type, initial and ground-truth
/// worlds, key answers, reference plan and action chain, rule scope, and
/// the scripted customer realization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub family: TaskFamily,
    pub profile: UserProfile,
    pub question_type: QuestionType,
    pub initial_world: WorldData,
    pub ground_truth_world: WorldData,
    pub key_answers: Vec<String>,
    pub reference_plan: String,
    pub action_chain: Vec<ActionStep>,
    pub rules_scope: Vec<String>,
    pub user_opening: String,
    pub user_replies: Vec<String>,
    pub task_assets: Vec<TaskAssetRef>,
    pub expected_termination: Termination,
}

impl TaskSpec {
    pub fn initial_state(&self) -> Result<WorldState, crate::world::WorldError> {
        WorldState::new(self.initial_world.clone())
    }

    pub fn ground_truth_snapshot(&self) -> crate::world::StateSnapshot {
        crate::world::StateSnapshot {
            data: self.ground_truth_world.clone(),
            version: 0,
        }
    }

    /// Assets the customer sends mid-conversation (marker pool).
    pub fn marker_assets(&self) -> Vec<AssetRef> {
        self.task_assets
            .iter()
            .filter(|a| !a.provided_upfront)
            .filter_map(|a| self.initial_world.assets.get(&a.asset_id).cloned())
            .collect()
    }

    /// Knowledge-base files attached to the agent context up front.
    pub fn upfront_assets(&self) -> Vec<AssetRef> {
        self.task_assets
            .iter()
            .filter(|a| a.provided_upfront)
            .filter_map(|a| self.initial_world.assets.get(&a.asset_id).cloned())
            .collect()
    }

    pub fn has_image(&self) -> bool {
        self.asset_modalities()
            .any(|m| m == crate::world::AssetModality::Image)
    }

    pub fn has_video(&self) -> bool {
        self.asset_modalities()
            .any(|m| m == crate::world::AssetModality::Video)
    }

    fn asset_modalities(&self) -> impl Iterator<Item = crate::world::AssetModality> + '_ {
        self.task_assets
            .iter()
            .filter_map(|a| self.initial_world.assets.get(&a.asset_id))
            .map(|a| a.modality)
    }

    pub fn oracle_policy(&self) -> ScriptedPolicy {
        ScriptedPolicy::new(
            self.action_chain
                .iter()
                .map(|s| AgentTurn::call(&s.thought, s.call.clone()))
                .collect(),
        )
    }

    pub fn scripted_user(&self) -> ScriptedUser {
        ScriptedUser::from_vec(self.user_opening.clone(), self.user_replies.clone())
    }

    /// A model-backed customer simulator for this task, falling back to
    /// the scripted realization on any backend failure.
    pub fn backend_user(
        &self,
        backend: std::sync::Arc<dyn crate::agents::ModelBackend>,
        seed: u64,
    ) -> crate::agents::BackendUser {
        crate::agents::BackendUser::new(
            backend,
            seed,
            persona_prompt(&self.profile),
            self.scripted_user(),
        )
    }
}

/// Render a profile into a customer-simulator system prompt: persona,
/// mood directions, and the demand list in order.
pub fn persona_prompt(profile: &UserProfile) -> String {
    let mood_line = match profile.persona.mood {
        Mood::Calm => "You are calm and cooperative.",
        Mood::Impatient => {
            "You are impatient: reject the first remedy the assistant offers once, \
             then accept the next workable one."
        }
    };
    let demands = profile
        .demands
        .iter()
        .enumerate()
        .map(|(i, d)| format!("{}. {}", i + 1, demand_summary(d)))
        .collect::<Vec<_>>()
        .join("\n");
    format!(
        "You are simulating an e-commerce customer named {name} (member level {level}, \
         usual address: {address}). {mood_line}\nRaise these needs one at a time, in \
         order, and answer the assistant's questions truthfully:\n{demands}\nWhen every \
         need is settled, say that is all and thank the assistant.",
        name = profile.persona.name,
        level = profile.persona.level,
        address = profile.persona.address,
    )
}

fn demand_summary(demand: &Demand) -> String {
    match demand {
        Demand::AddressChange { order_id, new_address } => {
            format!("change the shipping address of order {order_id} to {new_address}")
        }
        Demand::ArrivalQuery { order_id, .. } => {
            format!("ask when order {order_id} will arrive")
        }
        Demand::ReturnCostQuery { order_id } => {
            format!("ask how much you must advance to return order {order_id}")
        }
        Demand::BrandRequest { order_id, brand } => {
            format!("ask to ship order {order_id} with {brand}")
        }
        Demand::SignedNotReceived { order_id } => {
            format!("report that order {order_id} is marked delivered but never arrived")
        }
        Demand::AfterSales { order_id, reason, desired, .. } => format!(
            "open an after-sales request on order {order_id} ({}), hoping for: {}",
            reason.label(),
            desired.label()
        ),
        Demand::CouponQuery { item_id } => {
            format!("ask the minimum you would pay for item {item_id} with your coupons")
        }
        Demand::RecommendationQuery { shop_id, category, max_price } => format!(
            "ask shop {shop_id} for {category} items under {} RMB",
            max_price.display_whole_yuan()
        ),
        Demand::LivestreamQuery { item_id } => {
            format!("ask what the recent live stream said about item {item_id}")
        }
        Demand::PreSalesArrival { shop_id, item_id } => {
            format!("ask when item {item_id} from shop {shop_id} would arrive if ordered now")
        }
    }
}

#[derive(Debug, Error)]
pub enum DeriveError {
    #[error("profile references missing record: {0}")]
    MissingRecord(String),
    #[error("profile demands are inconsistent with the world: {0}")]
    Inconsistent(String),
    #[error("oracle rejected the scenario: {0}")]
    Oracle(#[from] crate::oracle::OracleError),
    #[error("world is invalid: {0}")]
    World(#[from] crate::world::WorldError),
    #[error("dry run diverged from the derived ground truth: {0}")]
    DryRun(String),
}

// ---------------------------------------------------------------------------
// Question-type derivation
// ---------------------------------------------------------------------------

/// Deterministic mapping from demand descriptors plus world status to the
/// structured question type.
pub fn derive_question_type(
    profile: &UserProfile,
    world: &WorldData,
) -> Result<QuestionType, DeriveError> {
    let family = profile
        .demands
        .first()
        .map(Demand::family)
        .ok_or_else(|| DeriveError::Inconsistent("profile has no demands".into()))?;
    if profile.demands.iter().any(|d| d.family() != family) {
        return Err(DeriveError::Inconsistent(
            "demands span multiple families".into(),
        ));
    }
    for demand in &profile.demands {
        check_demand_world(demand, world)?;
    }
    let after_sales = profile.demands.iter().find_map(|d| match d {
        Demand::AfterSales {
            reason,
            evidence_asset,
            desired,
            ..
        } => {
            let image_verification = match evidence_asset {
                None => false,
                Some(id) => world
                    .assets
                    .get(id)
                    .map(|a| a.evidence.get(claim_key(*reason)).copied().unwrap_or(false))
                    .unwrap_or(false),
            };
            Some(AfterSalesType {
                reason: *reason,
                image_verification,
                solution: desired.clone(),
                mood: profile.persona.mood,
            })
        }
        _ => None,
    });
    let logistics_intents = if family == TaskFamily::Logistics {
        Some(
            profile
                .demands
                .iter()
                .filter_map(|d| match d {
                    Demand::AddressChange { .. } => Some(LogisticsIntent::AddressChange),
                    Demand::ArrivalQuery { .. } => Some(LogisticsIntent::ArrivalQuery),
                    Demand::ReturnCostQuery { .. } => Some(LogisticsIntent::ShippingCostQuery),
                    Demand::BrandRequest { .. } => Some(LogisticsIntent::BrandRequest),
                    Demand::SignedNotReceived { .. } => Some(LogisticsIntent::SignedNotReceived),
                    _ => None,
                })
                .collect(),
        )
    } else {
        None
    };
    Ok(QuestionType {
        family,
        after_sales,
        logistics_intents,
    })
}

pub(crate) fn claim_key(reason: AfterSalesReason) -> &'static str {
    match reason {
        AfterSalesReason::MissingItems => "missing_items",
        AfterSalesReason::TransitDamage => "damage",
        AfterSalesReason::QualityDissatisfaction => "quality",
        AfterSalesReason::PersonalReason => "personal",
    }
}

fn check_demand_world(demand: &Demand, world: &WorldData) -> Result<(), DeriveError> {
    let need_order = |id: &str| {
        world
            .orders
            .get(id)
            .ok_or_else(|| DeriveError::MissingRecord(format!("order {id:?}")))
    };
    match demand {
        Demand::AddressChange {
            order_id,
            new_address,
        } => {
            need_order(order_id)?;
            if new_address.trim().is_empty() {
                return Err(DeriveError::Inconsistent("empty new address".into()));
            }
        }
        Demand::ArrivalQuery { order_id, .. }
        | Demand::ReturnCostQuery { order_id }
        | Demand::BrandRequest { order_id, .. } => {
            need_order(order_id)?;
        }
        Demand::SignedNotReceived { order_id } => {
            let order = need_order(order_id)?;
            let delivered = world
                .logistics_for_order(&order.order_id)
                .is_some_and(|l| l.state == LogisticsState::Delivered);
            if !delivered {
                return Err(DeriveError::Inconsistent(
                    "signed-not-received requires a delivered shipment".into(),
                ));
            }
        }
        Demand::AfterSales {
            order_id,
            evidence_asset,
            reason,
            ..
        } => {
            need_order(order_id)?;
            if let Some(id) = evidence_asset {
                if !world.assets.contains_key(id) {
                    return Err(DeriveError::MissingRecord(format!("asset {id:?}")));
                }
            }
            if *reason != AfterSalesReason::PersonalReason && evidence_asset.is_none() {
                // No picture for an evidence-demanding reason is the
                // "cannot provide proof" branch; allowed.
            }
        }
        Demand::CouponQuery { item_id } | Demand::LivestreamQuery { item_id } => {
            if !world.products.contains_key(item_id) {
                return Err(DeriveError::MissingRecord(format!("item {item_id:?}")));
            }
        }
        Demand::RecommendationQuery { shop_id, .. } => {
            if !world.merchants.contains_key(shop_id) {
                return Err(DeriveError::MissingRecord(format!("shop {shop_id:?}")));
            }
        }
        Demand::PreSalesArrival { shop_id, item_id } => {
            if !world.merchants.contains_key(shop_id) {
                return Err(DeriveError::MissingRecord(format!("shop {shop_id:?}")));
            }
            if !world.products.contains_key(item_id) {
                return Err(DeriveError::MissingRecord(format!("item {item_id:?}")));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub count: usize,
    /// Fixed family, or None for a round-robin mix.
    pub family: Option<TaskFamily>,
    /// Share of evidence-bearing after-sales claims whose pictures verify.
    pub evidence_ok_ratio: f64,
    /// Share of pre-sales tasks built on live-stream clips (video).
    pub presales_video_ratio: f64,
    /// Share of after-sales tasks that carry a customer image.
    pub after_sales_image_ratio: f64,
    pub world: WorldConfig,
}

impl GenConfig {
    pub fn new(seed: u64, count: usize, family: Option<TaskFamily>) -> GenConfig {
        GenConfig {
            seed,
            count,
            family,
            evidence_ok_ratio: 0.70,
            presales_video_ratio: 0.30,
            after_sales_image_ratio: 0.77,
            world: WorldConfig::default(),
        }
    }
}

/// Generate `count` validated tasks. Deterministic in the seed: the same
/// config produces byte-identical task files.
pub fn generate_tasks(cfg: &GenConfig) -> Vec<TaskSpec> {
    let mut tasks = Vec::with_capacity(cfg.count);
    for index in 0..cfg.count {
        let family = cfg
            .family
            .unwrap_or(TaskFamily::ALL[index % TaskFamily::ALL.len()]);
        if let Some(task) = generate_one(cfg, index, family) {
            tasks.push(task);
        }
    }
    tasks
}

fn generate_one(cfg: &GenConfig, index: usize, family: TaskFamily) -> Option<TaskSpec> {
    for attempt in 0u64..32 {
        let sub_seed = cfg
            .seed
            .wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
            .wrapping_add(attempt.wrapping_mul(0xD1B5_4A32_D192_ED03));
        let mut rng = StdRng::seed_from_u64(sub_seed);
        let world = generate_world(sub_seed, &cfg.world);
        let Some(profile) = sample_profile(&mut rng, &world.data, family, cfg) else {
            continue;
        };
        let task_id = format!("{}-{:04}-{}", cfg.seed, index, family.as_str());
        match derive_task(&task_id, &world.data, &profile) {
            Ok(task) => {
                if validate_task(&task, None).pass {
                    return Some(task);
                }
            }
            Err(_) => continue,
        }
    }
    None
}

/// Build the task around the oracle: compile the dialogue plan, apply the
/// prescribed writes for the ground truth, then dry-run the scripted pair
/// and check the outcome matches before freezing observation digests.
pub fn derive_task(
    task_id: &str,
    world: &WorldData,
    profile: &UserProfile,
) -> Result<TaskSpec, DeriveError> {
    let question_type = derive_question_type(profile, world)?;
    let plan = scenario::compile(profile, world)?;

    let initial = WorldState::new(world.clone())?;
    let ground_truth = WorldState::replay_writes(&initial.snapshot(), &plan.writes)?;

    // Dry run: scripted assistant against scripted customer.
    let outcome = run_episode(
        EpisodeConfig {
            world: WorldState::new(world.clone())?,
            assets: plan
                .task_assets
                .iter()
                .filter(|a| !a.provided_upfront)
                .filter_map(|a| world.assets.get(&a.asset_id).cloned())
                .collect(),
            preattached: plan
                .task_assets
                .iter()
                .filter(|a| a.provided_upfront)
                .filter_map(|a| world.assets.get(&a.asset_id).cloned())
                .collect(),
            limits: Limits::default(),
            multimodal: true,
        },
        &mut ScriptedPolicy::new(plan.turns.clone()),
        Box::new(ScriptedUser::from_vec(
            plan.opening.clone(),
            plan.user_replies.clone(),
        )),
    );
    if outcome.termination != plan.expected_termination {
        return Err(DeriveError::DryRun(format!(
            "termination {:?}, expected {:?}",
            outcome.termination, plan.expected_termination
        )));
    }
    if !outcome
        .final_snapshot
        .canonical_eq(&ground_truth.snapshot())
    {
        return Err(DeriveError::DryRun(
            "final state differs from prescribed writes".into(),
        ));
    }
    let calls: Vec<&AgentTurn> = plan
        .turns
        .iter()
        .filter(|t| t.as_call().is_some())
        .collect();
    if calls.len() != outcome.trajectory.steps.len() {
        return Err(DeriveError::DryRun(format!(
            "{} scripted calls but {} executed steps",
            calls.len(),
            outcome.trajectory.steps.len()
        )));
    }
    let action_chain = outcome
        .trajectory
        .steps
        .iter()
        .map(|s| ActionStep {
            thought: s.thought.clone(),
            call: s.call.clone(),
            observation_digest: score::digest(&s.observation),
        })
        .collect();

    Ok(TaskSpec {
        task_id: task_id.to_string(),
        family: question_type.family,
        profile: profile.clone(),
        question_type,
        initial_world: world.clone(),
        ground_truth_world: ground_truth.data,
        key_answers: plan.key_answers,
        reference_plan: plan.plan_text,
        action_chain,
        rules_scope: rules_for_family(profile.demands[0].family()).ids().to_vec(),
        user_opening: plan.opening,
        user_replies: plan.user_replies,
        task_assets: plan.task_assets,
        expected_termination: plan.expected_termination,
    })
}

// ---------------------------------------------------------------------------
// Profile sampling
// ---------------------------------------------------------------------------

/// Pick a customer and demand set the world can actually host. Returns
/// None when the world offers nothing for the family (e.g. no orders).
pub fn sample_profile(
    rng: &mut StdRng,
    world: &WorldData,
    family: TaskFamily,
    cfg: &GenConfig,
) -> Option<UserProfile> {
    match family {
        TaskFamily::Logistics => scenario::sample_logistics_profile(rng, world),
        TaskFamily::AfterSales => scenario::sample_after_sales_profile(rng, world, cfg),
        TaskFamily::PreSales => scenario::sample_presales_profile(rng, world, cfg),
    }
}

pub(crate) fn persona_for(world: &WorldData, user_id: &str, mood: Mood) -> Option<Persona> {
    let user = world.users.get(user_id)?;
    Some(Persona {
        user_id: user.user_id.clone(),
        name: user.name.clone(),
        level: user.level,
        address: user.default_address.clone(),
        mood,
    })
}

pub(crate) fn pick<'a, T>(rng: &mut StdRng, items: &'a [T]) -> Option<&'a T> {
    if items.is_empty() {
        None
    } else {
        items.get(rng.gen_range(0..items.len()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::RuleSet;

    #[test]
    fn generates_validated_tasks_for_every_family() {
        for family in TaskFamily::ALL {
            let cfg = GenConfig::new(11, 4, Some(family));
            let tasks = generate_tasks(&cfg);
            assert_eq!(tasks.len(), 4, "{family} generation came up short");
            for task in &tasks {
                assert_eq!(task.family, family);
                assert!(!task.key_answers.is_empty());
                assert!(!task.action_chain.is_empty());
                let report = validate_task(task, None);
                assert!(report.pass, "{}: {:?}", task.task_id, report.problems);
            }
        }
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let cfg = GenConfig::new(7, 6, None);
        let a = generate_tasks(&cfg);
        let b = generate_tasks(&cfg);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = generate_tasks(&GenConfig::new(8, 6, None));
        assert_ne!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&c).unwrap()
        );
    }

    #[test]
    fn rules_scope_follows_the_filter_mapping_and_includes_basic() {
        let tasks = generate_tasks(&GenConfig::new(5, 6, None));
        for task in &tasks {
            let scope = RuleSet::clamped(&task.rules_scope);
            assert_eq!(
                scope.ids(),
                task.rules_scope.as_slice(),
                "scope within catalog"
            );
            assert!(task.rules_scope.iter().any(|r| r.starts_with("basic-")));
            assert_eq!(
                task.rules_scope,
                rules_for_family(task.family).ids().to_vec(),
                "scope is the family mapping"
            );
        }
    }

    #[test]
    fn question_type_rederives_from_profile() {
        let tasks = generate_tasks(&GenConfig::new(13, 9, None));
        assert!(!tasks.is_empty());
        for task in &tasks {
            let theta = derive_question_type(&task.profile, &task.initial_world).unwrap();
            assert_eq!(theta, task.question_type, "{}", task.task_id);
        }
    }

    #[test]
    fn evidence_annotation_drives_image_verification() {
        // Scan a batch for both verified and unverified complaints.
        let tasks = generate_tasks(&GenConfig::new(3, 30, Some(TaskFamily::AfterSales)));
        let thetas: Vec<bool> = tasks
            .iter()
            .filter_map(|t| t.question_type.after_sales.as_ref())
            .filter(|a| a.reason != AfterSalesReason::PersonalReason)
            .map(|a| a.image_verification)
            .collect();
        assert!(thetas.iter().any(|&v| v), "some verified claims expected");
        assert!(
            thetas.iter().any(|&v| !v),
            "some unverified claims expected"
        );
    }

    #[test]
    fn derive_errors_on_missing_order() {
        let world = generate_world(1, &WorldConfig::default());
        let persona = persona_for(&world.data, "U1", Mood::Calm).unwrap();
        let profile = UserProfile {
            persona,
            demands: vec![Demand::ArrivalQuery {
                order_id: "NOPE".into(),
                brand: None,
            }],
        };
        assert!(derive_question_type(&profile, &world.data).is_err());
    }

    #[test]
    fn backend_user_simulates_and_degrades_to_script() {
        use crate::agents::{ScriptedBackend, UserPolicy};
        let task = generate_tasks(&GenConfig::new(17, 1, None)).remove(0);
        let prompt = persona_prompt(&task.profile);
        assert!(prompt.contains(&task.profile.persona.name));
        assert!(prompt.contains("1. "));

        let backend = std::sync::Arc::new(ScriptedBackend::new(vec!["simulated line".into()]));
        let mut user = task.backend_user(backend, 7);
        assert_eq!(user.opening(), task.user_opening);
        assert_eq!(user.reply("hello"), "simulated line");
        // Backend exhausted: remaining turns come from the aligned script.
        let fallback_reply = user.reply("and now?");
        let mut scripted = task.scripted_user();
        let _ = scripted.opening();
        let _ = scripted.reply("hello");
        assert_eq!(fallback_reply, scripted.reply("and now?"));
    }

    #[test]
    fn fresh_goods_refund_only_never_discloses_the_merchant_address() {
        // Scan after-sales batches for realized refund-only resolutions.
        let mut found = 0;
        for seed in 0..40 {
            for task in generate_tasks(&GenConfig::new(seed, 4, Some(TaskFamily::AfterSales))) {
                let refund_only = task
                    .ground_truth_world
                    .orders
                    .values()
                    .any(|o| o.status == crate::world::OrderStatus::RefundOnly);
                if !refund_only {
                    continue;
                }
                found += 1;
                let order = task
                    .ground_truth_world
                    .orders
                    .values()
                    .find(|o| o.status == crate::world::OrderStatus::RefundOnly)
                    .unwrap();
                let product = &task.initial_world.products[&order.item_id];
                assert!(product.is_fresh_perishable, "{}", task.task_id);
                let merchant = &task.initial_world.merchants[&product.shop_id];
                for key in &task.key_answers {
                    assert!(
                        !key.contains(&merchant.return_address),
                        "{}: refund-only key answers must not carry the merchant address",
                        task.task_id
                    );
                }
            }
            if found >= 3 {
                return;
            }
        }
        panic!("no refund-only task generated in the seed range");
    }
}
