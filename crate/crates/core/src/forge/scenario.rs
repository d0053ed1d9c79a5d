//! Demand sampling and the dialogue compiler: each profile compiles to a
//! matched pair of scripts (assistant turns, customer replies) plus the
//! prescribed writes, key answers, and plan text — all derived from the
//! rule oracle.

use rand::rngs::StdRng;
use rand::Rng;

use crate::episode::Termination;
use crate::money::Money;
use crate::oracle::{
    self, AddressChangeKind, AfterSalesInputs, AfterSalesReason, AfterSalesType, DesiredSolution,
    Mood, Resolution, ResolutionKind, ReturnAssessment,
};
use crate::protocol::AgentTurn;
use crate::time::system_now;
use crate::tools::ToolCall;
use crate::world::{
    FieldWrite, LogisticsRecord, LogisticsState, MerchantRecord, OrderRecord, OrderStatus,
    ProductRecord, WorldData,
};

use super::{
    claim_key, persona_for, pick, Demand, DeriveError, GenConfig, Persona, TaskAssetRef,
    UserProfile,
};

const ANYTHING_ELSE: &str = "Is there anything else I can help you with?";

// ---------------------------------------------------------------------------
// Dialogue plan
// ---------------------------------------------------------------------------

/// The compiled realization of a profile: both conversation sides, the
/// prescribed database writes, the key answers, and the plan text.
#[derive(Debug, Clone)]
pub struct DialoguePlan {
    pub opening: String,
    pub user_replies: Vec<String>,
    pub turns: Vec<AgentTurn>,
    pub key_answers: Vec<String>,
    pub writes: Vec<FieldWrite>,
    pub plan_text: String,
    pub task_assets: Vec<TaskAssetRef>,
    pub expected_termination: Termination,
}

struct Builder<'w> {
    world: &'w WorldData,
    persona: &'w Persona,
    opening: Option<String>,
    replies: Vec<String>,
    turns: Vec<AgentTurn>,
    key_answers: Vec<String>,
    writes: Vec<FieldWrite>,
    plan_lines: Vec<String>,
    task_assets: Vec<TaskAssetRef>,
    read_keys: std::collections::BTreeSet<String>,
    specified_brand: Option<String>,
    expected_termination: Termination,
}

impl<'w> Builder<'w> {
    fn new(world: &'w WorldData, persona: &'w Persona) -> Builder<'w> {
        Builder {
            world,
            persona,
            opening: None,
            replies: Vec::new(),
            turns: Vec::new(),
            key_answers: Vec::new(),
            writes: Vec::new(),
            plan_lines: Vec::new(),
            task_assets: Vec::new(),
            read_keys: std::collections::BTreeSet::new(),
            specified_brand: None,
            expected_termination: Termination::Completed,
        }
    }

    fn user_says(&mut self, text: String) {
        if self.opening.is_none() {
            self.opening = Some(text);
        } else {
            self.replies.push(text);
        }
    }

    fn call(&mut self, thought: &str, tool: &str, args: &[(&str, serde_json::Value)]) {
        self.turns
            .push(AgentTurn::call(thought, ToolCall::new(tool, args)));
    }

    fn read(&mut self, thought: &str, tool: &str, key_arg: &str, id: &str) {
        let dedup = format!("{tool}:{id}");
        if self.read_keys.insert(dedup) {
            self.call(thought, tool, &[(key_arg, serde_json::json!(id))]);
        }
    }

    fn say(&mut self, thought: &str, text: String) {
        self.call(
            thought,
            "talk_to_user",
            &[("content", serde_json::json!(text))],
        );
    }

    fn write(&mut self, thought: &str, write: FieldWrite) {
        let (tool, args): (&str, Vec<(&str, serde_json::Value)>) = match &write {
            FieldWrite::OrderAddress { order_id, address } => (
                "modify_order_address",
                vec![
                    ("order_id", serde_json::json!(order_id)),
                    ("address", serde_json::json!(address)),
                ],
            ),
            FieldWrite::OrderStatus { order_id, status } => (
                "modify_order_state",
                vec![
                    ("order_id", serde_json::json!(order_id)),
                    ("state", serde_json::json!(status.as_str())),
                ],
            ),
            FieldWrite::LogisticsAddress {
                logistics_id,
                address,
            } => (
                "modify_logistics_address",
                vec![
                    ("logistics_id", serde_json::json!(logistics_id)),
                    ("address", serde_json::json!(address)),
                ],
            ),
            FieldWrite::LogisticsState {
                logistics_id,
                state,
            } => (
                "modify_logistics_state",
                vec![
                    ("logistics_id", serde_json::json!(logistics_id)),
                    ("state", serde_json::json!(state.as_str())),
                ],
            ),
            FieldWrite::RemarkAppend { order_id, content } => (
                "remark",
                vec![
                    ("order_id", serde_json::json!(order_id)),
                    ("content", serde_json::json!(content)),
                ],
            ),
        };
        self.call(thought, tool, &args);
        self.writes.push(write);
    }

    fn key(&mut self, fact: String) {
        self.key_answers.push(fact);
    }

    fn plan(&mut self, line: String) {
        self.plan_lines.push(line);
    }

    fn order(&self, id: &str) -> Result<&'w OrderRecord, DeriveError> {
        self.world
            .orders
            .get(id)
            .ok_or_else(|| DeriveError::MissingRecord(format!("order {id:?}")))
    }

    fn product_of(&self, order: &OrderRecord) -> Result<&'w ProductRecord, DeriveError> {
        self.world
            .products
            .get(&order.item_id)
            .ok_or_else(|| DeriveError::MissingRecord(format!("item {:?}", order.item_id)))
    }

    fn merchant_of(&self, product: &ProductRecord) -> Result<&'w MerchantRecord, DeriveError> {
        self.world
            .merchants
            .get(&product.shop_id)
            .ok_or_else(|| DeriveError::MissingRecord(format!("shop {:?}", product.shop_id)))
    }

    fn logistics_of(&self, order: &OrderRecord) -> Option<&'w LogisticsRecord> {
        self.world.logistics_for_order(&order.order_id)
    }

    fn finish(self) -> DialoguePlan {
        let mut turns = self.turns;
        if self.expected_termination == Termination::Completed {
            turns.push(AgentTurn::call(
                "All requests are settled; end the conversation.",
                ToolCall::new("end_conversation", &[]),
            ));
        }
        let plan_text = self
            .plan_lines
            .iter()
            .enumerate()
            .map(|(i, l)| format!("{}. {l}", i + 1))
            .collect::<Vec<_>>()
            .join(" ");
        DialoguePlan {
            opening: self.opening.unwrap_or_default(),
            user_replies: self.replies,
            turns,
            key_answers: self.key_answers,
            writes: self.writes,
            plan_text,
            task_assets: self.task_assets,
            expected_termination: self.expected_termination,
        }
    }
}

// ---------------------------------------------------------------------------
// Compilation
// ---------------------------------------------------------------------------

/// Compile a profile into its dialogue plan.
pub fn compile(profile: &UserProfile, world: &WorldData) -> Result<DialoguePlan, DeriveError> {
    let mut b = Builder::new(world, &profile.persona);
    for demand in &profile.demands {
        match demand {
            Demand::BrandRequest { order_id, brand } => {
                compile_brand_request(&mut b, order_id, brand)?
            }
            Demand::ArrivalQuery { order_id, brand } => {
                compile_arrival(&mut b, order_id, brand.as_deref())?
            }
            Demand::ReturnCostQuery { order_id } => compile_return_cost(&mut b, order_id)?,
            Demand::SignedNotReceived { order_id } => {
                compile_signed_not_received(&mut b, order_id)?
            }
            Demand::AddressChange {
                order_id,
                new_address,
            } => compile_address_change(&mut b, order_id, new_address)?,
            Demand::AfterSales { .. } => compile_after_sales(&mut b, demand)?,
            Demand::CouponQuery { item_id } => compile_coupon_query(&mut b, item_id)?,
            Demand::RecommendationQuery {
                shop_id,
                category,
                max_price,
            } => compile_recommendation(&mut b, shop_id, category, *max_price)?,
            Demand::LivestreamQuery { item_id } => compile_livestream(&mut b, item_id)?,
            Demand::PreSalesArrival { shop_id, item_id } => {
                compile_presales_arrival(&mut b, shop_id, item_id)?
            }
        }
    }
    Ok(b.finish())
}

fn compile_brand_request(b: &mut Builder, order_id: &str, brand: &str) -> Result<(), DeriveError> {
    let order = b.order(order_id)?;
    let product = b.product_of(order)?;
    let merchant = b.merchant_of(product)?;
    let logistics = b.logistics_of(order);
    b.user_says(format!("Can you ship my order {order_id} with {brand}?"));
    b.read(
        "Check the order and whether it has shipped.",
        "get_order_detail",
        "order_id",
        order_id,
    );
    b.read(
        "Check which brands the merchant uses.",
        "get_shop_detail",
        "shop_id",
        &merchant.shop_id,
    );
    match oracle::brand_request_decision(merchant, logistics, brand) {
        oracle::BrandDecision::RecordInRemark => {
            b.write(
                "Record the requested brand in the order notes.",
                FieldWrite::RemarkAppend {
                    order_id: order_id.to_string(),
                    content: format!("Customer requests logistics brand {brand} for this order"),
                },
            );
            b.specified_brand = Some(brand.to_string());
            b.key(format!("recorded your request for {brand}"));
            b.say(
                "Confirm the brand request is noted.",
                format!("Noted! We have recorded your request for {brand} in the order notes. {ANYTHING_ELSE}"),
            );
            b.plan(format!(
                "Record the requested logistics brand {brand} in the notes of order {order_id}."
            ));
        }
        oracle::BrandDecision::DeclineAlreadyShipped => {
            b.key("the logistics brand can no longer be changed".to_string());
            b.say(
                "The order has shipped; decline politely.",
                format!("I am sorry, but order {order_id} has already shipped, so the logistics brand can no longer be changed. {ANYTHING_ELSE}"),
            );
            b.plan(format!(
                "Decline the brand request for order {order_id}: already shipped."
            ));
        }
        oracle::BrandDecision::DeclineNotSupported => {
            b.key("does not support specifying a logistics brand".to_string());
            b.say(
                "The merchant does not support brand choice; decline politely.",
                format!("I am sorry, but this merchant does not support specifying a logistics brand. {ANYTHING_ELSE}"),
            );
            b.plan(format!(
                "Decline the brand request for order {order_id}: not supported."
            ));
        }
        oracle::BrandDecision::DeclineNotOffered => {
            b.key(format!(
                "{brand} is not among the brands this merchant uses"
            ));
            b.say(
                "The brand is not offered; decline politely.",
                format!("I am sorry, but {brand} is not among the brands this merchant uses, so we cannot arrange it. {ANYTHING_ELSE}"),
            );
            b.plan(format!(
                "Decline the brand request for order {order_id}: brand not offered."
            ));
        }
    }
    Ok(())
}

fn compile_arrival(
    b: &mut Builder,
    order_id: &str,
    brand: Option<&str>,
) -> Result<(), DeriveError> {
    let order = b.order(order_id)?;
    let product = b.product_of(order)?;
    let merchant = b.merchant_of(product)?;
    let logistics = b.logistics_of(order);
    b.user_says(format!("When is my order {order_id} expected to arrive?"));
    b.read(
        "Look up the order first.",
        "get_order_detail",
        "order_id",
        order_id,
    );
    if let Some(l) = logistics {
        b.read(
            "The order has shipped; check the shipment.",
            "get_logistics_detail",
            "logistics_id",
            &l.logistics_id,
        );
    } else {
        b.read(
            "Not shipped yet; check the merchant's brands and promise.",
            "get_shop_detail",
            "shop_id",
            &merchant.shop_id,
        );
    }
    let effective_brand: Option<String> = brand
        .map(str::to_string)
        .or_else(|| b.specified_brand.clone());
    let mut args: Vec<(&str, serde_json::Value)> = vec![
        ("mode", serde_json::json!("arrival")),
        ("order_id", serde_json::json!(order_id)),
    ];
    if logistics.is_none() {
        if let Some(br) = &effective_brand {
            args.push(("brand", serde_json::json!(br)));
        }
    }
    b.call(
        "Compute the arrival estimate per the time rules.",
        "calculate_shipping_time",
        &args,
    );
    let arrival = oracle::estimate_arrival_time(
        Some(order),
        logistics,
        merchant,
        &b.world.brand_tariffs,
        if logistics.is_none() {
            effective_brand.as_deref()
        } else {
            None
        },
        system_now(),
    )?;
    let when = oracle::format_time(arrival);
    b.key(format!(
        "estimated arrival time for order {order_id} is {when}"
    ));
    b.say(
        "State the arrival estimate exactly.",
        format!("The estimated arrival time for order {order_id} is {when}. {ANYTHING_ELSE}"),
    );
    b.plan(format!(
        "Estimate the arrival time of order {order_id} and tell the customer."
    ));
    Ok(())
}

fn compile_return_cost(b: &mut Builder, order_id: &str) -> Result<(), DeriveError> {
    let order = b.order(order_id)?;
    let product = b.product_of(order)?;
    let merchant = b.merchant_of(product)?;
    let logistics = b.logistics_of(order);
    b.user_says(format!(
        "If I send order {order_id} back, do I need to advance the return shipping cost? How much?"
    ));
    b.read(
        "Look up the order.",
        "get_order_detail",
        "order_id",
        order_id,
    );
    b.read(
        "Check the item weight.",
        "get_item_detail",
        "item_id",
        &product.item_id,
    );
    if logistics.is_some() {
        // Same-brand rule applies; the quote tool reads the shipment itself.
    } else {
        b.read(
            "Not shipped: compare the merchant's brands.",
            "get_shop_detail",
            "shop_id",
            &merchant.shop_id,
        );
    }
    b.call(
        "Quote the return shipping cost.",
        "calculate_shipping_cost",
        &[("order_id", serde_json::json!(order_id))],
    );
    let (brand, cost) =
        oracle::return_shipping_quote(order, logistics, merchant, product, &b.world.brand_tariffs)?;
    let advance = oracle::user_advance_amount(cost, order.has_shipping_insurance, false, false);
    b.key(format!(
        "return shipping for order {order_id} via {brand} would cost {} RMB",
        cost.display_one_decimal()
    ));
    b.key(format!(
        "you would need to advance {} RMB",
        advance.display_one_decimal()
    ));
    let insurance_part = if order.has_shipping_insurance {
        "With your shipping insurance subsidy applied, "
    } else {
        "This order has no shipping insurance, so "
    };
    b.say(
        "State the cost and the exact advance amount.",
        format!(
            "Return shipping for order {order_id} via {brand} would cost {} RMB. {insurance_part}you would need to advance {} RMB. {ANYTHING_ELSE}",
            cost.display_one_decimal(),
            advance.display_one_decimal()
        ),
    );
    b.plan(format!("Quote the return shipping cost for order {order_id} and the advance amount under the insurance rules."));
    Ok(())
}

fn compile_signed_not_received(b: &mut Builder, order_id: &str) -> Result<(), DeriveError> {
    let order = b.order(order_id)?;
    let logistics = b.logistics_of(order);
    b.user_says(format!(
        "My order {order_id} is marked as delivered, but I have not received the package."
    ));
    b.read(
        "Look up the order.",
        "get_order_detail",
        "order_id",
        order_id,
    );
    if let Some(l) = logistics {
        b.read(
            "Confirm the delivery status.",
            "get_logistics_detail",
            "logistics_id",
            &l.logistics_id,
        );
    }
    b.key("check with your family or friends, or contact the logistics company".to_string());
    b.say(
        "Advise per the delivered-but-not-received rule.",
        format!("I am sorry about that. Order {order_id} shows as delivered; please check with your family or friends, or contact the logistics company to locate the package. {ANYTHING_ELSE}"),
    );
    b.plan(format!(
        "Advise the customer on the delivered-but-not-received package for order {order_id}."
    ));
    Ok(())
}

fn compile_address_change(
    b: &mut Builder,
    order_id: &str,
    new_address: &str,
) -> Result<(), DeriveError> {
    let order = b.order(order_id)?;
    let product = b.product_of(order)?;
    let logistics = b.logistics_of(order);
    b.user_says(format!(
        "I need to change the shipping address for my order {order_id}. Please deliver it to {new_address} instead."
    ));
    b.read(
        "Look up the order and shipping status.",
        "get_order_detail",
        "order_id",
        order_id,
    );
    if let Some(l) = logistics {
        b.read(
            "Check the logistics state.",
            "get_logistics_detail",
            "logistics_id",
            &l.logistics_id,
        );
    }
    let return_eligible = matches!(
        oracle::check_return_eligibility(
            product,
            order,
            logistics,
            false,
            b.persona.level,
            system_now()
        ),
        Ok(ReturnAssessment::Eligible { .. })
    );
    match oracle::plan_address_change(order, logistics, new_address, return_eligible) {
        Ok(plan) => match plan.kind {
            AddressChangeKind::DirectOrderUpdate => {
                for w in plan.writes {
                    b.write("Update the order address directly; not shipped yet.", w);
                }
                b.key(format!(
                    "shipping address for order {order_id} has been updated to {new_address}"
                ));
                b.say(
                    "Confirm the address update.",
                    format!("Done — the shipping address for order {order_id} has been updated to {new_address}. {ANYTHING_ELSE}"),
                );
                b.plan(format!(
                    "Update the shipping address of order {order_id} to {new_address}."
                ));
            }
            AddressChangeKind::Interception => {
                for (i, w) in plan.writes.into_iter().enumerate() {
                    let thought = match i {
                        0 => "In transit: first update the order address.",
                        1 => "Second, update the logistics destination.",
                        _ => "Third, mark the shipment intercepted.",
                    };
                    b.write(thought, w);
                }
                b.key("arranged a logistics interception".to_string());
                b.key(format!(
                    "delivery address for order {order_id} is now {new_address}"
                ));
                b.key("you bear no extra shipping cost".to_string());
                b.say(
                    "Confirm the interception and the no-cost rule.",
                    format!("Your package was already in transit, so we arranged a logistics interception: the delivery address for order {order_id} is now {new_address}, and you bear no extra shipping cost. {ANYTHING_ELSE}"),
                );
                b.plan(format!("Intercept the in-transit shipment of order {order_id} and redirect it to {new_address}."));
            }
            AddressChangeKind::RequireReturnFlow => {
                b.key("handle this as a return".to_string());
                b.say(
                    "Delivered and return-eligible: route to the return flow.",
                    format!("Order {order_id} has already been delivered, so an address change is no longer possible; we would handle this as a return instead if you wish. {ANYTHING_ELSE}"),
                );
                b.plan(format!(
                    "Offer the return flow for the delivered order {order_id}."
                ));
            }
            AddressChangeKind::ReferToLogisticsCompany => {
                b.key("please contact the logistics company".to_string());
                b.say(
                    "Delivered and not return-eligible: refer to the carrier.",
                    format!("Order {order_id} has already been delivered and the return conditions are not met, so please contact the logistics company about redirecting the package. {ANYTHING_ELSE}"),
                );
                b.plan(format!(
                    "Refer the customer to the logistics company for order {order_id}."
                ));
            }
        },
        Err(oracle::OracleError::AlreadyIntercepted) => {
            b.key("transfer you to a human agent".to_string());
            b.turns.push(AgentTurn::call(
                "No rule covers a second interception; hand over.",
                ToolCall::new(
                    "switch_to_human",
                    &[(
                        "reason",
                        serde_json::json!(
                            "This shipment was already intercepted once; I will transfer you to a human agent to resolve the address change."
                        ),
                    )],
                ),
            ));
            b.plan(format!(
                "Escalate the repeated address change for order {order_id} to a human agent."
            ));
            b.expected_termination = Termination::Escalated;
        }
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// After-sales
// ---------------------------------------------------------------------------

fn complaint_text(reason: AfterSalesReason, order_id: &str, marker: Option<&str>) -> String {
    let marker_part = marker.map(|m| format!(" {m}")).unwrap_or_default();
    match reason {
        AfterSalesReason::MissingItems => format!(
            "My order {order_id} arrived with items missing.{marker_part} Please sort this out."
        ),
        AfterSalesReason::TransitDamage => format!(
            "My order {order_id} arrived damaged in transit.{marker_part} This is unacceptable."
        ),
        AfterSalesReason::QualityDissatisfaction => format!(
            "The quality of the item in my order {order_id} is really disappointing.{marker_part} I am not happy with it."
        ),
        AfterSalesReason::PersonalReason => format!(
            "I would like to return my order {order_id}; I simply do not need it anymore."
        ),
    }
}

fn rejection_text(desired: &DesiredSolution, mood: Mood) -> String {
    match desired {
        DesiredSolution::ReturnRefund => {
            "No, that will not do. I want to return it for a refund.".to_string()
        }
        DesiredSolution::RefundOnly => "No, I do not want that. Please just refund me.".to_string(),
        _ => match mood {
            Mood::Impatient => "No. That is not good enough. Fix this properly.".to_string(),
            Mood::Calm => "No, thank you, that does not solve my problem.".to_string(),
        },
    }
}

fn compile_after_sales(b: &mut Builder, demand: &Demand) -> Result<(), DeriveError> {
    let Demand::AfterSales {
        order_id,
        reason,
        evidence_asset,
        desired,
        used,
        realized_rung,
    } = demand
    else {
        unreachable!("compile_after_sales called with a non-after-sales demand");
    };
    let order = b.order(order_id)?;
    let product = b.product_of(order)?;
    let merchant = b.merchant_of(product)?;
    let logistics = b.logistics_of(order);
    let user = b
        .world
        .users
        .get(&b.persona.user_id)
        .ok_or_else(|| DeriveError::MissingRecord(format!("user {:?}", b.persona.user_id)))?;

    let evidence_ok = evidence_asset
        .as_ref()
        .and_then(|id| b.world.assets.get(id))
        .map(|a| a.evidence.get(claim_key(*reason)).copied().unwrap_or(false))
        .unwrap_or(false);

    if let Some(id) = evidence_asset {
        b.task_assets.push(TaskAssetRef {
            asset_id: id.clone(),
            provided_upfront: false,
        });
    }
    let marker = evidence_asset.as_ref().map(|_| "[Image 1]");
    b.user_says(complaint_text(*reason, order_id, marker));

    b.read(
        "Look up the order.",
        "get_order_detail",
        "order_id",
        order_id,
    );
    b.read(
        "Check the product's category and flags.",
        "get_item_detail",
        "item_id",
        &product.item_id,
    );

    // The no-picture branch: ask once, the customer cannot provide.
    if reason.demands_evidence() && evidence_asset.is_none() {
        b.say(
            "Evidence is required for this claim; ask for pictures.",
            "We are sorry to hear that. Could you send a photo showing the problem so we can verify your claim?".to_string(),
        );
        b.replies
            .push("I cannot provide any pictures right now.".to_string());
    }

    let theta = AfterSalesType {
        reason: *reason,
        image_verification: evidence_ok,
        solution: desired.clone(),
        mood: b.persona.mood,
    };
    let inputs = AfterSalesInputs {
        product,
        order,
        logistics,
        merchant,
        user,
        tariffs: &b.world.brand_tariffs,
        evidence_ok,
        used: *used,
        now: system_now(),
    };
    let ladder = oracle::resolve_after_sales(&theta, &inputs)?;
    let realized = (*realized_rung).min(ladder.len().saturating_sub(1));
    if ladder.iter().any(|r| {
        matches!(
            r.kind,
            ResolutionKind::RedEnvelope { .. } | ResolutionKind::ReturnRefund { .. }
        )
    }) {
        b.read(
            "Check the merchant's policy details.",
            "get_shop_detail",
            "shop_id",
            &merchant.shop_id,
        );
    }
    let mut asked_used = false;
    for (i, rung) in ladder.iter().enumerate().take(realized + 1) {
        let is_realized = i == realized;
        compile_rung(
            b,
            order,
            product,
            rung,
            is_realized,
            desired,
            *used,
            &mut asked_used,
        )?;
    }
    b.plan(format!(
        "Resolve the {} after-sales request on order {order_id} per the rules.",
        reason.label()
    ));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn compile_rung(
    b: &mut Builder,
    order: &OrderRecord,
    product: &ProductRecord,
    rung: &Resolution,
    is_realized: bool,
    desired: &DesiredSolution,
    used: bool,
    asked_used: &mut bool,
) -> Result<(), DeriveError> {
    let order_id = order.order_id.clone();
    // The used-product confirmation is required before any shipped,
    // non-fresh return decision.
    let mut confirm_used = |b: &mut Builder| {
        if !*asked_used && !product.is_fresh_perishable {
            *asked_used = true;
            b.say(
                "Confirm whether the product has been used.",
                "Before we proceed: may I confirm whether the product has been used?".to_string(),
            );
            b.replies.push(if used {
                "Yes, I have used it.".to_string()
            } else {
                "No, it is unused.".to_string()
            });
        }
    };
    match &rung.kind {
        ResolutionKind::RedEnvelope { cap } => {
            b.key(format!("red envelope of {} RMB", cap.display_whole_yuan()));
            b.say(
                "Offer the capped red-envelope compensation first.",
                format!(
                    "We are very sorry about this. We would like to offer you a red envelope of {} RMB as compensation. Would that settle the issue for you?",
                    cap.display_whole_yuan()
                ),
            );
            if is_realized {
                b.replies.push("That works for me, thank you.".to_string());
                for note in &rung.required_remarks {
                    b.write(
                        "The customer accepted; record the compensation in the notes.",
                        FieldWrite::RemarkAppend {
                            order_id: order_id.clone(),
                            content: note.clone(),
                        },
                    );
                }
                b.say(
                    "Confirm the compensation is arranged.",
                    format!("The compensation has been arranged and noted on your order. {ANYTHING_ELSE}"),
                );
            } else {
                b.replies.push(rejection_text(desired, b.persona.mood));
            }
        }
        ResolutionKind::Reship => {
            for note in &rung.required_remarks {
                b.write(
                    "Verified missing items: register the reshipment in the notes.",
                    FieldWrite::RemarkAppend {
                        order_id: order_id.clone(),
                        content: note.clone(),
                    },
                );
            }
            b.key("the missing items will be resent".to_string());
            b.say(
                "Confirm the reshipment.",
                format!("We have verified the issue from your photo — the missing items will be resent right away, and this has been noted on your order. {ANYTHING_ELSE}"),
            );
        }
        ResolutionKind::ReturnRefund {
            expedited,
            target_status,
            advance,
            merchant_address,
        } => {
            match (advance, merchant_address) {
                (None, None) => {
                    // Unshipped: cancel directly, nothing to send back.
                    b.write(
                        "Not shipped yet: cancel the order directly.",
                        FieldWrite::OrderStatus {
                            order_id: order_id.clone(),
                            status: *target_status,
                        },
                    );
                    b.key(format!("order {order_id} has been cancelled"));
                    b.say(
                        "Confirm the cancellation.",
                        format!("Order {order_id} has been cancelled directly since it had not shipped; your refund will follow. {ANYTHING_ELSE}"),
                    );
                }
                (Some(adv), Some(addr)) => {
                    confirm_used(b);
                    b.read(
                        "Check the customer's level for the return path.",
                        "get_user_detail",
                        "user_id",
                        &order.user_id,
                    );
                    let fault = rung
                        .required_key_facts
                        .iter()
                        .any(|f| f.contains("no return shipping cost"));
                    let cost_sentence = if fault {
                        format!(
                            "Since this is our fault, no return shipping cost is borne by the customer — you would advance {} RMB for return shipping.",
                            adv.display_one_decimal()
                        )
                    } else if order.has_shipping_insurance {
                        format!(
                            "Your order has shipping insurance, so you would need to advance {} RMB for return shipping.",
                            adv.display_one_decimal()
                        )
                    } else {
                        format!(
                            "This order has no shipping insurance, so you would need to advance {} RMB for return shipping.",
                            adv.display_one_decimal()
                        )
                    };
                    for fact in &rung.required_key_facts {
                        b.key(fact.clone());
                    }
                    b.say(
                        "Give the return address and the exact advance amount.",
                        format!(
                            "You can return it for a refund. Return address: {addr}. {cost_sentence} Please let me know once you have sent the package."
                        ),
                    );
                    if is_realized {
                        b.replies
                            .push("I have initiated the return shipment.".to_string());
                        b.write(
                            if *expedited {
                                "Level 3 and above: process the expedited return."
                            } else {
                                "Below level 3: process the standard return."
                            },
                            FieldWrite::OrderStatus {
                                order_id: order_id.clone(),
                                status: *target_status,
                            },
                        );
                        let kind = if *expedited { "expedited" } else { "standard" };
                        b.key(format!("{kind} return has been processed"));
                        b.say(
                            "Confirm the return is processed.",
                            format!("Your {kind} return has been processed; the refund will arrive once the merchant receives the package. {ANYTHING_ELSE}"),
                        );
                    } else {
                        b.replies.push(
                            "No. I am not sending anything back. Sort this out now.".to_string(),
                        );
                    }
                }
                _ => {
                    return Err(DeriveError::Inconsistent(
                        "return rung with partial advance/address".into(),
                    ))
                }
            }
        }
        ResolutionKind::RefundOnly => {
            if is_realized {
                b.write(
                    "Fresh goods with a verified issue: process the refund-only.",
                    FieldWrite::OrderStatus {
                        order_id: order_id.clone(),
                        status: OrderStatus::RefundOnly,
                    },
                );
                b.key("a refund will be issued without returning the goods".to_string());
                b.say(
                    "Confirm the refund-only: no return shipment, no address needed.",
                    format!("As this is a fresh product with a verified issue, a refund will be issued without returning the goods — no need to send anything back. {ANYTHING_ELSE}"),
                );
            } else {
                b.key("a refund will be issued without returning the goods".to_string());
                b.say(
                    "Offer the refund-only path.",
                    "As this is a verified fresh-goods issue, a refund will be issued without returning the goods if you agree. Would that work for you?".to_string(),
                );
                b.replies.push(rejection_text(desired, b.persona.mood));
            }
        }
        ResolutionKind::Decline { reason } => {
            // Declines driven by the return-eligibility rules come after the
            // used-product confirmation.
            if matches!(
                reason,
                oracle::DeclineReason::ProductUsed
                    | oracle::DeclineReason::NoSevenDaySupport
                    | oracle::DeclineReason::ReturnWindowExceeded
            ) && b.logistics_of(order).is_some()
            {
                confirm_used(b);
            }
            b.key(reason.text().to_string());
            if is_realized {
                b.say(
                    "Comfort the customer and decline per the rules.",
                    format!("We are truly sorry for the inconvenience, but {}, so we cannot process this request. {ANYTHING_ELSE}", reason.text()),
                );
            } else {
                b.say(
                    "Decline the unverified claim but keep listening.",
                    format!("We are truly sorry for the inconvenience, but {}, so we cannot offer compensation on that basis.", reason.text()),
                );
                b.replies
                    .push("I understand, but I still want to return it for a refund.".to_string());
            }
        }
        ResolutionKind::Escalate { .. } => {
            b.key("transfer you to a human agent".to_string());
            b.turns.push(AgentTurn::call(
                "Nothing settled the issue; hand over to a human.",
                ToolCall::new(
                    "switch_to_human",
                    &[(
                        "reason",
                        serde_json::json!(
                            "I am very sorry we could not resolve this today. I will transfer you to a human agent who can help further."
                        ),
                    )],
                ),
            ));
            b.expected_termination = Termination::Escalated;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Pre-sales
// ---------------------------------------------------------------------------

fn compile_coupon_query(b: &mut Builder, item_id: &str) -> Result<(), DeriveError> {
    let product = b
        .world
        .products
        .get(item_id)
        .ok_or_else(|| DeriveError::MissingRecord(format!("item {item_id:?}")))?;
    let user_id = b.persona.user_id.clone();
    b.user_says(format!(
        "I am looking at the {} (item {item_id}). I have some coupons — what is the minimum I would pay?",
        product.name
    ));
    if let Some(image) = product_image(b.world, product) {
        b.task_assets.push(TaskAssetRef {
            asset_id: image,
            provided_upfront: true,
        });
    }
    b.read(
        "Check the product's price and category.",
        "get_item_detail",
        "item_id",
        item_id,
    );
    b.read(
        "Fetch the customer's coupons.",
        "get_user_coupon_detail",
        "user_id",
        &user_id,
    );
    let coupons = b.world.coupons_for_user(&user_id);
    let (payable, witness) = oracle::min_payable(product.price, &coupons, product);
    if witness.is_empty() && payable == product.price {
        b.key(format!(
            "the price stays {} RMB",
            product.price.display_record()
        ));
        b.say(
            "No applicable coupons; state the unchanged price.",
            format!("None of your current coupons apply to the {}, so the price stays {} RMB. {ANYTHING_ELSE}", product.name, product.price.display_record()),
        );
    } else {
        b.key(format!(
            "minimum you would pay for the {} is {} RMB",
            product.name,
            payable.display_record()
        ));
        b.say(
            "State the minimum payable under the stacking rules.",
            format!(
                "With your coupons applied ({}), the minimum you would pay for the {} is {} RMB. {ANYTHING_ELSE}",
                witness.join(" + "),
                product.name,
                payable.display_record()
            ),
        );
    }
    b.plan(format!(
        "Compute the minimum payable amount for item {item_id} under the coupon rules."
    ));
    Ok(())
}

fn compile_recommendation(
    b: &mut Builder,
    shop_id: &str,
    category: &str,
    max_price: Money,
) -> Result<(), DeriveError> {
    b.user_says(format!(
        "Does shop {shop_id} have any {category} items under {} RMB?",
        max_price.display_whole_yuan()
    ));
    b.read(
        "List the shop's products.",
        "get_product_detail",
        "shop_id",
        shop_id,
    );
    let mut in_category: Vec<&ProductRecord> = b
        .world
        .products_for_shop(shop_id)
        .into_iter()
        .filter(|p| p.category == category)
        .collect();
    in_category.sort_by(|a, c| {
        a.price
            .cmp(&c.price)
            .then_with(|| a.item_id.cmp(&c.item_id))
    });
    if in_category.iter().any(|p| p.price <= max_price) {
        return Err(DeriveError::Inconsistent(
            "recommendation scenario requires no product under the budget".into(),
        ));
    }
    let Some(recommended) = in_category.first() else {
        return Err(DeriveError::Inconsistent(
            "no product in the requested category".into(),
        ));
    };
    if let Some(image) = product_image(b.world, recommended) {
        b.task_assets.push(TaskAssetRef {
            asset_id: image,
            provided_upfront: true,
        });
    }
    b.key(format!(
        "no {category} items under {} RMB",
        max_price.display_whole_yuan()
    ));
    b.key(format!(
        "a close option is the {} at {} RMB",
        recommended.name,
        recommended.price.display_record()
    ));
    b.say(
        "Nothing meets the budget; recommend the closest option.",
        format!(
            "We currently have no {category} items under {} RMB in this shop. A close option is the {} at {} RMB. {ANYTHING_ELSE}",
            max_price.display_whole_yuan(),
            recommended.name,
            recommended.price.display_record()
        ),
    );
    b.plan(format!(
        "Recommend a similar {category} product from shop {shop_id}."
    ));
    Ok(())
}

fn compile_livestream(b: &mut Builder, item_id: &str) -> Result<(), DeriveError> {
    let product = b
        .world
        .products
        .get(item_id)
        .ok_or_else(|| DeriveError::MissingRecord(format!("item {item_id:?}")))?;
    let video = product
        .asset_refs
        .iter()
        .filter_map(|a| b.world.assets.get(a))
        .find(|a| a.modality == crate::world::AssetModality::Video)
        .ok_or_else(|| {
            DeriveError::Inconsistent(format!("item {item_id} has no live-stream clip"))
        })?;
    let transcript = video
        .transcript
        .clone()
        .ok_or_else(|| DeriveError::Inconsistent("live-stream clip has no transcript".into()))?;
    b.user_says(format!(
        "I watched part of the recent live stream about the {} (item {item_id}). What did they say about it?",
        product.name
    ));
    b.task_assets.push(TaskAssetRef {
        asset_id: video.asset_id.clone(),
        provided_upfront: true,
    });
    b.read(
        "Identify the product.",
        "get_item_detail",
        "item_id",
        item_id,
    );
    b.read(
        "Pull the live-stream clip transcript.",
        "get_video_detail",
        "item_id",
        item_id,
    );
    b.key(format!(
        "in the recent live stream they mentioned that {transcript}"
    ));
    b.say(
        "Answer from the clip transcript.",
        format!("In the recent live stream they mentioned that {transcript}. {ANYTHING_ELSE}"),
    );
    b.plan(format!(
        "Answer the live-stream question about item {item_id} from the clip."
    ));
    Ok(())
}

fn compile_presales_arrival(
    b: &mut Builder,
    shop_id: &str,
    item_id: &str,
) -> Result<(), DeriveError> {
    let product = b
        .world
        .products
        .get(item_id)
        .ok_or_else(|| DeriveError::MissingRecord(format!("item {item_id:?}")))?;
    let merchant = b
        .world
        .merchants
        .get(shop_id)
        .ok_or_else(|| DeriveError::MissingRecord(format!("shop {shop_id:?}")))?;
    b.user_says(format!(
        "If I order the {} (item {item_id}) from shop {shop_id} right now, when would it arrive?",
        product.name
    ));
    if let Some(image) = product_image(b.world, product) {
        b.task_assets.push(TaskAssetRef {
            asset_id: image,
            provided_upfront: true,
        });
    }
    b.read(
        "Check the merchant's promise and brands.",
        "get_shop_detail",
        "shop_id",
        shop_id,
    );
    b.call(
        "No order yet: estimate from the system time.",
        "calculate_shipping_time",
        &[
            ("mode", serde_json::json!("arrival")),
            ("shop_id", serde_json::json!(shop_id)),
        ],
    );
    let arrival = oracle::estimate_arrival_time(
        None,
        None,
        merchant,
        &b.world.brand_tariffs,
        None,
        system_now(),
    )?;
    let when = oracle::format_time(arrival);
    b.key(format!("estimated arrival time is {when}"));
    b.say(
        "State the estimate exactly to the hour.",
        format!(
            "If you place the order now, the estimated arrival time is {when}. {ANYTHING_ELSE}"
        ),
    );
    b.plan(format!(
        "Estimate arrival for a new order of item {item_id}."
    ));
    Ok(())
}

fn product_image(world: &WorldData, product: &ProductRecord) -> Option<String> {
    product
        .asset_refs
        .iter()
        .filter_map(|a| world.assets.get(a))
        .find(|a| a.modality == crate::world::AssetModality::Image)
        .map(|a| a.asset_id.clone())
}

// ---------------------------------------------------------------------------
// Profile sampling
// ---------------------------------------------------------------------------

pub(super) fn sample_logistics_profile(rng: &mut StdRng, world: &WorldData) -> Option<UserProfile> {
    let orders: Vec<&OrderRecord> = world.orders.values().collect();
    if orders.is_empty() {
        return None;
    }
    // Bias toward in-transit orders so interception stays well represented.
    let weighted: Vec<&OrderRecord> = orders
        .iter()
        .flat_map(|o| {
            let w = match world.logistics_for_order(&o.order_id).map(|l| l.state) {
                Some(LogisticsState::InTransit) => 3,
                _ => 1,
            };
            std::iter::repeat_n(*o, w)
        })
        .collect();
    let order = *pick(rng, &weighted)?;
    let persona = persona_for(world, &order.user_id, Mood::Calm)?;
    let product = world.products.get(&order.item_id)?;
    let merchant = world.merchants.get(&product.shop_id)?;
    let logistics = world.logistics_for_order(&order.order_id);
    let state = logistics.map(|l| l.state);

    let mut demands: Vec<Demand> = Vec::new();
    let mut specified: Option<String> = None;

    // Brand request (unshipped orders mostly; shipped gives the decline).
    let brand_feasible = state.is_none() || rng.gen_bool(0.25);
    if brand_feasible && rng.gen_bool(0.45) {
        let brand = if state.is_none() && merchant.allows_brand_choice && rng.gen_bool(0.7) {
            let b = merchant.brands[rng.gen_range(0..merchant.brands.len())].clone();
            specified = Some(b.clone());
            b
        } else {
            // An out-of-catalog or unsupported request.
            worldgen_brand_not_in(rng, merchant)
        };
        demands.push(Demand::BrandRequest {
            order_id: order.order_id.clone(),
            brand,
        });
    }
    // Arrival queries only make sense before delivery.
    let awaiting_arrival = matches!(state, None | Some(LogisticsState::InTransit));
    if awaiting_arrival && rng.gen_bool(if demands.is_empty() { 0.6 } else { 0.4 }) {
        demands.push(Demand::ArrivalQuery {
            order_id: order.order_id.clone(),
            brand: specified.clone(),
        });
    }
    if rng.gen_bool(0.35) {
        demands.push(Demand::ReturnCostQuery {
            order_id: order.order_id.clone(),
        });
    }
    if state == Some(LogisticsState::Delivered) && rng.gen_bool(0.5) {
        demands.push(Demand::SignedNotReceived {
            order_id: order.order_id.clone(),
        });
    }
    let address_change_ok = match state {
        None => true,
        Some(LogisticsState::InTransit) => true,
        Some(LogisticsState::Delivered) => {
            // Only the refer-to-carrier branch: skip return-eligible orders.
            !matches!(
                oracle::check_return_eligibility(
                    product,
                    order,
                    logistics,
                    false,
                    persona.level,
                    system_now()
                ),
                Ok(ReturnAssessment::Eligible { .. })
            )
        }
        Some(LogisticsState::Intercepted) => false,
    };
    let want_address = match state {
        Some(LogisticsState::InTransit) => rng.gen_bool(0.75),
        _ => rng.gen_bool(0.4),
    };
    if address_change_ok && want_address {
        let new_address = fresh_address(rng, &order.receive_address);
        demands.push(Demand::AddressChange {
            order_id: order.order_id.clone(),
            new_address,
        });
    }
    if demands.is_empty() {
        if awaiting_arrival {
            demands.push(Demand::ArrivalQuery {
                order_id: order.order_id.clone(),
                brand: specified,
            });
        } else {
            demands.push(Demand::ReturnCostQuery { order_id: order.order_id.clone() });
        }
    }
    demands.truncate(3);
    Some(UserProfile { persona, demands })
}

fn worldgen_brand_not_in(rng: &mut StdRng, merchant: &MerchantRecord) -> String {
    const POOL: &[&str] = &[
        "FastExpress",
        "SafeLine",
        "SwiftPost",
        "LotusFreight",
        "NimbusShip",
        "QuickWing",
    ];
    let outside: Vec<&&str> = POOL
        .iter()
        .filter(|b| !merchant.brands.iter().any(|m| m == **b))
        .collect();
    match pick(rng, &outside) {
        Some(b) => b.to_string(),
        None => merchant.brands[0].clone(),
    }
}

fn fresh_address(rng: &mut StdRng, current: &str) -> String {
    const ADDRESSES: &[&str] = &[
        "88 Lakeview Road, Meadow District",
        "5 Plum Blossom Lane, Old Town",
        "301 Gingko Avenue, North Hill",
        "47 Canal Walk, East Dock",
        "9 Elm Road, Maple Quarter",
        "220 Camphor Street, South Gate",
    ];
    let options: Vec<&&str> = ADDRESSES.iter().filter(|a| **a != current).collect();
    pick(rng, &options)
        .map(|a| a.to_string())
        .unwrap_or_else(|| "9 Elm Road, Maple Quarter".into())
}

pub(super) fn sample_after_sales_profile(
    rng: &mut StdRng,
    world: &WorldData,
    cfg: &GenConfig,
) -> Option<UserProfile> {
    let orders: Vec<&OrderRecord> = world
        .orders
        .values()
        .filter(|o| o.status.permits_after_sales())
        .collect();
    if orders.is_empty() {
        return None;
    }
    let no_image = rng.gen_bool(1.0 - cfg.after_sales_image_ratio);
    if no_image {
        if rng.gen_bool(0.75) {
            sample_personal_return(rng, world, &orders)
        } else {
            sample_cannot_provide(rng, world, &orders)
        }
    } else {
        sample_evidence_complaint(rng, world, &orders, cfg)
    }
}

fn sample_personal_return(
    rng: &mut StdRng,
    world: &WorldData,
    orders: &[&OrderRecord],
) -> Option<UserProfile> {
    let order = *pick(rng, orders)?;
    let product = world.products.get(&order.item_id)?;
    let logistics = world.logistics_for_order(&order.order_id);
    // Used-product declines need a shipped, non-fresh order.
    let used = logistics.is_some() && !product.is_fresh_perishable && rng.gen_bool(0.25);
    let persona = persona_for(world, &order.user_id, Mood::Calm)?;
    Some(UserProfile {
        persona,
        demands: vec![Demand::AfterSales {
            order_id: order.order_id.clone(),
            reason: AfterSalesReason::PersonalReason,
            evidence_asset: None,
            desired: DesiredSolution::ReturnRefund,
            used,
            realized_rung: 0,
        }],
    })
}

fn sample_cannot_provide(
    rng: &mut StdRng,
    world: &WorldData,
    orders: &[&OrderRecord],
) -> Option<UserProfile> {
    let order = *pick(rng, orders)?;
    let reason = if rng.gen_bool(0.5) {
        AfterSalesReason::TransitDamage
    } else {
        AfterSalesReason::QualityDissatisfaction
    };
    let insist_return = rng.gen_bool(0.5);
    let desired = if insist_return {
        DesiredSolution::ReturnRefund
    } else {
        DesiredSolution::RedEnvelope {
            amount: Money::from_yuan(10),
        }
    };
    let persona = persona_for(world, &order.user_id, Mood::Calm)?;
    Some(UserProfile {
        persona,
        demands: vec![Demand::AfterSales {
            order_id: order.order_id.clone(),
            reason,
            evidence_asset: None,
            desired,
            used: false,
            realized_rung: if insist_return { 1 } else { 0 },
        }],
    })
}

fn sample_evidence_complaint(
    rng: &mut StdRng,
    world: &WorldData,
    orders: &[&OrderRecord],
    cfg: &GenConfig,
) -> Option<UserProfile> {
    // Orders with a complaint photo (ids follow the AC-<order> convention).
    let candidates: Vec<(&OrderRecord, &crate::world::AssetRef)> = orders
        .iter()
        .filter_map(|o| {
            world
                .assets
                .get(&format!("AC-{}", o.order_id))
                .map(|a| (*o, a))
        })
        .collect();
    let want_verified = rng.gen_bool(cfg.evidence_ok_ratio);
    let matching: Vec<(&OrderRecord, &crate::world::AssetRef)> = candidates
        .iter()
        .filter(|(_, a)| a.evidence.values().any(|&v| v == want_verified))
        .copied()
        .collect();
    let (order, asset) = *pick(rng, &matching).or_else(|| pick(rng, &candidates))?;
    let (claim, supports) = asset
        .evidence
        .iter()
        .next()
        .map(|(k, v)| (k.as_str(), *v))?;
    let reason = match claim {
        "missing_items" => AfterSalesReason::MissingItems,
        "damage" => AfterSalesReason::TransitDamage,
        _ => AfterSalesReason::QualityDissatisfaction,
    };
    let product = world.products.get(&order.item_id)?;
    let logistics = world.logistics_for_order(&order.order_id);
    let persona_probe = persona_for(world, &order.user_id, Mood::Calm)?;

    let (desired, realized, mood, used) = if !supports {
        // Unverified: decline, with an optional insist-on-return tail.
        let insist = rng.gen_bool(0.5);
        let desired = if insist {
            DesiredSolution::ReturnRefund
        } else if reason == AfterSalesReason::MissingItems {
            DesiredSolution::Reship
        } else {
            DesiredSolution::RedEnvelope {
                amount: Money::from_yuan(10),
            }
        };
        (desired, if insist { 1 } else { 0 }, Mood::Calm, false)
    } else if reason == AfterSalesReason::MissingItems {
        (DesiredSolution::Reship, 0, Mood::Calm, false)
    } else {
        // Verified damage/quality: red envelope, then the return path.
        let cap = oracle::max_red_envelope(
            order.payment_amount,
            world.merchants[&product.shop_id].max_compensation_pct,
        );
        let eligible = matches!(
            oracle::check_return_eligibility(
                product,
                order,
                logistics,
                false,
                persona_probe.level,
                system_now()
            ),
            Ok(ReturnAssessment::Eligible { .. } | ReturnAssessment::CancelUnshipped)
        );
        let roll = rng.gen_range(0..100);
        if product.is_fresh_perishable {
            match roll {
                0..=29 => (
                    DesiredSolution::RedEnvelope { amount: cap },
                    0,
                    Mood::Calm,
                    false,
                ),
                30..=84 => (DesiredSolution::RefundOnly, 1, sample_mood(rng), false),
                _ => (DesiredSolution::ReturnRefund, 2, Mood::Impatient, false),
            }
        } else if eligible {
            match roll {
                0..=29 => (
                    DesiredSolution::RedEnvelope { amount: cap },
                    0,
                    Mood::Calm,
                    false,
                ),
                30..=84 => (DesiredSolution::ReturnRefund, 1, sample_mood(rng), false),
                _ => (DesiredSolution::ReturnRefund, 2, Mood::Impatient, false),
            }
        } else {
            // The return rung declines; either settle on the envelope or
            // reach the decline and acquiesce.
            if roll < 50 {
                (
                    DesiredSolution::RedEnvelope { amount: cap },
                    0,
                    Mood::Calm,
                    false,
                )
            } else {
                (DesiredSolution::ReturnRefund, 1, Mood::Calm, false)
            }
        }
    };
    let persona = persona_for(world, &order.user_id, mood)?;
    Some(UserProfile {
        persona,
        demands: vec![Demand::AfterSales {
            order_id: order.order_id.clone(),
            reason,
            evidence_asset: Some(asset.asset_id.clone()),
            desired,
            used,
            realized_rung: realized,
        }],
    })
}

fn sample_mood(rng: &mut StdRng) -> Mood {
    if rng.gen_bool(0.5) {
        Mood::Impatient
    } else {
        Mood::Calm
    }
}

pub(super) fn sample_presales_profile(
    rng: &mut StdRng,
    world: &WorldData,
    cfg: &GenConfig,
) -> Option<UserProfile> {
    let users: Vec<&str> = world.users.keys().map(String::as_str).collect();
    let user_id = pick(rng, &users)?.to_string();
    let persona = persona_for(world, &user_id, Mood::Calm)?;

    if rng.gen_bool(cfg.presales_video_ratio) {
        let with_video: Vec<&ProductRecord> = world
            .products
            .values()
            .filter(|p| {
                p.asset_refs.iter().any(|a| {
                    world
                        .assets
                        .get(a)
                        .is_some_and(|x| x.modality == crate::world::AssetModality::Video)
                })
            })
            .collect();
        if let Some(product) = pick(rng, &with_video) {
            return Some(UserProfile {
                persona,
                demands: vec![Demand::LivestreamQuery {
                    item_id: product.item_id.clone(),
                }],
            });
        }
    }
    let roll = rng.gen_range(0..100);
    if roll < 45 {
        let products: Vec<&ProductRecord> = world.products.values().collect();
        let product = pick(rng, &products)?;
        Some(UserProfile {
            persona,
            demands: vec![Demand::CouponQuery {
                item_id: product.item_id.clone(),
            }],
        })
    } else if roll < 72 {
        // A budget below the category's cheapest item, so the rule kicks in.
        let mut by_key: Vec<(&String, &ProductRecord)> = Vec::new();
        for p in world.products.values() {
            by_key.push((&p.shop_id, p));
        }
        let candidates: Vec<(String, String, Money)> = by_key
            .iter()
            .filter_map(|(shop, p)| {
                let cheapest = world
                    .products_for_shop(shop)
                    .into_iter()
                    .filter(|q| q.category == p.category)
                    .map(|q| q.price)
                    .min()?;
                if cheapest.yuan_floor() >= 15 {
                    Some(((*shop).clone(), p.category.clone(), cheapest))
                } else {
                    None
                }
            })
            .collect();
        let (shop_id, category, cheapest) = pick(rng, &candidates)?.clone();
        let budget = Money::from_yuan((cheapest.yuan_floor() - rng.gen_range(5..=10)).max(5));
        Some(UserProfile {
            persona,
            demands: vec![Demand::RecommendationQuery {
                shop_id,
                category,
                max_price: budget,
            }],
        })
    } else {
        let products: Vec<&ProductRecord> = world.products.values().collect();
        let product = pick(rng, &products)?;
        Some(UserProfile {
            persona,
            demands: vec![Demand::PreSalesArrival {
                shop_id: product.shop_id.clone(),
                item_id: product.item_id.clone(),
            }],
        })
    }
}
