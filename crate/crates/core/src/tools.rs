//! The tool registry: argument validation, dispatch against the world
//! state, and deterministic observation rendering.
//!
//! Exactly 18 tools are registered: 8 retrieval, 2 calculation,
//! 4 modification, 4 interaction. Read tools never touch the state
//! version; every successful modification bumps it by exactly one.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::money::Money;
use crate::oracle;
use crate::time::Timestamp;
use crate::world::{FieldWrite, LogisticsState, OrderStatus, WorldState};

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToolClass {
    Retrieval,
    Calculation,
    Modification,
    Interaction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgType {
    Str,
    Int,
    Enum(&'static [&'static str]),
}

#[derive(Debug, Clone, Copy)]
pub struct ArgSpec {
    pub name: &'static str,
    pub ty: ArgType,
    pub required: bool,
    pub description: &'static str,
}

#[derive(Debug, Clone, Copy)]
pub struct ToolSpec {
    pub name: &'static str,
    pub class: ToolClass,
    pub args: &'static [ArgSpec],
    pub description: &'static str,
}

const ORDER_STATES: &[&str] = &[
    "Paid",
    "Cancelled",
    "Returning",
    "Refunded",
    "Refund-Only",
    "Completed",
];
const LOGISTICS_STATES: &[&str] = &["In Transit", "Delivered", "Intercepted"];
const TIME_MODES: &[&str] = &["shipping", "arrival"];

const fn req(name: &'static str, ty: ArgType, description: &'static str) -> ArgSpec {
    ArgSpec {
        name,
        ty,
        required: true,
        description,
    }
}

const fn opt(name: &'static str, ty: ArgType, description: &'static str) -> ArgSpec {
    ArgSpec {
        name,
        ty,
        required: false,
        description,
    }
}

/// The closed 18-tool registry.
pub const REGISTRY: &[ToolSpec] = &[
    ToolSpec {
        name: "get_shop_detail",
        class: ToolClass::Retrieval,
        args: &[req("shop_id", ArgType::Str, "merchant identifier")],
        description: "Look up a merchant: brands used, promised shipping hours, return address, compensation policy.",
    },
    ToolSpec {
        name: "get_order_detail",
        class: ToolClass::Retrieval,
        args: &[req("order_id", ArgType::Str, "order identifier")],
        description: "Look up an order: item, quantity, payment, address, status, remarks.",
    },
    ToolSpec {
        name: "get_item_detail",
        class: ToolClass::Retrieval,
        args: &[req("item_id", ArgType::Str, "product identifier")],
        description: "Look up one product: price, weight, category, return/insurance flags.",
    },
    ToolSpec {
        name: "get_logistics_detail",
        class: ToolClass::Retrieval,
        args: &[req("logistics_id", ArgType::Str, "logistics identifier")],
        description: "Look up a shipment: brand, pickup time, destination, state.",
    },
    ToolSpec {
        name: "get_user_detail",
        class: ToolClass::Retrieval,
        args: &[req("user_id", ArgType::Str, "user identifier")],
        description: "Look up a customer: name, membership level, default address.",
    },
    ToolSpec {
        name: "get_user_coupon_detail",
        class: ToolClass::Retrieval,
        args: &[req("user_id", ArgType::Str, "user identifier")],
        description: "List the coupons a customer holds.",
    },
    ToolSpec {
        name: "get_product_detail",
        class: ToolClass::Retrieval,
        args: &[req("shop_id", ArgType::Str, "merchant identifier")],
        description: "List the products a merchant sells.",
    },
    ToolSpec {
        name: "get_video_detail",
        class: ToolClass::Retrieval,
        args: &[req("item_id", ArgType::Str, "product identifier")],
        description: "Fetch annotated transcripts of the product's recent live-stream clips.",
    },
    ToolSpec {
        name: "calculate_shipping_time",
        class: ToolClass::Calculation,
        args: &[
            req("mode", ArgType::Enum(TIME_MODES), "estimate to compute"),
            opt("order_id", ArgType::Str, "order identifier; omit if no order was placed"),
            opt("shop_id", ArgType::Str, "merchant identifier; required when no order exists"),
            opt("brand", ArgType::Str, "successfully specified logistics brand, if any"),
        ],
        description: "Estimate shipping or arrival time per the time rules.",
    },
    ToolSpec {
        name: "calculate_shipping_cost",
        class: ToolClass::Calculation,
        args: &[
            opt("order_id", ArgType::Str, "order to quote return shipping for"),
            opt("item_id", ArgType::Str, "product for a prospective quote"),
            opt("quantity", ArgType::Int, "unit count for a prospective quote"),
            opt("brand", ArgType::Str, "brand for a prospective quote"),
        ],
        description: "Quote return shipping for an order, or shipping cost for an item/quantity/brand.",
    },
    ToolSpec {
        name: "modify_logistics_address",
        class: ToolClass::Modification,
        args: &[
            req("logistics_id", ArgType::Str, "logistics identifier"),
            req("address", ArgType::Str, "new destination address"),
        ],
        description: "Set a shipment's destination address.",
    },
    ToolSpec {
        name: "modify_logistics_state",
        class: ToolClass::Modification,
        args: &[
            req("logistics_id", ArgType::Str, "logistics identifier"),
            req("state", ArgType::Enum(LOGISTICS_STATES), "new logistics state"),
        ],
        description: "Set a shipment's state.",
    },
    ToolSpec {
        name: "modify_order_address",
        class: ToolClass::Modification,
        args: &[
            req("order_id", ArgType::Str, "order identifier"),
            req("address", ArgType::Str, "new shipping address"),
        ],
        description: "Set an order's shipping address.",
    },
    ToolSpec {
        name: "modify_order_state",
        class: ToolClass::Modification,
        args: &[
            req("order_id", ArgType::Str, "order identifier"),
            req("state", ArgType::Enum(ORDER_STATES), "new order status"),
        ],
        description: "Set an order's status.",
    },
    ToolSpec {
        name: "talk_to_user",
        class: ToolClass::Interaction,
        args: &[req("content", ArgType::Str, "message to send to the customer")],
        description: "Send a message to the customer and wait for their reply.",
    },
    ToolSpec {
        name: "switch_to_human",
        class: ToolClass::Interaction,
        args: &[opt("reason", ArgType::Str, "handover message shown to the customer")],
        description: "Hand the conversation to a human agent and end the episode.",
    },
    ToolSpec {
        name: "remark",
        class: ToolClass::Interaction,
        args: &[
            req("order_id", ArgType::Str, "order identifier"),
            req("content", ArgType::Str, "note to append to the order"),
        ],
        description: "Append a note to an order's remarks.",
    },
    ToolSpec {
        name: "end_conversation",
        class: ToolClass::Interaction,
        args: &[],
        description: "End the conversation once every request is settled.",
    },
];

pub fn spec_for(name: &str) -> Option<&'static ToolSpec> {
    REGISTRY.iter().find(|s| s.name == name)
}

/// Machine-readable catalog entry, served over HTTP and embedded in
/// prompts so external agents can self-describe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCatalogEntry {
    pub name: String,
    pub class: ToolClass,
    pub description: String,
    pub arguments: Vec<ToolCatalogArg>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCatalogArg {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub required: bool,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed: Option<Vec<String>>,
}

pub fn catalog() -> Vec<ToolCatalogEntry> {
    REGISTRY
        .iter()
        .map(|s| ToolCatalogEntry {
            name: s.name.to_string(),
            class: s.class,
            description: s.description.to_string(),
            arguments: s
                .args
                .iter()
                .map(|a| ToolCatalogArg {
                    name: a.name.to_string(),
                    ty: match a.ty {
                        ArgType::Str => "string".into(),
                        ArgType::Int => "integer".into(),
                        ArgType::Enum(_) => "enum".into(),
                    },
                    required: a.required,
                    description: a.description.to_string(),
                    allowed: match a.ty {
                        ArgType::Enum(vals) => Some(vals.iter().map(|v| v.to_string()).collect()),
                        _ => None,
                    },
                })
                .collect(),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Calls and results
// ---------------------------------------------------------------------------

/// One tool invocation: name plus named arguments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    #[serde(default)]
    pub arguments: BTreeMap<String, Value>,
}

impl ToolCall {
    pub fn new(tool: &str, arguments: &[(&str, Value)]) -> ToolCall {
        ToolCall {
            tool: tool.to_string(),
            arguments: arguments
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
        }
    }

    fn str_arg(&self, name: &str) -> Option<&str> {
        self.arguments.get(name).and_then(Value::as_str)
    }

    fn int_arg(&self, name: &str) -> Option<i64> {
        self.arguments.get(name).and_then(Value::as_i64)
    }
}

impl fmt::Display for ToolCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}",
            serde_json::to_string(self).map_err(|_| fmt::Error)?
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalKind {
    Completed,
    Escalated,
}

/// What a dispatched call produced. Errors are data, not exceptions: the
/// agent sees a structured observation and may recover.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ToolOutcome {
    /// A record or computed result, rendered canonically.
    Record { value: Value },
    /// The customer's next utterance (talk_to_user).
    UserReply { text: String },
    /// The episode is over.
    Terminal { terminal: TerminalKind },
    /// A violation the agent can read and recover from.
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolResult {
    pub outcome: ToolOutcome,
    pub state_version_after: u64,
}

impl ToolResult {
    pub fn is_error(&self) -> bool {
        matches!(self.outcome, ToolOutcome::Error { .. })
    }
}

/// Deterministic canonical text for an observation. The episode engine
/// wraps this in `<Observation>` tags.
pub fn render_observation(result: &ToolResult) -> String {
    match &result.outcome {
        ToolOutcome::Record { value } => {
            serde_json::to_string(value).expect("observation value serializes")
        }
        ToolOutcome::UserReply { text } => text.clone(),
        ToolOutcome::Terminal {
            terminal: TerminalKind::Completed,
        } => "conversation ended".to_string(),
        ToolOutcome::Terminal {
            terminal: TerminalKind::Escalated,
        } => "transferred to a human agent".to_string(),
        ToolOutcome::Error { message } => format!("ERROR: {message}"),
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Schema-only validation: tool known, required arguments present, no
/// extras, types and enum values legal. No state access.
pub fn validate_call(call: &ToolCall) -> Result<&'static ToolSpec, Vec<String>> {
    let Some(spec) = spec_for(&call.tool) else {
        return Err(vec![format!(
            "unknown tool {:?}; the registry has 18 tools",
            call.tool
        )]);
    };
    let mut violations = Vec::new();
    for arg in spec.args {
        match call.arguments.get(arg.name) {
            None if arg.required => {
                violations.push(format!("missing required argument {:?}", arg.name))
            }
            None => {}
            Some(v) => match arg.ty {
                ArgType::Str => {
                    if !v.is_string() {
                        violations.push(format!("argument {:?} must be a string", arg.name));
                    }
                }
                ArgType::Int => {
                    if v.as_i64().is_none() {
                        violations.push(format!("argument {:?} must be an integer", arg.name));
                    }
                }
                ArgType::Enum(allowed) => match v.as_str() {
                    Some(s) if allowed.contains(&s) => {}
                    _ => violations.push(format!(
                        "argument {:?} must be one of {}",
                        arg.name,
                        allowed.join(", ")
                    )),
                },
            },
        }
    }
    for name in call.arguments.keys() {
        if !spec.args.iter().any(|a| a.name == name) {
            violations.push(format!("unexpected argument {name:?}"));
        }
    }
    if violations.is_empty() {
        Ok(spec)
    } else {
        Err(violations)
    }
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// The user side of a session, from the dispatcher's point of view.
pub trait UserChannel {
    /// Deliver the assistant's message and return the customer's reply.
    fn reply(&mut self, assistant_message: &str) -> String;
}

/// Per-call session context: the user channel plus the fixed clock.
pub struct SessionCtx<'a> {
    pub user: &'a mut dyn UserChannel,
    pub now: Timestamp,
}

fn err_result(state: &WorldState, message: String) -> ToolResult {
    ToolResult {
        outcome: ToolOutcome::Error { message },
        state_version_after: state.version,
    }
}

fn record(state: &WorldState, value: Value) -> ToolResult {
    ToolResult {
        outcome: ToolOutcome::Record { value },
        state_version_after: state.version,
    }
}

/// Execute one call against the session's world. Retrieval and calculation
/// leave the version untouched; modifications apply exactly one field
/// write; interaction tools route to the user channel or terminate.
pub fn dispatch(call: &ToolCall, state: &mut WorldState, ctx: &mut SessionCtx<'_>) -> ToolResult {
    let spec = match validate_call(call) {
        Ok(spec) => spec,
        Err(violations) => return err_result(state, violations.join("; ")),
    };
    match spec.name {
        "get_shop_detail" => {
            let id = call.str_arg("shop_id").unwrap_or_default();
            match state.data.merchants.get(id) {
                Some(m) => {
                    let mut v = serde_json::to_value(m).expect("serializes");
                    // Surface the per-brand tariffs the merchant works with.
                    let tariffs: Vec<&crate::world::BrandTariff> = m
                        .brands
                        .iter()
                        .filter_map(|b| state.data.brand_tariffs.get(b))
                        .collect();
                    v["brand_tariffs"] = serde_json::to_value(tariffs).expect("serializes");
                    record(state, v)
                }
                None => err_result(state, format!("shop {id:?} not found")),
            }
        }
        "get_order_detail" => {
            match state
                .data
                .orders
                .get(call.str_arg("order_id").unwrap_or_default())
            {
                Some(o) => {
                    let mut v = serde_json::to_value(o).expect("serializes");
                    // The shipment id, if any, so the agent can follow the
                    // rules that branch on "has a logistics_id".
                    let logi = state.data.logistics_for_order(&o.order_id);
                    v["logistics_id"] =
                        logi.map_or(Value::Null, |l| Value::String(l.logistics_id.clone()));
                    record(state, v)
                }
                None => err_result(
                    state,
                    format!(
                        "order {:?} not found",
                        call.str_arg("order_id").unwrap_or_default()
                    ),
                ),
            }
        }
        "get_item_detail" => {
            match state
                .data
                .products
                .get(call.str_arg("item_id").unwrap_or_default())
            {
                Some(p) => record(state, serde_json::to_value(p).expect("serializes")),
                None => err_result(
                    state,
                    format!(
                        "item {:?} not found",
                        call.str_arg("item_id").unwrap_or_default()
                    ),
                ),
            }
        }
        "get_logistics_detail" => {
            match state
                .data
                .logistics
                .get(call.str_arg("logistics_id").unwrap_or_default())
            {
                Some(l) => record(state, serde_json::to_value(l).expect("serializes")),
                None => err_result(
                    state,
                    format!(
                        "logistics {:?} not found",
                        call.str_arg("logistics_id").unwrap_or_default()
                    ),
                ),
            }
        }
        "get_user_detail" => {
            match state
                .data
                .users
                .get(call.str_arg("user_id").unwrap_or_default())
            {
                Some(u) => record(state, serde_json::to_value(u).expect("serializes")),
                None => err_result(
                    state,
                    format!(
                        "user {:?} not found",
                        call.str_arg("user_id").unwrap_or_default()
                    ),
                ),
            }
        }
        "get_user_coupon_detail" => {
            let id = call.str_arg("user_id").unwrap_or_default();
            if !state.data.users.contains_key(id) {
                return err_result(state, format!("user {id:?} not found"));
            }
            let coupons = state.data.coupons_for_user(id);
            record(state, json!({ "user_id": id, "coupons": coupons }))
        }
        "get_product_detail" => {
            let id = call.str_arg("shop_id").unwrap_or_default();
            if !state.data.merchants.contains_key(id) {
                return err_result(state, format!("shop {id:?} not found"));
            }
            let products = state.data.products_for_shop(id);
            record(state, json!({ "shop_id": id, "products": products }))
        }
        "get_video_detail" => {
            let id = call.str_arg("item_id").unwrap_or_default();
            let Some(product) = state.data.products.get(id) else {
                return err_result(state, format!("item {id:?} not found"));
            };
            let clips: Vec<Value> = product
                .asset_refs
                .iter()
                .filter_map(|a| state.data.assets.get(a))
                .filter(|a| a.modality == crate::world::AssetModality::Video)
                .map(|a| {
                    json!({
                        "asset_id": a.asset_id,
                        "description": a.description,
                        "transcript": a.transcript,
                    })
                })
                .collect();
            record(state, json!({ "item_id": id, "clips": clips }))
        }
        "calculate_shipping_time" => calculate_shipping_time(call, state, ctx.now),
        "calculate_shipping_cost" => calculate_shipping_cost(call, state),
        "modify_order_address" => apply_write(
            state,
            FieldWrite::OrderAddress {
                order_id: call.str_arg("order_id").unwrap_or_default().to_string(),
                address: call.str_arg("address").unwrap_or_default().to_string(),
            },
            "order receive_address",
        ),
        "modify_order_state" => {
            let status = OrderStatus::parse(call.str_arg("state").unwrap_or_default())
                .expect("enum validated");
            apply_write(
                state,
                FieldWrite::OrderStatus {
                    order_id: call.str_arg("order_id").unwrap_or_default().to_string(),
                    status,
                },
                "order status",
            )
        }
        "modify_logistics_address" => apply_write(
            state,
            FieldWrite::LogisticsAddress {
                logistics_id: call.str_arg("logistics_id").unwrap_or_default().to_string(),
                address: call.str_arg("address").unwrap_or_default().to_string(),
            },
            "logistics receive_address",
        ),
        "modify_logistics_state" => {
            let new_state = LogisticsState::parse(call.str_arg("state").unwrap_or_default())
                .expect("enum validated");
            apply_write(
                state,
                FieldWrite::LogisticsState {
                    logistics_id: call.str_arg("logistics_id").unwrap_or_default().to_string(),
                    state: new_state,
                },
                "logistics state",
            )
        }
        "remark" => apply_write(
            state,
            FieldWrite::RemarkAppend {
                order_id: call.str_arg("order_id").unwrap_or_default().to_string(),
                content: call.str_arg("content").unwrap_or_default().to_string(),
            },
            "order remarks",
        ),
        "talk_to_user" => {
            let content = call.str_arg("content").unwrap_or_default();
            let utterance = ctx.user.reply(content);
            ToolResult {
                outcome: ToolOutcome::UserReply { text: utterance },
                state_version_after: state.version,
            }
        }
        "switch_to_human" => ToolResult {
            outcome: ToolOutcome::Terminal {
                terminal: TerminalKind::Escalated,
            },
            state_version_after: state.version,
        },
        "end_conversation" => ToolResult {
            outcome: ToolOutcome::Terminal {
                terminal: TerminalKind::Completed,
            },
            state_version_after: state.version,
        },
        other => err_result(state, format!("unknown tool {other:?}")),
    }
}

fn apply_write(state: &mut WorldState, write: FieldWrite, what: &str) -> ToolResult {
    match state.apply(write.clone()) {
        Ok(()) => {
            let detail = match &write {
                FieldWrite::OrderAddress { order_id, address } => {
                    json!({ "ok": true, "updated": what, "order_id": order_id, "value": address })
                }
                FieldWrite::OrderStatus { order_id, status } => {
                    json!({ "ok": true, "updated": what, "order_id": order_id, "value": status })
                }
                FieldWrite::LogisticsAddress {
                    logistics_id,
                    address,
                } => {
                    json!({ "ok": true, "updated": what, "logistics_id": logistics_id, "value": address })
                }
                FieldWrite::LogisticsState {
                    logistics_id,
                    state,
                } => {
                    json!({ "ok": true, "updated": what, "logistics_id": logistics_id, "value": state })
                }
                FieldWrite::RemarkAppend { order_id, content } => {
                    json!({ "ok": true, "updated": what, "order_id": order_id, "appended": content })
                }
            };
            record(state, detail)
        }
        Err(e) => err_result(state, e.to_string()),
    }
}

fn calculate_shipping_time(call: &ToolCall, state: &WorldState, now: Timestamp) -> ToolResult {
    let mode = call.str_arg("mode").expect("enum validated");
    let order = match call.str_arg("order_id") {
        Some(id) => match state.data.orders.get(id) {
            Some(o) => Some(o),
            None => return err_result(state, format!("order {id:?} not found")),
        },
        None => None,
    };
    let merchant = match order {
        Some(o) => {
            let product = &state.data.products[&o.item_id];
            &state.data.merchants[&product.shop_id]
        }
        None => {
            let Some(shop_id) = call.str_arg("shop_id") else {
                return err_result(
                    state,
                    "shop_id is required when no order_id is given".to_string(),
                );
            };
            match state.data.merchants.get(shop_id) {
                Some(m) => m,
                None => return err_result(state, format!("shop {shop_id:?} not found")),
            }
        }
    };
    match mode {
        "shipping" => {
            let t = oracle::estimate_shipping_time(order, merchant, now);
            record(
                state,
                json!({ "mode": "shipping", "estimated_shipping_time": oracle::format_time(t) }),
            )
        }
        _ => {
            let logistics = order.and_then(|o| state.data.logistics_for_order(&o.order_id));
            match oracle::estimate_arrival_time(
                order,
                logistics,
                merchant,
                &state.data.brand_tariffs,
                call.str_arg("brand"),
                now,
            ) {
                Ok(t) => record(
                    state,
                    json!({ "mode": "arrival", "estimated_arrival_time": oracle::format_time(t) }),
                ),
                Err(e) => err_result(state, e.to_string()),
            }
        }
    }
}

fn calculate_shipping_cost(call: &ToolCall, state: &WorldState) -> ToolResult {
    if let Some(order_id) = call.str_arg("order_id") {
        let Some(order) = state.data.orders.get(order_id) else {
            return err_result(state, format!("order {order_id:?} not found"));
        };
        let product = &state.data.products[&order.item_id];
        let merchant = &state.data.merchants[&product.shop_id];
        let logistics = state.data.logistics_for_order(order_id);
        return match oracle::return_shipping_quote(
            order,
            logistics,
            merchant,
            product,
            &state.data.brand_tariffs,
        ) {
            Ok((brand, cost)) => record(
                state,
                json!({
                    "order_id": order_id,
                    "brand": brand,
                    "return_shipping_cost": cost.display_one_decimal(),
                    "has_shipping_insurance": order.has_shipping_insurance,
                }),
            ),
            Err(e) => err_result(state, e.to_string()),
        };
    }
    // Prospective quote: item + quantity + brand.
    let (Some(item_id), Some(quantity), Some(brand)) = (
        call.str_arg("item_id"),
        call.int_arg("quantity"),
        call.str_arg("brand"),
    ) else {
        return err_result(
            state,
            "provide order_id, or item_id with quantity and brand".to_string(),
        );
    };
    let Some(product) = state.data.products.get(item_id) else {
        return err_result(state, format!("item {item_id:?} not found"));
    };
    let Some(tariff) = state.data.brand_tariffs.get(brand) else {
        return err_result(state, format!("no tariff entry for brand {brand:?}"));
    };
    if quantity < 0 {
        return err_result(state, "quantity must be non-negative".to_string());
    }
    let cost: Money =
        oracle::compute_shipping_cost(tariff, quantity as u32, product.unit_weight_kg);
    record(
        state,
        json!({
            "item_id": item_id,
            "brand": brand,
            "quantity": quantity,
            "shipping_cost": cost.display_one_decimal(),
        }),
    )
}
