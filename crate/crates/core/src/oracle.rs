//! Pure, deterministic implementations of the domain rules: shipping costs,
//! insurance, time estimation, address-change planning, after-sales
//! resolution ladders, return eligibility, and coupons.
//!
//! Key answers, ground-truth database states, and conformance checks all
//! derive from these functions. Everything here is a pure function of its
//! inputs; the clock is always a parameter.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::{Fraction, Money};
use crate::rules::TaskFamily;
use crate::time::Timestamp;
use crate::world::{
    BrandTariff, FieldWrite, LogisticsRecord, LogisticsState, MerchantRecord, OrderRecord,
    OrderStatus, ProductRecord, UserRecord,
};

/// Insurance subsidizes return shipping up to this amount.
pub const INSURANCE_SUBSIDY_CAP_FEN: i64 = 900;
/// Returns are accepted up to this many days after receipt.
pub const RETURN_WINDOW_DAYS: i64 = 7;
/// Users at or above this level get the expedited return path.
pub const EXPEDITED_LEVEL: u32 = 3;
/// Red-envelope compensation never goes below this (whole RMB).
pub const MIN_RED_ENVELOPE_YUAN: i64 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("merchant {0} has no logistics brands (corrupt state)")]
    NoBrands(String),
    #[error("no tariff entry for brand {0:?} (corrupt state)")]
    MissingTariff(String),
    #[error("brand {0:?} is not offered by the merchant")]
    BrandNotOffered(String),
    #[error("logistics {0} is Delivered but has no delivered_time (corrupt state)")]
    MissingDeliveredTime(String),
    #[error("order {0} status {1} does not permit after-sales handling")]
    AfterSalesNotPermitted(String, OrderStatus),
    #[error("logistics already intercepted; no rule covers a second address change")]
    AlreadyIntercepted,
}

// ---------------------------------------------------------------------------
// Question types
// ---------------------------------------------------------------------------

/// Why the customer opened an after-sales request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AfterSalesReason {
    MissingItems,
    TransitDamage,
    QualityDissatisfaction,
    PersonalReason,
}

impl AfterSalesReason {
    /// The question-type taxonomy label.
    pub fn label(self) -> &'static str {
        match self {
            AfterSalesReason::MissingItems => "Missing/Wrong items shipped",
            AfterSalesReason::TransitDamage => "Item damaged during transit",
            AfterSalesReason::QualityDissatisfaction => "Dissatisfied with product quality",
            AfterSalesReason::PersonalReason => "Return due to other personal reasons",
        }
    }

    /// Reasons that demand photographic verification before any remedy.
    pub fn demands_evidence(self) -> bool {
        !matches!(self, AfterSalesReason::PersonalReason)
    }
}

/// The remedy the customer says they want.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DesiredSolution {
    Reship,
    RedEnvelope { amount: Money },
    ReturnRefund,
    RefundOnly,
}

impl DesiredSolution {
    pub fn label(&self) -> String {
        match self {
            DesiredSolution::Reship => "Re-ship missing items".into(),
            DesiredSolution::RedEnvelope { amount } => {
                format!("Red envelope of {} yuan", amount.display_whole_yuan())
            }
            DesiredSolution::ReturnRefund => "Refund and return".into(),
            DesiredSolution::RefundOnly => "Refund only".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mood {
    Calm,
    Impatient,
}

/// The after-sales quadruple: reason, evidence verdict, desired solution,
/// mood.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AfterSalesType {
    pub reason: AfterSalesReason,
    pub image_verification: bool,
    pub solution: DesiredSolution,
    pub mood: Mood,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogisticsIntent {
    AddressChange,
    BrandRequest,
    ArrivalQuery,
    ShippingCostQuery,
    SignedNotReceived,
}

/// Structured classification of the user's demand (the theta component).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionType {
    pub family: TaskFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub after_sales: Option<AfterSalesType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logistics_intents: Option<Vec<LogisticsIntent>>,
}

// ---------------------------------------------------------------------------
// Shipping cost and insurance
// ---------------------------------------------------------------------------

/// Linear tariff over ceiled total weight:
/// `base_fee + per_kg_fee * ceil(quantity * unit_weight_kg)`.
pub fn compute_shipping_cost(
    tariff: &BrandTariff,
    quantity: u32,
    unit_weight: crate::money::WeightKg,
) -> Money {
    let total_grams = quantity as u64 * unit_weight.grams();
    let kg = total_grams.div_ceil(1000);
    Money::from_fen(tariff.base_fee.fen() + tariff.per_kg_fee.fen() * kg as i64)
}

/// Return-shipping quote: the original shipment's brand when one exists,
/// otherwise the cheapest of the merchant's brands (ties broken by name).
pub fn return_shipping_quote(
    order: &OrderRecord,
    logistics: Option<&LogisticsRecord>,
    merchant: &MerchantRecord,
    product: &ProductRecord,
    tariffs: &BTreeMap<String, BrandTariff>,
) -> Result<(String, Money), OracleError> {
    let cost_of = |brand: &str| -> Result<Money, OracleError> {
        let tariff = tariffs
            .get(brand)
            .ok_or_else(|| OracleError::MissingTariff(brand.into()))?;
        Ok(compute_shipping_cost(
            tariff,
            order.quantity,
            product.unit_weight_kg,
        ))
    };
    match logistics {
        Some(l) => Ok((l.brand.clone(), cost_of(&l.brand)?)),
        None => {
            if merchant.brands.is_empty() {
                return Err(OracleError::NoBrands(merchant.shop_id.clone()));
            }
            let mut brands = merchant.brands.clone();
            brands.sort();
            let mut best: Option<(String, Money)> = None;
            for b in brands {
                let c = cost_of(&b)?;
                match &best {
                    Some((_, bc)) if c >= *bc => {}
                    _ => best = Some((b, c)),
                }
            }
            Ok(best.expect("at least one brand"))
        }
    }
}

/// The amount the customer must advance for return shipping. Merchant fault
/// and address-change interceptions cost the customer nothing; insurance
/// subsidizes up to 9 RMB; otherwise the full cost is advanced.
pub fn user_advance_amount(
    return_cost: Money,
    has_insurance: bool,
    merchant_fault: bool,
    interception_for_address_change: bool,
) -> Money {
    if merchant_fault || interception_for_address_change {
        Money::ZERO
    } else if has_insurance {
        return_cost.saturating_sub(Money::from_fen(INSURANCE_SUBSIDY_CAP_FEN))
    } else {
        return_cost
    }
}

// ---------------------------------------------------------------------------
// Time estimation
// ---------------------------------------------------------------------------

/// Estimated shipping time: payment time (placed) or `now` (not placed)
/// plus the merchant's promised shipping hours.
pub fn estimate_shipping_time(
    order: Option<&OrderRecord>,
    merchant: &MerchantRecord,
    now: Timestamp,
) -> Timestamp {
    let start = order.map_or(now, |o| o.payment_time);
    start.plus_hours(merchant.promised_shipping_hours as i64)
}

/// Estimated arrival time. Shipped orders use pickup time plus the
/// shipment brand's transit; unshipped orders add transit (the specified
/// brand's, or the longest among the merchant's brands) to the estimated
/// shipping time.
pub fn estimate_arrival_time(
    order: Option<&OrderRecord>,
    logistics: Option<&LogisticsRecord>,
    merchant: &MerchantRecord,
    tariffs: &BTreeMap<String, BrandTariff>,
    specified_brand: Option<&str>,
    now: Timestamp,
) -> Result<Timestamp, OracleError> {
    let transit_of = |brand: &str| -> Result<u32, OracleError> {
        tariffs
            .get(brand)
            .map(|t| t.transit_hours)
            .ok_or_else(|| OracleError::MissingTariff(brand.into()))
    };
    if let Some(l) = logistics {
        return Ok(l.pickup_time.plus_hours(transit_of(&l.brand)? as i64));
    }
    let ship = estimate_shipping_time(order, merchant, now);
    let transit = match specified_brand {
        Some(b) if !merchant.allows_brand_choice => {
            return Err(OracleError::BrandNotOffered(b.to_string()))
        }
        Some(b) => {
            if !merchant.brands.iter().any(|x| x == b) {
                return Err(OracleError::BrandNotOffered(b.to_string()));
            }
            transit_of(b)?
        }
        None => {
            if merchant.brands.is_empty() {
                return Err(OracleError::NoBrands(merchant.shop_id.clone()));
            }
            let mut longest = 0;
            for b in &merchant.brands {
                longest = longest.max(transit_of(b)?);
            }
            longest
        }
    };
    Ok(ship.plus_hours(transit as i64))
}

/// Hour-precision answer rendering: `"13:00 on June 12"`.
pub fn format_time(t: Timestamp) -> String {
    t.display_hour_answer()
}

// ---------------------------------------------------------------------------
// Address changes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AddressChangeKind {
    DirectOrderUpdate,
    Interception,
    RequireReturnFlow,
    ReferToLogisticsCompany,
}

/// How an address change is carried out: the plan kind plus the ordered
/// database writes that realize it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressChangePlan {
    pub kind: AddressChangeKind,
    pub writes: Vec<FieldWrite>,
}

/// Plan an address change. Unshipped orders update directly; in-transit
/// shipments intercept with exactly three ordered writes; delivered
/// shipments route to the return flow or to the logistics company.
pub fn plan_address_change(
    order: &OrderRecord,
    logistics: Option<&LogisticsRecord>,
    new_address: &str,
    return_eligible: bool,
) -> Result<AddressChangePlan, OracleError> {
    debug_assert!(!new_address.trim().is_empty());
    match logistics {
        None => Ok(AddressChangePlan {
            kind: AddressChangeKind::DirectOrderUpdate,
            writes: vec![FieldWrite::OrderAddress {
                order_id: order.order_id.clone(),
                address: new_address.to_string(),
            }],
        }),
        Some(l) => match l.state {
            LogisticsState::InTransit => Ok(AddressChangePlan {
                kind: AddressChangeKind::Interception,
                writes: vec![
                    FieldWrite::OrderAddress {
                        order_id: order.order_id.clone(),
                        address: new_address.to_string(),
                    },
                    FieldWrite::LogisticsAddress {
                        logistics_id: l.logistics_id.clone(),
                        address: new_address.to_string(),
                    },
                    FieldWrite::LogisticsState {
                        logistics_id: l.logistics_id.clone(),
                        state: LogisticsState::Intercepted,
                    },
                ],
            }),
            LogisticsState::Delivered => Ok(AddressChangePlan {
                kind: if return_eligible {
                    AddressChangeKind::RequireReturnFlow
                } else {
                    AddressChangeKind::ReferToLogisticsCompany
                },
                writes: Vec::new(),
            }),
            LogisticsState::Intercepted => Err(OracleError::AlreadyIntercepted),
        },
    }
}

// ---------------------------------------------------------------------------
// Red envelope
// ---------------------------------------------------------------------------

/// Red-envelope ceiling: `max(1, floor(payment_yuan * pct))` whole RMB.
pub fn max_red_envelope(payment: Money, max_pct: Fraction) -> Money {
    debug_assert!(max_pct.is_at_most_one());
    let product = payment.fen() as i128 * max_pct.basis_points() as i128;
    let yuan = product / (100 * Fraction::SCALE as i128);
    Money::from_yuan((yuan as i64).max(MIN_RED_ENVELOPE_YUAN))
}

// ---------------------------------------------------------------------------
// Return eligibility
// ---------------------------------------------------------------------------

/// The failing condition named when a return is declined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeclineReason {
    ProductUsed,
    NoSevenDaySupport,
    ReturnWindowExceeded,
    EvidenceNotVerified,
    FreshPersonalReason,
}

impl DeclineReason {
    pub fn text(self) -> &'static str {
        match self {
            DeclineReason::ProductUsed => "the product has already been used",
            DeclineReason::NoSevenDaySupport => {
                "the product does not support 7-day no-reason returns"
            }
            DeclineReason::ReturnWindowExceeded => "more than 7 days have passed since receipt",
            DeclineReason::EvidenceNotVerified => "the provided pictures cannot verify the claim",
            DeclineReason::FreshPersonalReason => {
                "fresh/perishable goods cannot be returned for personal reasons"
            }
        }
    }
}

impl fmt::Display for DeclineReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.text())
    }
}

/// Outcome of the return-eligibility rules for one order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReturnAssessment {
    /// Fresh/perishable goods route to the refund-only rules.
    RefundOnlyPath,
    /// Unshipped orders cancel directly.
    CancelUnshipped,
    /// Shipped and eligible; expedited for level >= 3.
    Eligible {
        expedited: bool,
        target_status: OrderStatus,
    },
    Declined {
        reason: DeclineReason,
    },
}

/// Apply the return-eligibility rules. `used` is what the customer
/// confirmed in conversation. Shipments that are still in transit have no
/// receipt time yet, so the 7-day window cannot have lapsed.
pub fn check_return_eligibility(
    product: &ProductRecord,
    order: &OrderRecord,
    logistics: Option<&LogisticsRecord>,
    used: bool,
    user_level: u32,
    now: Timestamp,
) -> Result<ReturnAssessment, OracleError> {
    if !order.status.permits_after_sales() {
        return Err(OracleError::AfterSalesNotPermitted(
            order.order_id.clone(),
            order.status,
        ));
    }
    if product.is_fresh_perishable {
        return Ok(ReturnAssessment::RefundOnlyPath);
    }
    let Some(logistics) = logistics else {
        return Ok(ReturnAssessment::CancelUnshipped);
    };
    if used {
        return Ok(ReturnAssessment::Declined {
            reason: DeclineReason::ProductUsed,
        });
    }
    if !product.is_support_7d_back {
        return Ok(ReturnAssessment::Declined {
            reason: DeclineReason::NoSevenDaySupport,
        });
    }
    if logistics.state == LogisticsState::Delivered {
        let delivered = logistics
            .delivered_time
            .ok_or_else(|| OracleError::MissingDeliveredTime(logistics.logistics_id.clone()))?;
        if now.minutes_since(delivered) > RETURN_WINDOW_DAYS * 24 * 60 {
            return Ok(ReturnAssessment::Declined {
                reason: DeclineReason::ReturnWindowExceeded,
            });
        }
    }
    let expedited = user_level >= EXPEDITED_LEVEL;
    Ok(ReturnAssessment::Eligible {
        expedited,
        target_status: if expedited {
            OrderStatus::Refunded
        } else {
            OrderStatus::Returning
        },
    })
}

// ---------------------------------------------------------------------------
// After-sales resolution ladders
// ---------------------------------------------------------------------------

/// One rung of an after-sales escalation ladder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ResolutionKind {
    /// Resend missing/wrong items; the order itself is untouched.
    Reship,
    /// Goodwill compensation; `cap` is the ceiling, any amount in
    /// [1 RMB, cap] is acceptable.
    RedEnvelope {
        cap: Money,
    },
    /// Return with refund. `advance` and `merchant_address` are absent for
    /// unshipped orders (nothing to send back; the order just cancels).
    ReturnRefund {
        expedited: bool,
        target_status: OrderStatus,
        advance: Option<Money>,
        merchant_address: Option<String>,
    },
    /// Refund without any return shipment (fresh/perishable goods only).
    RefundOnly,
    Decline {
        reason: DeclineReason,
    },
    Escalate {
        reason: String,
    },
}

/// A prescribed resolution step plus the notes and facts it obligates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub kind: ResolutionKind,
    /// Notes that must be appended to the order when this step is accepted.
    pub required_remarks: Vec<String>,
    /// Facts the assistant must state when this step is realized.
    pub required_key_facts: Vec<String>,
}

impl Resolution {
    fn bare(kind: ResolutionKind) -> Resolution {
        Resolution {
            kind,
            required_remarks: Vec::new(),
            required_key_facts: Vec::new(),
        }
    }
}

/// Everything `resolve_after_sales` needs to assemble a ladder.
pub struct AfterSalesInputs<'a> {
    pub product: &'a ProductRecord,
    pub order: &'a OrderRecord,
    pub logistics: Option<&'a LogisticsRecord>,
    pub merchant: &'a MerchantRecord,
    pub user: &'a UserRecord,
    pub tariffs: &'a BTreeMap<String, BrandTariff>,
    /// Whether the provided evidence substantiates the claim.
    pub evidence_ok: bool,
    /// Whether the customer confirmed the product has been used.
    pub used: bool,
    pub now: Timestamp,
}

/// Assemble the prescribed escalation ladder for an after-sales request.
/// The episode realizes a prefix of the ladder: each rung is offered until
/// the customer accepts one (or the ladder ends in decline/escalation).
pub fn resolve_after_sales(
    theta: &AfterSalesType,
    inputs: &AfterSalesInputs<'_>,
) -> Result<Vec<Resolution>, OracleError> {
    match theta.reason {
        AfterSalesReason::PersonalReason => personal_return_ladder(inputs),
        AfterSalesReason::MissingItems => {
            if inputs.evidence_ok {
                Ok(vec![Resolution {
                    kind: ResolutionKind::Reship,
                    required_remarks: vec![format!(
                        "Reshipment registered for order {}: missing items to be resent",
                        inputs.order.order_id
                    )],
                    required_key_facts: vec!["the missing items will be resent".to_string()],
                }])
            } else {
                unverified_ladder(theta, inputs)
            }
        }
        AfterSalesReason::TransitDamage | AfterSalesReason::QualityDissatisfaction => {
            if inputs.evidence_ok {
                verified_complaint_ladder(inputs)
            } else {
                unverified_ladder(theta, inputs)
            }
        }
    }
}

/// Personal-reason returns: never reship, red envelope, or refund-only.
fn personal_return_ladder(inputs: &AfterSalesInputs<'_>) -> Result<Vec<Resolution>, OracleError> {
    if inputs.product.is_fresh_perishable {
        // The return flow routes fresh goods to refund-only, and refund-only
        // demands a verified product issue, which a personal reason is not.
        return Ok(vec![decline(DeclineReason::FreshPersonalReason)]);
    }
    Ok(vec![return_refund_step(inputs, false)?])
}

/// Verified damage/quality complaints: red envelope first, then the return
/// path (refund-only for fresh goods, merchant-fault return otherwise),
/// then a human agent.
fn verified_complaint_ladder(
    inputs: &AfterSalesInputs<'_>,
) -> Result<Vec<Resolution>, OracleError> {
    let cap = max_red_envelope(
        inputs.order.payment_amount,
        inputs.merchant.max_compensation_pct,
    );
    let envelope = Resolution {
        kind: ResolutionKind::RedEnvelope { cap },
        required_remarks: vec![format!(
            "Red envelope compensation of {} RMB agreed for order {}",
            cap.display_whole_yuan(),
            inputs.order.order_id
        )],
        required_key_facts: vec![format!("red envelope of {} RMB", cap.display_whole_yuan())],
    };
    let second = if inputs.product.is_fresh_perishable {
        Resolution {
            kind: ResolutionKind::RefundOnly,
            required_remarks: Vec::new(),
            required_key_facts: vec![
                "a refund will be issued without returning the goods".to_string()
            ],
        }
    } else {
        return_refund_step(inputs, true)?
    };
    Ok(vec![
        envelope,
        second,
        Resolution::bare(ResolutionKind::Escalate {
            reason: "no offered remedy settled the issue".to_string(),
        }),
    ])
}

/// Unverified claims: comfort and decline; a customer who still insists on
/// a return gets the personal-reason return path (insurance-based advance).
fn unverified_ladder(
    theta: &AfterSalesType,
    inputs: &AfterSalesInputs<'_>,
) -> Result<Vec<Resolution>, OracleError> {
    let mut ladder = vec![decline(DeclineReason::EvidenceNotVerified)];
    if matches!(theta.solution, DesiredSolution::ReturnRefund) {
        ladder.extend(personal_return_ladder(inputs)?);
    }
    Ok(ladder)
}

/// Build the return-with-refund rung from the eligibility rules.
/// `merchant_fault` zeroes the advance.
fn return_refund_step(
    inputs: &AfterSalesInputs<'_>,
    merchant_fault: bool,
) -> Result<Resolution, OracleError> {
    let assessment = check_return_eligibility(
        inputs.product,
        inputs.order,
        inputs.logistics,
        inputs.used,
        inputs.user.level,
        inputs.now,
    )?;
    match assessment {
        ReturnAssessment::RefundOnlyPath => {
            // Callers handle fresh goods before asking for a return rung.
            Ok(Resolution {
                kind: ResolutionKind::RefundOnly,
                required_remarks: Vec::new(),
                required_key_facts: vec![
                    "a refund will be issued without returning the goods".to_string()
                ],
            })
        }
        ReturnAssessment::CancelUnshipped => Ok(Resolution {
            kind: ResolutionKind::ReturnRefund {
                expedited: false,
                target_status: OrderStatus::Cancelled,
                advance: None,
                merchant_address: None,
            },
            required_remarks: Vec::new(),
            required_key_facts: vec![format!(
                "order {} has been cancelled",
                inputs.order.order_id
            )],
        }),
        ReturnAssessment::Eligible {
            expedited,
            target_status,
        } => {
            let (_, cost) = return_shipping_quote(
                inputs.order,
                inputs.logistics,
                inputs.merchant,
                inputs.product,
                inputs.tariffs,
            )?;
            let advance = user_advance_amount(
                cost,
                inputs.order.has_shipping_insurance,
                merchant_fault,
                false,
            );
            let mut facts = vec![
                format!("return address: {}", inputs.merchant.return_address),
                format!(
                    "advance {} RMB for return shipping",
                    advance.display_one_decimal()
                ),
            ];
            if merchant_fault {
                facts.push("no return shipping cost is borne by the customer".to_string());
            }
            Ok(Resolution {
                kind: ResolutionKind::ReturnRefund {
                    expedited,
                    target_status,
                    advance: Some(advance),
                    merchant_address: Some(inputs.merchant.return_address.clone()),
                },
                required_remarks: Vec::new(),
                required_key_facts: facts,
            })
        }
        ReturnAssessment::Declined { reason } => Ok(decline(reason)),
    }
}

fn decline(reason: DeclineReason) -> Resolution {
    Resolution {
        kind: ResolutionKind::Decline { reason },
        required_remarks: Vec::new(),
        required_key_facts: vec![reason.text().to_string()],
    }
}

// ---------------------------------------------------------------------------
// Brand requests
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BrandDecision {
    RecordInRemark,
    DeclineNotOffered,
    DeclineAlreadyShipped,
    DeclineNotSupported,
}

/// Decide a logistics-brand request per the brand rules.
pub fn brand_request_decision(
    merchant: &MerchantRecord,
    logistics: Option<&LogisticsRecord>,
    requested: &str,
) -> BrandDecision {
    if logistics.is_some() {
        return BrandDecision::DeclineAlreadyShipped;
    }
    if !merchant.allows_brand_choice {
        return BrandDecision::DeclineNotSupported;
    }
    if !merchant.brands.iter().any(|b| b == requested) {
        return BrandDecision::DeclineNotOffered;
    }
    BrandDecision::RecordInRemark
}

// ---------------------------------------------------------------------------
// Coupons
// ---------------------------------------------------------------------------

/// Coupons usable on this product: category listed and price at or above
/// the coupon's minimum purchase.
pub fn applicable_coupons<'a>(
    coupons: &[&'a crate::world::CouponRecord],
    product: &ProductRecord,
) -> Vec<&'a crate::world::CouponRecord> {
    coupons
        .iter()
        .filter(|c| {
            c.category_list.iter().any(|cat| cat == &product.category)
                && product.price >= c.minimum_purchase
        })
        .copied()
        .collect()
}

/// Minimum payable amount over all coupon selections with at most one
/// coupon per level, floored at zero, plus one witness set (fewest coupons,
/// then lexicographic ids).
pub fn min_payable(
    price: Money,
    coupons: &[&crate::world::CouponRecord],
    product: &ProductRecord,
) -> (Money, Vec<String>) {
    let applicable = applicable_coupons(coupons, product);
    let mut by_level: BTreeMap<u32, Vec<&crate::world::CouponRecord>> = BTreeMap::new();
    for c in &applicable {
        by_level.entry(c.level).or_default().push(c);
    }
    // Best coupon per level: max amount off, ties to the smaller id.
    let best: Vec<&crate::world::CouponRecord> = by_level
        .values()
        .map(|v| {
            *v.iter()
                .max_by(|a, b| {
                    a.amount_off
                        .cmp(&b.amount_off)
                        .then_with(|| b.coupon_id.cmp(&a.coupon_id))
                })
                .expect("level group non-empty")
        })
        .collect();
    let total_off: i64 = best.iter().map(|c| c.amount_off.fen()).sum();
    if price.fen() > total_off {
        // Every applicable level helps; the per-level maximum is optimal.
        let mut ids: Vec<String> = best.iter().map(|c| c.coupon_id.clone()).collect();
        ids.sort();
        return (Money::from_fen(price.fen() - total_off), ids);
    }
    // Discounts cover the price: find the fewest one-per-level coupons whose
    // sum still reaches the price, breaking ties on the sorted id list.
    let levels: Vec<&Vec<&crate::world::CouponRecord>> = by_level.values().collect();
    let mut best_witness: Option<Vec<String>> = None;
    let mut stack: Vec<(usize, i64, Vec<String>)> = vec![(0, 0, Vec::new())];
    while let Some((idx, sum, chosen)) = stack.pop() {
        if sum >= price.fen() {
            let mut ids = chosen.clone();
            ids.sort();
            let better = match &best_witness {
                None => true,
                Some(cur) => (ids.len(), &ids) < (cur.len(), cur),
            };
            if better {
                best_witness = Some(ids);
            }
            continue;
        }
        if idx == levels.len() {
            continue;
        }
        // Skip this level, or take each of its coupons.
        stack.push((idx + 1, sum, chosen.clone()));
        for c in levels[idx] {
            let mut next = chosen.clone();
            next.push(c.coupon_id.clone());
            stack.push((idx + 1, sum + c.amount_off.fen(), next));
        }
    }
    (Money::ZERO, best_witness.unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::money::WeightKg;
    use crate::time::system_now;

    fn tariff(base_yuan: i64, per_kg_yuan: i64, transit: u32) -> BrandTariff {
        BrandTariff {
            brand: "T".into(),
            transit_hours: transit,
            base_fee: Money::from_yuan(base_yuan),
            per_kg_fee: Money::from_yuan(per_kg_yuan),
        }
    }

    #[test]
    fn shipping_cost_ceils_total_weight() {
        // 3 * 0.8kg = 2.4kg -> 3kg: 5 + 2*3 = 11.
        let c = compute_shipping_cost(&tariff(5, 2, 48), 3, WeightKg::from_grams(800));
        assert_eq!(c, Money::from_yuan(11));
        // Exact kilogram boundary must not over-ceil: 5 * 0.2kg = 1kg.
        let c = compute_shipping_cost(&tariff(0, 7, 48), 5, WeightKg::from_grams(200));
        assert_eq!(c, Money::from_yuan(7));
    }

    #[test]
    fn shipping_cost_zero_cases() {
        let c = compute_shipping_cost(&tariff(5, 2, 48), 0, WeightKg::from_grams(800));
        assert_eq!(c, Money::from_yuan(5));
        let c = compute_shipping_cost(&tariff(0, 0, 48), 7, WeightKg::from_grams(123));
        assert_eq!(c, Money::ZERO);
    }

    #[test]
    fn return_quote_uses_shipment_brand() {
        let w = fixtures::small_world();
        let order = &w.data.orders["O1"];
        let product = &w.data.products["I1"];
        let merchant = &w.data.merchants["S1"];
        let (brand, cost) = return_shipping_quote(
            order,
            w.data.logistics_for_order("O1"),
            merchant,
            product,
            &w.data.brand_tariffs,
        )
        .unwrap();
        assert_eq!(brand, "FastExpress");
        // 2 * 0.8kg = 1.6 -> 2kg: 5 + 2*2 = 9.
        assert_eq!(cost, Money::from_yuan(9));
    }

    #[test]
    fn return_quote_unshipped_picks_cheapest_with_lex_tie() {
        let w = fixtures::small_world();
        let order = &w.data.orders["O1"];
        let product = &w.data.products["I1"];
        let merchant = &w.data.merchants["S1"];
        // FastExpress: 5 + 2*2 = 9. SafeLine: 3 + 3*2 = 9. Tie -> FastExpress.
        let (brand, cost) =
            return_shipping_quote(order, None, merchant, product, &w.data.brand_tariffs).unwrap();
        assert_eq!((brand.as_str(), cost), ("FastExpress", Money::from_yuan(9)));
        // Make SafeLine strictly cheaper.
        let mut tariffs = w.data.brand_tariffs.clone();
        tariffs.get_mut("SafeLine").unwrap().per_kg_fee = Money::from_yuan(2);
        let (brand, cost) =
            return_shipping_quote(order, None, merchant, product, &tariffs).unwrap();
        assert_eq!((brand.as_str(), cost), ("SafeLine", Money::from_yuan(7)));
    }

    #[test]
    fn advance_amount_rules() {
        let twelve = Money::from_yuan(12);
        assert_eq!(
            user_advance_amount(twelve, true, false, false),
            Money::from_yuan(3)
        );
        assert_eq!(
            user_advance_amount(Money::from_yuan(6), true, false, false),
            Money::ZERO
        );
        assert_eq!(user_advance_amount(twelve, false, true, false), Money::ZERO);
        assert_eq!(user_advance_amount(twelve, false, false, true), Money::ZERO);
        assert_eq!(user_advance_amount(twelve, false, false, false), twelve);
    }

    #[test]
    fn shipping_time_estimates() {
        let w = fixtures::small_world();
        let merchant = &w.data.merchants["S1"];
        let order = &w.data.orders["O1"];
        assert_eq!(
            estimate_shipping_time(Some(order), merchant, system_now()).to_string(),
            "2025-06-11 14:00"
        );
        let mut m = merchant.clone();
        m.promised_shipping_hours = 48;
        assert_eq!(
            estimate_shipping_time(None, &m, system_now()).to_string(),
            "2025-06-14 00:00"
        );
        m.promised_shipping_hours = 0;
        assert_eq!(
            estimate_shipping_time(Some(order), &m, system_now()),
            order.payment_time
        );
    }

    #[test]
    fn arrival_time_estimates() {
        let w = fixtures::small_world();
        let merchant = &w.data.merchants["S1"];
        let order = &w.data.orders["O1"];
        let logistics = w.data.logistics_for_order("O1");
        // Shipped: pickup 06-11 09:00 + 48h.
        let t = estimate_arrival_time(
            Some(order),
            logistics,
            merchant,
            &w.data.brand_tariffs,
            None,
            system_now(),
        )
        .unwrap();
        assert_eq!(t.to_string(), "2025-06-13 09:00");
        // Unshipped, unspecified: est ship 06-11 14:00 + max(48, 72).
        let t = estimate_arrival_time(
            Some(order),
            None,
            merchant,
            &w.data.brand_tariffs,
            None,
            system_now(),
        )
        .unwrap();
        assert_eq!(t.to_string(), "2025-06-14 14:00");
        // Unshipped, specified 48h brand.
        let t = estimate_arrival_time(
            Some(order),
            None,
            merchant,
            &w.data.brand_tariffs,
            Some("FastExpress"),
            system_now(),
        )
        .unwrap();
        assert_eq!(t.to_string(), "2025-06-13 14:00");
        // Unknown brand errors.
        let err = estimate_arrival_time(
            Some(order),
            None,
            merchant,
            &w.data.brand_tariffs,
            Some("Nowhere"),
            system_now(),
        )
        .unwrap_err();
        assert_eq!(err, OracleError::BrandNotOffered("Nowhere".into()));
    }

    #[test]
    fn address_change_plans() {
        let w = fixtures::small_world();
        let order = &w.data.orders["O1"];
        let plan = plan_address_change(order, None, "9 Elm Road", false).unwrap();
        assert_eq!(plan.kind, AddressChangeKind::DirectOrderUpdate);
        assert_eq!(plan.writes.len(), 1);

        let logistics = w.data.logistics_for_order("O1");
        let plan = plan_address_change(order, logistics, "9 Elm Road", false).unwrap();
        assert_eq!(plan.kind, AddressChangeKind::Interception);
        assert_eq!(plan.writes.len(), 3);
        assert!(matches!(
            plan.writes[2],
            FieldWrite::LogisticsState {
                state: LogisticsState::Intercepted,
                ..
            }
        ));

        let mut delivered = logistics.unwrap().clone();
        delivered.state = LogisticsState::Delivered;
        delivered.delivered_time = Some(Timestamp::new(2025, 6, 11, 18, 0));
        let plan = plan_address_change(order, Some(&delivered), "9 Elm Road", false).unwrap();
        assert_eq!(plan.kind, AddressChangeKind::ReferToLogisticsCompany);
        let plan = plan_address_change(order, Some(&delivered), "9 Elm Road", true).unwrap();
        assert_eq!(plan.kind, AddressChangeKind::RequireReturnFlow);

        let mut intercepted = logistics.unwrap().clone();
        intercepted.state = LogisticsState::Intercepted;
        let err = plan_address_change(order, Some(&intercepted), "9 Elm Road", false).unwrap_err();
        assert_eq!(err, OracleError::AlreadyIntercepted);
    }

    #[test]
    fn red_envelope_cap() {
        assert_eq!(
            max_red_envelope(Money::from_yuan(100), Fraction::from_basis_points(700)),
            Money::from_yuan(7)
        );
        assert_eq!(
            max_red_envelope(Money::from_yuan(10), Fraction::from_basis_points(500)),
            Money::from_yuan(1)
        );
        assert_eq!(
            max_red_envelope(Money::from_fen(5990), Fraction::from_basis_points(1000)),
            Money::from_yuan(5)
        );
    }

    #[test]
    fn eligibility_examples() {
        let w = fixtures::small_world();
        let product = &w.data.products["I1"];
        let order = &w.data.orders["O1"];
        let mut delivered = w.data.logistics["L1"].clone();
        delivered.state = LogisticsState::Delivered;
        delivered.delivered_time = Some(system_now().plus_days(-3));

        let a = check_return_eligibility(product, order, Some(&delivered), false, 3, system_now())
            .unwrap();
        assert_eq!(
            a,
            ReturnAssessment::Eligible {
                expedited: true,
                target_status: OrderStatus::Refunded
            }
        );

        delivered.delivered_time = Some(system_now().plus_days(-8));
        let a = check_return_eligibility(product, order, Some(&delivered), false, 3, system_now())
            .unwrap();
        assert_eq!(
            a,
            ReturnAssessment::Declined {
                reason: DeclineReason::ReturnWindowExceeded
            }
        );

        let mut fresh = product.clone();
        fresh.is_fresh_perishable = true;
        let a = check_return_eligibility(&fresh, order, Some(&delivered), false, 3, system_now())
            .unwrap();
        assert_eq!(a, ReturnAssessment::RefundOnlyPath);

        let a = check_return_eligibility(product, order, None, false, 1, system_now()).unwrap();
        assert_eq!(a, ReturnAssessment::CancelUnshipped);

        let mut cancelled = order.clone();
        cancelled.status = OrderStatus::Cancelled;
        assert!(
            check_return_eligibility(product, &cancelled, None, false, 1, system_now()).is_err()
        );
    }

    #[test]
    fn verified_quality_ladder() {
        let w = fixtures::small_world();
        let mut delivered = w.data.logistics["L1"].clone();
        delivered.state = LogisticsState::Delivered;
        delivered.delivered_time = Some(system_now().plus_days(-2));
        let theta = AfterSalesType {
            reason: AfterSalesReason::QualityDissatisfaction,
            image_verification: true,
            solution: DesiredSolution::ReturnRefund,
            mood: Mood::Calm,
        };
        let inputs = AfterSalesInputs {
            product: &w.data.products["I1"],
            order: &w.data.orders["O1"],
            logistics: Some(&delivered),
            merchant: &w.data.merchants["S1"],
            user: &w.data.users["U1"],
            tariffs: &w.data.brand_tariffs,
            evidence_ok: true,
            used: false,
            now: system_now(),
        };
        let ladder = resolve_after_sales(&theta, &inputs).unwrap();
        assert_eq!(ladder.len(), 3);
        // Payment 119.80 * 7% -> 8 RMB cap.
        assert_eq!(
            ladder[0].kind,
            ResolutionKind::RedEnvelope {
                cap: Money::from_yuan(8)
            }
        );
        match &ladder[1].kind {
            ResolutionKind::ReturnRefund {
                advance, expedited, ..
            } => {
                assert_eq!(
                    *advance,
                    Some(Money::ZERO),
                    "merchant fault zeroes the advance"
                );
                assert!(*expedited, "level 3 user is expedited");
            }
            other => panic!("expected return rung, got {other:?}"),
        }
        assert!(matches!(ladder[2].kind, ResolutionKind::Escalate { .. }));
    }

    #[test]
    fn missing_items_ladder() {
        let w = fixtures::small_world();
        let theta = AfterSalesType {
            reason: AfterSalesReason::MissingItems,
            image_verification: true,
            solution: DesiredSolution::Reship,
            mood: Mood::Calm,
        };
        let inputs = AfterSalesInputs {
            product: &w.data.products["I1"],
            order: &w.data.orders["O1"],
            logistics: w.data.logistics_for_order("O1"),
            merchant: &w.data.merchants["S1"],
            user: &w.data.users["U1"],
            tariffs: &w.data.brand_tariffs,
            evidence_ok: true,
            used: false,
            now: system_now(),
        };
        let ladder = resolve_after_sales(&theta, &inputs).unwrap();
        assert_eq!(ladder.len(), 1);
        assert_eq!(ladder[0].kind, ResolutionKind::Reship);
        assert!(!ladder[0].required_remarks.is_empty());
    }

    #[test]
    fn unverified_damage_decline() {
        let w = fixtures::small_world();
        let theta = AfterSalesType {
            reason: AfterSalesReason::TransitDamage,
            image_verification: false,
            solution: DesiredSolution::RefundOnly,
            mood: Mood::Calm,
        };
        let inputs = AfterSalesInputs {
            product: &w.data.products["I1"],
            order: &w.data.orders["O1"],
            logistics: w.data.logistics_for_order("O1"),
            merchant: &w.data.merchants["S1"],
            user: &w.data.users["U1"],
            tariffs: &w.data.brand_tariffs,
            evidence_ok: false,
            used: false,
            now: system_now(),
        };
        let ladder = resolve_after_sales(&theta, &inputs).unwrap();
        assert_eq!(ladder.len(), 1);
        assert_eq!(
            ladder[0].kind,
            ResolutionKind::Decline {
                reason: DeclineReason::EvidenceNotVerified
            }
        );
    }

    #[test]
    fn personal_ladders_never_contain_forbidden_remedies() {
        let w = fixtures::small_world();
        let theta = AfterSalesType {
            reason: AfterSalesReason::PersonalReason,
            image_verification: false,
            solution: DesiredSolution::ReturnRefund,
            mood: Mood::Calm,
        };
        for fresh in [false, true] {
            for shipped in [false, true] {
                let mut product = w.data.products["I1"].clone();
                product.is_fresh_perishable = fresh;
                let logistics = shipped.then(|| w.data.logistics["L1"].clone());
                let inputs = AfterSalesInputs {
                    product: &product,
                    order: &w.data.orders["O1"],
                    logistics: logistics.as_ref(),
                    merchant: &w.data.merchants["S1"],
                    user: &w.data.users["U1"],
                    tariffs: &w.data.brand_tariffs,
                    evidence_ok: false,
                    used: false,
                    now: system_now(),
                };
                let ladder = resolve_after_sales(&theta, &inputs).unwrap();
                for step in &ladder {
                    assert!(
                        !matches!(
                            step.kind,
                            ResolutionKind::Reship
                                | ResolutionKind::RedEnvelope { .. }
                                | ResolutionKind::RefundOnly
                        ),
                        "personal-reason ladder must not contain {:?}",
                        step.kind
                    );
                }
            }
        }
    }

    #[test]
    fn brand_decisions() {
        let w = fixtures::small_world();
        let merchant = &w.data.merchants["S1"];
        let logistics = w.data.logistics_for_order("O1");
        assert_eq!(
            brand_request_decision(merchant, logistics, "SafeLine"),
            BrandDecision::DeclineAlreadyShipped
        );
        assert_eq!(
            brand_request_decision(merchant, None, "SafeLine"),
            BrandDecision::RecordInRemark
        );
        assert_eq!(
            brand_request_decision(merchant, None, "Nowhere"),
            BrandDecision::DeclineNotOffered
        );
        let mut no_choice = merchant.clone();
        no_choice.allows_brand_choice = false;
        assert_eq!(
            brand_request_decision(&no_choice, None, "SafeLine"),
            BrandDecision::DeclineNotSupported
        );
    }

    #[test]
    fn coupon_applicability() {
        let w = fixtures::small_world();
        let product = &w.data.products["I1"];
        let coupons = w.data.coupons_for_user("U1");
        let kept = applicable_coupons(&coupons, product);
        assert_eq!(kept.len(), 1);

        let mut pricey_min = w.data.coupons["C1"].clone();
        pricey_min.minimum_purchase = Money::from_yuan(100);
        assert!(applicable_coupons(&[&pricey_min], product).is_empty());

        let mut wrong_cat = w.data.coupons["C1"].clone();
        wrong_cat.category_list = vec!["garden".into()];
        assert!(applicable_coupons(&[&wrong_cat], product).is_empty());
    }

    #[test]
    fn min_payable_spec_example() {
        let w = fixtures::small_world();
        let mut product = w.data.products["I1"].clone();
        product.price = Money::from_yuan(100);
        let mk = |id: &str, level: u32, off: i64, min: i64| crate::world::CouponRecord {
            coupon_id: id.into(),
            user_id: "U1".into(),
            level,
            amount_off: Money::from_yuan(off),
            minimum_purchase: Money::from_yuan(min),
            category_list: vec!["kitchen".into()],
        };
        let c1 = mk("CA", 1, 5, 50);
        let c2 = mk("CB", 1, 8, 120); // inapplicable: min purchase 120 > 100
        let c3 = mk("CC", 2, 10, 80);
        let (payable, ids) = min_payable(product.price, &[&c1, &c2, &c3], &product);
        assert_eq!(payable, Money::from_yuan(85));
        assert_eq!(ids, vec!["CA".to_string(), "CC".to_string()]);

        let (payable, ids) = min_payable(product.price, &[], &product);
        assert_eq!(payable, Money::from_yuan(100));
        assert!(ids.is_empty());

        let big = mk("CZ", 1, 150, 50);
        let (payable, ids) = min_payable(product.price, &[&big, &c3], &product);
        assert_eq!(payable, Money::ZERO);
        assert_eq!(ids, vec!["CZ".to_string()], "fewest coupons wins the tie");
    }
}
