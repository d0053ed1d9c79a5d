//! The domain rule catalog: 82 operator rules with stable ids and category
//! tags, plus the category mapping the rule filter uses.
//!
//! The rules are compiled into the oracle operations; the catalog exists for
//! prompt assembly, the dynamic module, and traceability.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Task family a conversation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskFamily {
    Logistics,
    PreSales,
    AfterSales,
}

impl TaskFamily {
    pub const ALL: [TaskFamily; 3] = [
        TaskFamily::Logistics,
        TaskFamily::PreSales,
        TaskFamily::AfterSales,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskFamily::Logistics => "logistics",
            TaskFamily::PreSales => "pre-sales",
            TaskFamily::AfterSales => "after-sales",
        }
    }
}

impl fmt::Display for TaskFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleCategory {
    Basic,
    ShippingCost,
    Insurance,
    Delivery,
    Brand,
    Time,
    Address,
    AfterSales,
    Reship,
    RedEnvelope,
    Return,
    RefundOnly,
    Coupon,
    Recommendation,
    LiveStream,
}

impl RuleCategory {
    pub const ALL: [RuleCategory; 15] = [
        RuleCategory::Basic,
        RuleCategory::ShippingCost,
        RuleCategory::Insurance,
        RuleCategory::Delivery,
        RuleCategory::Brand,
        RuleCategory::Time,
        RuleCategory::Address,
        RuleCategory::AfterSales,
        RuleCategory::Reship,
        RuleCategory::RedEnvelope,
        RuleCategory::Return,
        RuleCategory::RefundOnly,
        RuleCategory::Coupon,
        RuleCategory::Recommendation,
        RuleCategory::LiveStream,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleCategory::Basic => "basic",
            RuleCategory::ShippingCost => "shipping-cost",
            RuleCategory::Insurance => "insurance",
            RuleCategory::Delivery => "delivery",
            RuleCategory::Brand => "brand",
            RuleCategory::Time => "time",
            RuleCategory::Address => "address",
            RuleCategory::AfterSales => "after-sales",
            RuleCategory::Reship => "reship",
            RuleCategory::RedEnvelope => "red-envelope",
            RuleCategory::Return => "return",
            RuleCategory::RefundOnly => "refund-only",
            RuleCategory::Coupon => "coupon",
            RuleCategory::Recommendation => "recommendation",
            RuleCategory::LiveStream => "live-stream",
        }
    }
}

impl fmt::Display for RuleCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown rule category {0:?}")]
pub struct UnknownCategory(String);

impl FromStr for RuleCategory {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleCategory::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownCategory(s.to_string()))
    }
}

/// One catalog entry. Ids are stable across releases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub rule_id: String,
    pub category: RuleCategory,
    pub text: String,
}

macro_rules! rules {
    ($(($id:literal, $cat:ident, $text:literal)),* $(,)?) => {
        &[$(( $id, RuleCategory::$cat, $text )),*]
    };
}

const CATALOG: &[(&str, RuleCategory, &str)] = rules![
    // -- Basic guidelines ---------------------------------------------------
    ("basic-01", Basic, "Always address the customer politely, patiently, and professionally, in the voice of an e-commerce customer-service representative."),
    ("basic-02", Basic, "The system time is fixed at 00:00 on June 12, 2025; use it for every time calculation."),
    ("basic-03", Basic, "When a request cannot be completed with the available tools, call switch_to_human to hand over to a human agent instead of giving unhelpful replies."),
    ("basic-04", Basic, "When the customer shows strong negative emotions, call switch_to_human to hand over to a human agent."),
    ("basic-05", Basic, "Never ask the customer for ID values; any IDs you need arrive with the customer's messages."),
    ("basic-06", Basic, "If the given IDs include no order_id, the customer has not yet placed an order; if there is no logistics_id, the seller has not yet shipped the order."),
    ("basic-07", Basic, "Record special customer requests (expedited shipping, preferred delivery times, other product-specific asks) in the order notes."),
    ("basic-08", Basic, "After settling the current request, ask whether the customer needs anything else."),
    ("basic-09", Basic, "Once the customer confirms every request is settled and the needed tool actions are complete, call end_conversation to finish the conversation."),
    // -- Shipping cost ------------------------------------------------------
    ("shipping-cost-01", ShippingCost, "Total shipping cost is computed from the total weight of the goods: quantity multiplied by unit weight."),
    ("shipping-cost-02", ShippingCost, "Quote return shipping costs with the same logistics brand that carried the original shipment."),
    ("shipping-cost-03", ShippingCost, "If the order has not shipped (no logistics record), compare the merchant's logistics brands and quote return shipping with the cheapest brand."),
    ("shipping-cost-04", ShippingCost, "When the customer asks whether they must advance return shipping costs, state the exact amount to advance, taking shipping insurance into account."),
    ("shipping-cost-05", ShippingCost, "If the return is the merchant's fault, the customer pays no return shipping, with or without shipping insurance."),
    ("shipping-cost-06", ShippingCost, "When a logistics interception is triggered by an address change, the customer bears no extra shipping cost."),
    // -- Shipping insurance -------------------------------------------------
    ("insurance-01", Insurance, "Shipping insurance is a merchant-provided service that subsidizes return shipping costs."),
    ("insurance-02", Insurance, "The insurance subsidy covers at most 9 RMB; the customer pays any return shipping cost above that."),
    ("insurance-03", Insurance, "When asked about advancing shipping costs, compute the return shipping cost first, then answer according to the insurance subsidy."),
    // -- Delivered but not received ------------------------------------------
    ("delivery-01", Delivery, "If the customer reports a package marked delivered but not received, advise them to check with family or friends, or to contact the logistics company."),
    // -- Brand selection ----------------------------------------------------
    ("brand-01", Brand, "Accepting a specified brand means choosing among the brands the merchant actually uses, never an arbitrary brand."),
    ("brand-02", Brand, "For orders that have already shipped, the logistics brand can no longer be specified or changed."),
    ("brand-03", Brand, "If the merchant supports brand choice and the customer names a brand the merchant uses, record the requirement in the order notes."),
    ("brand-04", Brand, "If the merchant does not support brand choice, or the requested brand is not among the merchant's brands, politely decline."),
    // -- Time estimation ----------------------------------------------------
    ("time-01", Time, "The system time is 00:00 on Thursday, June 12, 2025."),
    ("time-02", Time, "State times as hour-on-date, e.g. \"Your estimated arrival time is 13:00 on June 12\"; every time computation is exact to the hour."),
    ("time-03", Time, "For placed orders (an order_id exists), the estimated shipping time is the order payment time plus the merchant's promised shipping hours."),
    ("time-04", Time, "For orders not yet placed (no order_id), the estimated shipping time is the system time plus the merchant's promised shipping hours."),
    ("time-05", Time, "For shipped orders (a logistics_id exists), the estimated arrival time is the logistics pickup time plus the brand's transit time."),
    ("time-06", Time, "For unshipped orders, the estimated arrival time is the estimated shipping time plus the logistics transit time."),
    ("time-07", Time, "For unshipped orders where no brand was successfully specified, or the merchant does not support specifying one, compare the merchant's brands and estimate with the longest transit time."),
    ("time-08", Time, "If the customer successfully specified a logistics brand, estimate with that brand's transit time."),
    // -- Address modification -------------------------------------------------
    ("address-01", Address, "If the order has not shipped (no logistics_id), update receive_address in the order database directly to the new address."),
    ("address-02", Address, "If the order has shipped, confirm the current logistics state before changing the address; it can be In Transit or Delivered."),
    ("address-03", Address, "If the logistics state is In Transit, start an interception with three writes: set the order receive_address to the new address, set the logistics receive_address to the new address, and set the logistics state to Intercepted."),
    ("address-04", Address, "If the logistics state is Delivered, negotiate a return with the customer instead; see the return rules."),
    ("address-05", Address, "If the logistics state is Delivered and the customer does not meet the return conditions, advise them to contact the logistics company."),
    // -- After-sales --------------------------------------------------------
    ("after-sales-01", AfterSales, "For after-sales requests citing missing or wrong items, transit damage, or dissatisfaction with quality, first ask the customer for pictures that substantiate the claim."),
    ("after-sales-02", AfterSales, "A token like [Image x] in a customer message is the customer sending an image at that point; it refers to the x-th image provided."),
    ("after-sales-03", AfterSales, "For returns driven by personal reasons (changed mind, over-ordered, wrong choice), do not ask for pictures."),
    ("after-sales-04", AfterSales, "If the customer cannot supply pictures, or the pictures do not substantiate the claim, comfort the customer first and politely decline the request."),
    ("after-sales-05", AfterSales, "For verified missing items, tell the customer the missing items will be resent and record it in the order notes."),
    ("after-sales-06", AfterSales, "For verified transit damage or quality dissatisfaction, first try to settle with a small red-envelope compensation."),
    ("after-sales-07", AfterSales, "The red-envelope ceiling is the order payment amount times the merchant's maximum compensation percentage, rounded down to a whole number of RMB, with a 1 RMB minimum."),
    ("after-sales-08", AfterSales, "Never reveal how the red-envelope amount is calculated."),
    ("after-sales-09", AfterSales, "When the customer accepts a red envelope, record the compensation details in the order notes."),
    ("after-sales-10", AfterSales, "If a red envelope does not settle the issue, negotiate the return process; see the return rules."),
    ("after-sales-11", AfterSales, "If neither a red envelope nor a return settles the issue, hand over to a human agent."),
    // -- Reshipment -----------------------------------------------------------
    ("reship-01", Reship, "Register a reshipment only when it is verified that the merchant shipped missing or wrong items, and record the details in the order notes."),
    ("reship-02", Reship, "Outside verified missing or wrong item cases, never register a reshipment."),
    ("reship-03", Reship, "If the customer asks for a reshipment without meeting the conditions, politely tell them the outcome."),
    // -- Red envelope ---------------------------------------------------------
    ("red-envelope-01", RedEnvelope, "The red-envelope ceiling is the order payment amount times the merchant's maximum compensation percentage, rounded down to a whole number of RMB, with a 1 RMB minimum."),
    ("red-envelope-02", RedEnvelope, "Never reveal how the red-envelope amount is calculated."),
    ("red-envelope-03", RedEnvelope, "When the customer accepts a red envelope, record the compensation details in the order notes."),
    // -- Returns --------------------------------------------------------------
    ("return-01", Return, "Before starting any return, check whether the product is in the fresh/perishable category; if so, follow the refund-only rules."),
    ("return-02", Return, "For personal-reason returns, do not ask for photo evidence."),
    ("return-03", Return, "For personal-reason returns, the most that can be offered is a return with refund, and only when the return conditions are met."),
    ("return-04", Return, "Never process refund-only, reshipment, or red-envelope compensation for a personal-reason return."),
    ("return-05", Return, "For complaints about product quality, first ask the customer for pictures that verify the complaint."),
    ("return-06", Return, "If the pictures verify a quality complaint, first try a small red-envelope compensation to settle."),
    ("return-07", Return, "If compensation cannot settle a verified quality complaint, move to the return-with-refund process; the fault is the merchant's, so the customer pays no return shipping."),
    ("return-08", Return, "If the pictures do not verify the complaint, comfort the customer and, based on what the pictures show, politely decline red envelopes, refund-only, or reshipment."),
    ("return-09", Return, "If the unverified complainant still wants a return with refund, run the return-with-refund process as a personal-reason return and state the return shipping cost according to shipping insurance."),
    ("return-10", Return, "If the goods have already been returned, a red envelope can no longer be offered."),
    ("return-11", Return, "If the order has not shipped (no logistics_id), set the order status directly to \"Cancelled\"."),
    ("return-12", Return, "For shipped orders, before processing the return, confirm the product supports 7-day no-reason returns (is_support_7d_back) and confirm with the customer whether it has been used."),
    ("return-13", Return, "A return is possible only if the product is unused, supports 7-day no-reason returns, and no more than 7 days have passed since receipt."),
    ("return-14", Return, "When the return conditions are met, give the customer the merchant's return address so they can send the goods back."),
    ("return-15", Return, "Also state the shipping-insurance situation and the exact amount the customer must advance for return shipping, to one decimal place."),
    ("return-16", Return, "Only process the return after the customer confirms the return shipment is on its way."),
    ("return-17", Return, "Customer level 3 and above: process an expedited return by setting the order status to \"Refunded\"."),
    ("return-18", Return, "Customer level below 3: process a standard return by setting the order status to \"Returning\"."),
    // -- Refund-only ----------------------------------------------------------
    ("refund-only-01", RefundOnly, "Refund-only is reserved for fresh/perishable goods; all other product types go through return-with-refund."),
    ("refund-only-02", RefundOnly, "For fresh/perishable goods, verify the product issue before a refund-only; when one is started, set the order status to \"Refund-Only\"."),
    ("refund-only-03", RefundOnly, "For fresh/perishable goods, there is no need to confirm whether the product has been used."),
    ("refund-only-04", RefundOnly, "For verified issues with fresh/perishable goods, do not run a return-with-refund; process a refund-only."),
    ("refund-only-05", RefundOnly, "A refund-only needs no merchant address and no return shipment from the customer."),
    ("refund-only-06", RefundOnly, "If the customer wants a refund-only without meeting the conditions, politely tell them the outcome."),
    // -- Coupons --------------------------------------------------------------
    ("coupon-01", Coupon, "A coupon applies to a product only if the product's category is in the coupon's category_list and the product's price meets the coupon's minimum_purchase."),
    ("coupon-02", Coupon, "Coupons of different levels combine; coupons of the same level never stack."),
    ("coupon-03", Coupon, "When coupons apply to the product, tell the customer the minimum payable amount after coupons."),
    // -- Recommendation -------------------------------------------------------
    ("recommendation-01", Recommendation, "When no current product meets the customer's requirements, say so and recommend products similar to the request."),
    // -- Live stream ----------------------------------------------------------
    ("live-stream-01", LiveStream, "When the answer to a product question is uncertain, use get_video_detail to pull information from the product's recent live-stream clips."),
];

/// Number of entries in the shipped catalog.
pub const CATALOG_LEN: usize = 82;

/// The full rule catalog in stable order.
pub fn catalog() -> Vec<Rule> {
    CATALOG
        .iter()
        .map(|(id, cat, text)| Rule {
            rule_id: (*id).to_string(),
            category: *cat,
            text: (*text).to_string(),
        })
        .collect()
}

/// A selected subset of the catalog, by rule id, in catalog order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    ids: Vec<String>,
}

impl RuleSet {
    pub fn full() -> RuleSet {
        RuleSet {
            ids: CATALOG.iter().map(|(id, _, _)| (*id).to_string()).collect(),
        }
    }

    /// All rules in the given categories, catalog order preserved.
    pub fn for_categories(categories: &[RuleCategory]) -> RuleSet {
        let wanted: BTreeSet<RuleCategory> = categories.iter().copied().collect();
        RuleSet {
            ids: CATALOG
                .iter()
                .filter(|(_, cat, _)| wanted.contains(cat))
                .map(|(id, _, _)| (*id).to_string())
                .collect(),
        }
    }

    /// Keep only ids that exist in the catalog, restoring catalog order.
    /// Unknown ids are clamped out.
    pub fn clamped(ids: &[String]) -> RuleSet {
        let requested: BTreeSet<&str> = ids.iter().map(|s| s.as_str()).collect();
        RuleSet {
            ids: CATALOG
                .iter()
                .filter(|(id, _, _)| requested.contains(*id))
                .map(|(id, _, _)| (*id).to_string())
                .collect(),
        }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.ids.iter().any(|i| i == id)
    }

    pub fn is_subset_of_catalog(&self) -> bool {
        let all: BTreeSet<&str> = CATALOG.iter().map(|(id, _, _)| *id).collect();
        self.ids.iter().all(|i| all.contains(i.as_str()))
    }

    pub fn rules(&self) -> Vec<Rule> {
        let wanted: BTreeSet<&str> = self.ids.iter().map(|s| s.as_str()).collect();
        catalog()
            .into_iter()
            .filter(|r| wanted.contains(r.rule_id.as_str()))
            .collect()
    }
}

/// Default rule-filter mapping from task family to rule categories. This is
/// the same mapping the task generator records into `rules_scope`.
pub fn categories_for_family(family: TaskFamily) -> &'static [RuleCategory] {
    match family {
        TaskFamily::Logistics => &[
            RuleCategory::Basic,
            RuleCategory::ShippingCost,
            RuleCategory::Insurance,
            RuleCategory::Delivery,
            RuleCategory::Brand,
            RuleCategory::Time,
            RuleCategory::Address,
        ],
        TaskFamily::PreSales => &[
            RuleCategory::Basic,
            RuleCategory::Time,
            RuleCategory::Coupon,
            RuleCategory::Recommendation,
            RuleCategory::LiveStream,
        ],
        TaskFamily::AfterSales => &[
            RuleCategory::Basic,
            RuleCategory::AfterSales,
            RuleCategory::Reship,
            RuleCategory::RedEnvelope,
            RuleCategory::Return,
            RuleCategory::RefundOnly,
        ],
    }
}

/// Rule subset a task family sees under the default filter.
pub fn rules_for_family(family: TaskFamily) -> RuleSet {
    RuleSet::for_categories(categories_for_family(family))
}

/// The catalog file form: a JSON array of {rule_id, category, text}.
pub fn catalog_to_json() -> String {
    let mut text = serde_json::to_string_pretty(&catalog()).expect("catalog serializes");
    text.push('\n');
    text
}

pub fn catalog_from_json(text: &str) -> Result<Vec<Rule>, serde_json::Error> {
    serde_json::from_str(text)
}
