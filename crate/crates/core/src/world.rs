//! Persistent domain records and the versioned world state store.
//!
//! A `WorldState` is owned by exactly one session and mutated sequentially
//! through `apply`; snapshots are immutable deep copies safe to share.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::{Fraction, Money, WeightKg};
use crate::time::Timestamp;

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub name: String,
    pub level: u32,
    pub default_address: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerchantRecord {
    pub shop_id: String,
    pub name: String,
    pub return_address: String,
    pub brands: Vec<String>,
    pub allows_brand_choice: bool,
    pub promised_shipping_hours: u32,
    pub max_compensation_pct: Fraction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductRecord {
    pub item_id: String,
    pub shop_id: String,
    pub name: String,
    pub price: Money,
    pub unit_weight_kg: WeightKg,
    pub category: String,
    pub is_fresh_perishable: bool,
    pub is_support_7d_back: bool,
    pub has_shipping_insurance: bool,
    #[serde(default)]
    pub asset_refs: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OrderStatus {
    Paid,
    Cancelled,
    Returning,
    Refunded,
    #[serde(rename = "Refund-Only")]
    RefundOnly,
    Completed,
}

impl OrderStatus {
    pub const ALL: [OrderStatus; 6] = [
        OrderStatus::Paid,
        OrderStatus::Cancelled,
        OrderStatus::Returning,
        OrderStatus::Refunded,
        OrderStatus::RefundOnly,
        OrderStatus::Completed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OrderStatus::Paid => "Paid",
            OrderStatus::Cancelled => "Cancelled",
            OrderStatus::Returning => "Returning",
            OrderStatus::Refunded => "Refunded",
            OrderStatus::RefundOnly => "Refund-Only",
            OrderStatus::Completed => "Completed",
        }
    }

    pub fn parse(s: &str) -> Option<OrderStatus> {
        Self::ALL.iter().copied().find(|v| v.as_str() == s)
    }

    /// Statuses that still admit after-sales handling.
    pub fn permits_after_sales(self) -> bool {
        !matches!(
            self,
            OrderStatus::Cancelled | OrderStatus::Refunded | OrderStatus::RefundOnly
        )
    }
}

impl fmt::Display for OrderStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderRecord {
    pub order_id: String,
    pub user_id: String,
    pub item_id: String,
    pub quantity: u32,
    pub payment_amount: Money,
    pub payment_time: Timestamp,
    pub receive_address: String,
    pub status: OrderStatus,
    pub has_shipping_insurance: bool,
    #[serde(default)]
    pub remarks: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogisticsState {
    #[serde(rename = "In Transit")]
    InTransit,
    Delivered,
    Intercepted,
}

impl LogisticsState {
    pub const ALL: [LogisticsState; 3] = [
        LogisticsState::InTransit,
        LogisticsState::Delivered,
        LogisticsState::Intercepted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LogisticsState::InTransit => "In Transit",
            LogisticsState::Delivered => "Delivered",
            LogisticsState::Intercepted => "Intercepted",
        }
    }

    pub fn parse(s: &str) -> Option<LogisticsState> {
        Self::ALL.iter().copied().find(|v| v.as_str() == s)
    }
}

impl fmt::Display for LogisticsState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogisticsRecord {
    pub logistics_id: String,
    pub order_id: String,
    pub brand: String,
    pub pickup_time: Timestamp,
    pub receive_address: String,
    pub state: LogisticsState,
    #[serde(default)]
    pub delivered_time: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrandTariff {
    pub brand: String,
    pub transit_hours: u32,
    pub base_fee: Money,
    pub per_kg_fee: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouponRecord {
    pub coupon_id: String,
    pub user_id: String,
    pub level: u32,
    pub amount_off: Money,
    pub minimum_purchase: Money,
    pub category_list: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssetModality {
    Image,
    Video,
}

/// Opaque stand-in for a customer image or live-stream clip. The `evidence`
/// map is the ground-truth annotation of what the asset substantiates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetRef {
    pub asset_id: String,
    pub modality: AssetModality,
    pub description: String,
    #[serde(default)]
    pub evidence: BTreeMap<String, bool>,
    #[serde(default)]
    pub transcript: Option<String>,
}

// ---------------------------------------------------------------------------
// World data + state
// ---------------------------------------------------------------------------

/// The seven keyed record maps plus brand tariffs; the flat-file world schema.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WorldData {
    #[serde(default)]
    pub users: BTreeMap<String, UserRecord>,
    #[serde(default)]
    pub merchants: BTreeMap<String, MerchantRecord>,
    #[serde(default)]
    pub products: BTreeMap<String, ProductRecord>,
    #[serde(default)]
    pub orders: BTreeMap<String, OrderRecord>,
    #[serde(default)]
    pub logistics: BTreeMap<String, LogisticsRecord>,
    #[serde(default)]
    pub coupons: BTreeMap<String, CouponRecord>,
    #[serde(default)]
    pub assets: BTreeMap<String, AssetRef>,
    #[serde(default)]
    pub brand_tariffs: BTreeMap<String, BrandTariff>,
}

impl WorldData {
    /// The logistics record for an order, if the order has shipped.
    pub fn logistics_for_order(&self, order_id: &str) -> Option<&LogisticsRecord> {
        self.logistics.values().find(|l| l.order_id == order_id)
    }

    pub fn coupons_for_user(&self, user_id: &str) -> Vec<&CouponRecord> {
        self.coupons
            .values()
            .filter(|c| c.user_id == user_id)
            .collect()
    }

    pub fn products_for_shop(&self, shop_id: &str) -> Vec<&ProductRecord> {
        self.products
            .values()
            .filter(|p| p.shop_id == shop_id)
            .collect()
    }
}

/// A single field write against the store. The four modification tools plus
/// `remark` compile to exactly these variants; replaying a write log from the
/// initial snapshot reproduces the final snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum FieldWrite {
    OrderAddress {
        order_id: String,
        address: String,
    },
    OrderStatus {
        order_id: String,
        status: OrderStatus,
    },
    LogisticsAddress {
        logistics_id: String,
        address: String,
    },
    LogisticsState {
        logistics_id: String,
        state: LogisticsState,
    },
    RemarkAppend {
        order_id: String,
        content: String,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WorldError {
    #[error("world file is not valid JSON: {0}")]
    Parse(String),
    #[error("schema violation at {record}: {problem}")]
    Schema { record: String, problem: String },
    #[error("referential integrity violation: {0}")]
    Integrity(String),
    #[error("unknown record {kind} {id:?}")]
    UnknownRecord { kind: &'static str, id: String },
    #[error("invalid value for {field}: {value:?} (allowed: {allowed})")]
    InvalidValue {
        field: &'static str,
        value: String,
        allowed: String,
    },
}

/// The mutable database behind one session: record maps, a monotonically
/// increasing version, and the write log that makes replay exact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub data: WorldData,
    pub version: u64,
    #[serde(default)]
    pub write_log: Vec<FieldWrite>,
}

impl WorldState {
    pub fn new(data: WorldData) -> Result<WorldState, WorldError> {
        validate(&data)?;
        Ok(WorldState {
            data,
            version: 0,
            write_log: Vec::new(),
        })
    }

    /// Parse and validate a world file (one UTF-8 JSON document).
    pub fn load(mut source: impl Read) -> Result<WorldState, WorldError> {
        let mut buf = String::new();
        source
            .read_to_string(&mut buf)
            .map_err(|e| WorldError::Parse(e.to_string()))?;
        Self::load_str(&buf)
    }

    pub fn load_str(text: &str) -> Result<WorldState, WorldError> {
        let data: WorldData =
            serde_json::from_str(text).map_err(|e| WorldError::Parse(e.to_string()))?;
        WorldState::new(data)
    }

    /// Immutable deep copy of the current state.
    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            data: self.data.clone(),
            version: self.version,
        }
    }

    /// Apply one field write. Validates the target exists and the value is
    /// legal, mutates, bumps the version, and appends to the write log.
    pub fn apply(&mut self, write: FieldWrite) -> Result<(), WorldError> {
        match &write {
            FieldWrite::OrderAddress { order_id, address } => {
                if address.trim().is_empty() {
                    return Err(WorldError::InvalidValue {
                        field: "address",
                        value: address.clone(),
                        allowed: "a non-empty address".into(),
                    });
                }
                let order =
                    self.data
                        .orders
                        .get_mut(order_id)
                        .ok_or(WorldError::UnknownRecord {
                            kind: "order",
                            id: order_id.clone(),
                        })?;
                order.receive_address = address.clone();
            }
            FieldWrite::OrderStatus { order_id, status } => {
                let order =
                    self.data
                        .orders
                        .get_mut(order_id)
                        .ok_or(WorldError::UnknownRecord {
                            kind: "order",
                            id: order_id.clone(),
                        })?;
                order.status = *status;
            }
            FieldWrite::LogisticsAddress {
                logistics_id,
                address,
            } => {
                if address.trim().is_empty() {
                    return Err(WorldError::InvalidValue {
                        field: "address",
                        value: address.clone(),
                        allowed: "a non-empty address".into(),
                    });
                }
                let log =
                    self.data
                        .logistics
                        .get_mut(logistics_id)
                        .ok_or(WorldError::UnknownRecord {
                            kind: "logistics",
                            id: logistics_id.clone(),
                        })?;
                log.receive_address = address.clone();
            }
            FieldWrite::LogisticsState {
                logistics_id,
                state,
            } => {
                let log =
                    self.data
                        .logistics
                        .get_mut(logistics_id)
                        .ok_or(WorldError::UnknownRecord {
                            kind: "logistics",
                            id: logistics_id.clone(),
                        })?;
                log.state = *state;
                if *state != LogisticsState::Delivered {
                    log.delivered_time = None;
                }
            }
            FieldWrite::RemarkAppend { order_id, content } => {
                let order =
                    self.data
                        .orders
                        .get_mut(order_id)
                        .ok_or(WorldError::UnknownRecord {
                            kind: "order",
                            id: order_id.clone(),
                        })?;
                order.remarks.push(content.clone());
            }
        }
        self.version += 1;
        self.write_log.push(write);
        Ok(())
    }

    /// Replay a write log against a snapshot, yielding the resulting state.
    pub fn replay_writes(
        initial: &StateSnapshot,
        writes: &[FieldWrite],
    ) -> Result<WorldState, WorldError> {
        let mut state = WorldState {
            data: initial.data.clone(),
            version: initial.version,
            write_log: Vec::new(),
        };
        for w in writes {
            state.apply(w.clone())?;
        }
        Ok(state)
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

fn validate(data: &WorldData) -> Result<(), WorldError> {
    let schema = |record: &str, problem: &str| WorldError::Schema {
        record: record.to_string(),
        problem: problem.to_string(),
    };

    for (key, u) in &data.users {
        if key != &u.user_id {
            return Err(schema(
                &format!("users.{key}"),
                "map key does not match user_id",
            ));
        }
        if u.level < 1 {
            return Err(schema(&format!("users.{key}"), "level must be >= 1"));
        }
    }
    for (key, m) in &data.merchants {
        let rec = format!("merchants.{key}");
        if key != &m.shop_id {
            return Err(schema(&rec, "map key does not match shop_id"));
        }
        if m.brands.is_empty() {
            return Err(schema(&rec, "brands must be non-empty"));
        }
        if !m.max_compensation_pct.is_at_most_one() {
            return Err(schema(&rec, "max_compensation_pct must be <= 1"));
        }
        for b in &m.brands {
            if !data.brand_tariffs.contains_key(b) {
                return Err(WorldError::Integrity(format!(
                    "merchant {key} uses brand {b:?} with no tariff entry"
                )));
            }
        }
    }
    for (key, p) in &data.products {
        let rec = format!("products.{key}");
        if key != &p.item_id {
            return Err(schema(&rec, "map key does not match item_id"));
        }
        if p.unit_weight_kg.grams() == 0 {
            return Err(schema(&rec, "unit_weight_kg must be > 0"));
        }
        if !data.merchants.contains_key(&p.shop_id) {
            return Err(WorldError::Integrity(format!(
                "product {key} references missing shop {:?}",
                p.shop_id
            )));
        }
        for a in &p.asset_refs {
            if !data.assets.contains_key(a) {
                return Err(WorldError::Integrity(format!(
                    "product {key} references missing asset {a:?}"
                )));
            }
        }
    }
    for (key, o) in &data.orders {
        let rec = format!("orders.{key}");
        if key != &o.order_id {
            return Err(schema(&rec, "map key does not match order_id"));
        }
        if o.quantity < 1 {
            return Err(schema(&rec, "quantity must be >= 1"));
        }
        if !data.users.contains_key(&o.user_id) {
            return Err(WorldError::Integrity(format!(
                "order {key} references missing user {:?}",
                o.user_id
            )));
        }
        if !data.products.contains_key(&o.item_id) {
            return Err(WorldError::Integrity(format!(
                "order {key} references missing item {:?}",
                o.item_id
            )));
        }
    }
    for (key, l) in &data.logistics {
        let rec = format!("logistics.{key}");
        if key != &l.logistics_id {
            return Err(schema(&rec, "map key does not match logistics_id"));
        }
        let order = data.orders.get(&l.order_id).ok_or_else(|| {
            WorldError::Integrity(format!(
                "logistics {key} references missing order {:?}",
                l.order_id
            ))
        })?;
        match (l.state, l.delivered_time.is_some()) {
            (LogisticsState::Delivered, false) => {
                return Err(schema(
                    &rec,
                    "delivered_time required when state is Delivered",
                ))
            }
            (LogisticsState::Delivered, true) => {}
            (_, true) => {
                return Err(schema(
                    &rec,
                    "delivered_time only allowed when state is Delivered",
                ))
            }
            _ => {}
        }
        // The shipping brand must be one the order's merchant actually uses.
        let product = data.products.get(&order.item_id).ok_or_else(|| {
            WorldError::Integrity(format!("order {} references missing item", l.order_id))
        })?;
        let merchant = data.merchants.get(&product.shop_id).ok_or_else(|| {
            WorldError::Integrity(format!(
                "product {} references missing shop",
                product.item_id
            ))
        })?;
        if !merchant.brands.contains(&l.brand) {
            return Err(WorldError::Integrity(format!(
                "logistics {key} uses brand {:?} not offered by merchant {}",
                l.brand, merchant.shop_id
            )));
        }
    }
    for (key, c) in &data.coupons {
        let rec = format!("coupons.{key}");
        if key != &c.coupon_id {
            return Err(schema(&rec, "map key does not match coupon_id"));
        }
        if c.amount_off.is_zero() {
            return Err(schema(&rec, "amount_off must be > 0"));
        }
        if c.level < 1 {
            return Err(schema(&rec, "level must be >= 1"));
        }
        if !data.users.contains_key(&c.user_id) {
            return Err(WorldError::Integrity(format!(
                "coupon {key} references missing user {:?}",
                c.user_id
            )));
        }
    }
    for (key, a) in &data.assets {
        if key != &a.asset_id {
            return Err(schema(
                &format!("assets.{key}"),
                "map key does not match asset_id",
            ));
        }
    }
    for (key, t) in &data.brand_tariffs {
        let rec = format!("brand_tariffs.{key}");
        if key != &t.brand {
            return Err(schema(&rec, "map key does not match brand"));
        }
        if t.transit_hours == 0 {
            return Err(schema(&rec, "transit_hours must be > 0"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Snapshots, canonical form, diff
// ---------------------------------------------------------------------------

/// Immutable deep copy of a world state. Later writes to the live state do
/// not alter it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub data: WorldData,
    pub version: u64,
}

impl StateSnapshot {
    /// Canonical serialized form: lexicographically sorted keys, stable
    /// value rendering, version counter excluded. Byte-identical across
    /// runs for equal states.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        // serde_json's default Map is BTree-backed, so round-tripping
        // through Value sorts every object key.
        let value = serde_json::to_value(&self.data).expect("world data serializes");
        serde_json::to_string(&value)
            .expect("value serializes")
            .into_bytes()
    }

    pub fn canonical_eq(&self, other: &StateSnapshot) -> bool {
        self.canonical_bytes() == other.canonical_bytes()
    }
}

/// How a differing field is compared downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffKind {
    /// Plain value inequality.
    Exact,
    /// Free-text remark content; equivalence is judged, not byte-compared.
    Semantic,
}

/// One differing leaf field between two snapshots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDiff {
    pub path: String,
    pub old: serde_json::Value,
    pub new: serde_json::Value,
    pub kind: DiffKind,
}

/// One `FieldDiff` per differing leaf field; empty iff the snapshots are
/// canonical-equal. Remark lists diff as a single semantic field.
pub fn diff(a: &StateSnapshot, b: &StateSnapshot) -> Vec<FieldDiff> {
    let va = serde_json::to_value(&a.data).expect("serializes");
    let vb = serde_json::to_value(&b.data).expect("serializes");
    let mut out = Vec::new();
    diff_value("", &va, &vb, &mut out);
    out
}

fn diff_value(path: &str, a: &serde_json::Value, b: &serde_json::Value, out: &mut Vec<FieldDiff>) {
    use serde_json::Value;
    if a == b {
        return;
    }
    // Remark lists are appended-to free text: report the whole list as one
    // semantic diff so an append counts as a single field change.
    if path.ends_with(".remarks") {
        out.push(FieldDiff {
            path: path.to_string(),
            old: a.clone(),
            new: b.clone(),
            kind: DiffKind::Semantic,
        });
        return;
    }
    match (a, b) {
        (Value::Object(ma), Value::Object(mb)) => {
            let keys: std::collections::BTreeSet<&String> = ma.keys().chain(mb.keys()).collect();
            for k in keys {
                let sub = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                match (ma.get(k), mb.get(k)) {
                    (Some(x), Some(y)) => diff_value(&sub, x, y, out),
                    (Some(x), None) => out.push(FieldDiff {
                        path: sub,
                        old: x.clone(),
                        new: Value::Null,
                        kind: DiffKind::Exact,
                    }),
                    (None, Some(y)) => out.push(FieldDiff {
                        path: sub,
                        old: Value::Null,
                        new: y.clone(),
                        kind: DiffKind::Exact,
                    }),
                    (None, None) => unreachable!(),
                }
            }
        }
        _ => out.push(FieldDiff {
            path: path.to_string(),
            old: a.clone(),
            new: b.clone(),
            kind: DiffKind::Exact,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn load_fixture_round_trip() {
        let state = fixtures::small_world();
        assert_eq!(state.version, 0);
        assert!(state.data.users.contains_key("U1"));
        assert!(state.data.orders.contains_key("O1"));
    }

    #[test]
    fn missing_item_is_integrity_error() {
        let mut data = fixtures::small_world().data;
        data.orders.get_mut("O1").unwrap().item_id = "NOPE".into();
        let err = WorldState::new(data).unwrap_err();
        assert!(matches!(err, WorldError::Integrity(_)), "{err}");
    }

    #[test]
    fn foreign_brand_is_validation_error() {
        let mut data = fixtures::small_world().data;
        data.brand_tariffs.insert(
            "Outsider".into(),
            BrandTariff {
                brand: "Outsider".into(),
                transit_hours: 24,
                base_fee: Money::from_yuan(1),
                per_kg_fee: Money::from_yuan(1),
            },
        );
        data.logistics.get_mut("L1").unwrap().brand = "Outsider".into();
        let err = WorldState::new(data).unwrap_err();
        assert!(matches!(err, WorldError::Integrity(_)), "{err}");
    }

    #[test]
    fn snapshot_is_immutable() {
        let mut state = fixtures::small_world();
        let snap = state.snapshot();
        state
            .apply(FieldWrite::OrderStatus {
                order_id: "O1".into(),
                status: OrderStatus::Cancelled,
            })
            .unwrap();
        assert_eq!(snap.data.orders["O1"].status, OrderStatus::Paid);
        assert_eq!(state.version, 1);
    }

    #[test]
    fn empty_world_snapshot() {
        let state = WorldState::new(WorldData::default()).unwrap();
        let snap = state.snapshot();
        assert!(diff(&snap, &state.snapshot()).is_empty());
    }

    #[test]
    fn diff_identity_and_single_change() {
        let mut state = fixtures::small_world();
        let before = state.snapshot();
        assert!(diff(&before, &before).is_empty());
        state
            .apply(FieldWrite::OrderStatus {
                order_id: "O1".into(),
                status: OrderStatus::Cancelled,
            })
            .unwrap();
        let after = state.snapshot();
        let d = diff(&before, &after);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].path, "orders.O1.status");
        assert_eq!(d[0].kind, DiffKind::Exact);
    }

    #[test]
    fn remark_append_is_one_semantic_diff() {
        let mut state = fixtures::small_world();
        let before = state.snapshot();
        state
            .apply(FieldWrite::RemarkAppend {
                order_id: "O1".into(),
                content: "ship fast".into(),
            })
            .unwrap();
        let d = diff(&before, &state.snapshot());
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiffKind::Semantic);
        assert_eq!(d[0].path, "orders.O1.remarks");
    }

    #[test]
    fn write_log_replay_reproduces_state() {
        let mut state = fixtures::small_world();
        let initial = state.snapshot();
        state
            .apply(FieldWrite::OrderAddress {
                order_id: "O1".into(),
                address: "9 Elm Road".into(),
            })
            .unwrap();
        state
            .apply(FieldWrite::LogisticsAddress {
                logistics_id: "L1".into(),
                address: "9 Elm Road".into(),
            })
            .unwrap();
        state
            .apply(FieldWrite::LogisticsState {
                logistics_id: "L1".into(),
                state: LogisticsState::Intercepted,
            })
            .unwrap();
        let replayed = WorldState::replay_writes(&initial, &state.write_log).unwrap();
        assert!(replayed.snapshot().canonical_eq(&state.snapshot()));
    }

    #[test]
    fn unknown_write_target_errors() {
        let mut state = fixtures::small_world();
        let err = state
            .apply(FieldWrite::OrderStatus {
                order_id: "NOPE".into(),
                status: OrderStatus::Paid,
            })
            .unwrap_err();
        assert!(matches!(err, WorldError::UnknownRecord { .. }));
        assert_eq!(state.version, 0);
    }
}
