//! Small hand-built worlds for tests and demos.

use std::collections::BTreeMap;

use crate::money::{Fraction, Money, WeightKg};
use crate::time::Timestamp;
use crate::world::{
    AssetModality, AssetRef, BrandTariff, CouponRecord, LogisticsRecord, LogisticsState,
    MerchantRecord, OrderRecord, OrderStatus, ProductRecord, UserRecord, WorldData, WorldState,
};

/// One user, one merchant with two brands, one insured product, one paid
/// order shipped and in transit, one coupon, one image asset.
pub fn small_world() -> WorldState {
    let mut data = WorldData::default();
    data.brand_tariffs.insert(
        "FastExpress".into(),
        BrandTariff {
            brand: "FastExpress".into(),
            transit_hours: 48,
            base_fee: Money::from_yuan(5),
            per_kg_fee: Money::from_yuan(2),
        },
    );
    data.brand_tariffs.insert(
        "SafeLine".into(),
        BrandTariff {
            brand: "SafeLine".into(),
            transit_hours: 72,
            base_fee: Money::from_yuan(3),
            per_kg_fee: Money::from_yuan(3),
        },
    );
    data.users.insert(
        "U1".into(),
        UserRecord {
            user_id: "U1".into(),
            name: "Lin Mei".into(),
            level: 3,
            default_address: "12 Harbor Street, Riverside District".into(),
        },
    );
    data.merchants.insert(
        "S1".into(),
        MerchantRecord {
            shop_id: "S1".into(),
            name: "Sunrise Home Goods".into(),
            return_address: "Warehouse 4, 200 Depot Avenue, Northgate".into(),
            brands: vec!["FastExpress".into(), "SafeLine".into()],
            allows_brand_choice: true,
            promised_shipping_hours: 24,
            max_compensation_pct: Fraction::from_basis_points(700),
        },
    );
    data.assets.insert(
        "A1".into(),
        AssetRef {
            asset_id: "A1".into(),
            modality: AssetModality::Image,
            description: "photo of a ceramic mug with a cracked handle".into(),
            evidence: BTreeMap::from([("damage".into(), true)]),
            transcript: None,
        },
    );
    data.products.insert(
        "I1".into(),
        ProductRecord {
            item_id: "I1".into(),
            shop_id: "S1".into(),
            name: "Ceramic Mug Set".into(),
            price: Money::from_fen(5990),
            unit_weight_kg: WeightKg::from_grams(800),
            category: "kitchen".into(),
            is_fresh_perishable: false,
            is_support_7d_back: true,
            has_shipping_insurance: true,
            asset_refs: vec!["A1".into()],
        },
    );
    data.orders.insert(
        "O1".into(),
        OrderRecord {
            order_id: "O1".into(),
            user_id: "U1".into(),
            item_id: "I1".into(),
            quantity: 2,
            payment_amount: Money::from_fen(11980),
            payment_time: Timestamp::new(2025, 6, 10, 14, 0),
            receive_address: "12 Harbor Street, Riverside District".into(),
            status: OrderStatus::Paid,
            has_shipping_insurance: true,
            remarks: Vec::new(),
        },
    );
    data.logistics.insert(
        "L1".into(),
        LogisticsRecord {
            logistics_id: "L1".into(),
            order_id: "O1".into(),
            brand: "FastExpress".into(),
            pickup_time: Timestamp::new(2025, 6, 11, 9, 0),
            receive_address: "12 Harbor Street, Riverside District".into(),
            state: LogisticsState::InTransit,
            delivered_time: None,
        },
    );
    data.coupons.insert(
        "C1".into(),
        CouponRecord {
            coupon_id: "C1".into(),
            user_id: "U1".into(),
            level: 1,
            amount_off: Money::from_yuan(5),
            minimum_purchase: Money::from_yuan(50),
            category_list: vec!["kitchen".into()],
        },
    );
    WorldState::new(data).expect("fixture world validates")
}
