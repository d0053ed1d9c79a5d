//! Seeded world sampling: merchants, products, users, orders across the
//! lifecycle stages, coupons, and annotated assets.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::money::{Fraction, Money, WeightKg};
use crate::time::{system_now, Timestamp};
use crate::world::{
    AssetModality, AssetRef, BrandTariff, CouponRecord, LogisticsRecord, LogisticsState,
    MerchantRecord, OrderRecord, OrderStatus, ProductRecord, UserRecord, WorldData, WorldState,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldConfig {
    pub merchants: usize,
    pub products_per_merchant: usize,
    pub users: usize,
    pub orders: usize,
    pub coupons: usize,
}

impl Default for WorldConfig {
    fn default() -> WorldConfig {
        WorldConfig {
            merchants: 2,
            products_per_merchant: 3,
            users: 2,
            orders: 5,
            coupons: 3,
        }
    }
}

const BRAND_POOL: &[&str] = &[
    "FastExpress",
    "SafeLine",
    "SwiftPost",
    "LotusFreight",
    "NimbusShip",
    "QuickWing",
];

const USER_NAMES: &[&str] = &[
    "Lin Mei",
    "Zhao Yun",
    "Chen Hao",
    "Wang Fang",
    "Li Wei",
    "Sun Qian",
    "Zhou Rui",
    "Xu Jing",
];

const ADDRESSES: &[&str] = &[
    "12 Harbor Street, Riverside District",
    "88 Lakeview Road, Meadow District",
    "5 Plum Blossom Lane, Old Town",
    "301 Gingko Avenue, North Hill",
    "47 Canal Walk, East Dock",
    "9 Elm Road, Maple Quarter",
    "220 Camphor Street, South Gate",
    "16 Osmanthus Court, West Park",
];

const SHOP_NAMES: &[&str] = &[
    "Sunrise Home Goods",
    "Evergreen Market",
    "Golden Crane Trading",
    "Blue Harbor Store",
    "Maple Leaf Outlet",
];

const CATALOG_ITEMS: &[(&str, &str, bool)] = &[
    ("kitchen", "Ceramic Mug Set", false),
    ("kitchen", "Cast Iron Skillet", false),
    ("kitchen", "Bamboo Cutting Board", false),
    ("kitchen", "Glass Teapot", false),
    ("electronics", "Wireless Earbuds", false),
    ("electronics", "Portable Blender", false),
    ("electronics", "Smart Desk Lamp", false),
    ("electronics", "Mini Projector", false),
    ("clothing", "Linen Shirt", false),
    ("clothing", "Down Jacket", false),
    ("clothing", "Canvas Sneakers", false),
    ("fresh-food", "Fresh Strawberries", true),
    ("fresh-food", "Chilled Salmon Fillet", true),
    ("fresh-food", "Organic Blueberries", true),
    ("beauty", "Rose Face Cream", false),
    ("beauty", "Vitamin C Serum", false),
    ("toys", "Wooden Puzzle", false),
    ("toys", "Building Block Set", false),
];

const LIVESTREAM_FACTS: &[&str] = &[
    "ships with a spare accessory set",
    "comes with a two-year warranty",
    "is available in three colors",
    "restocks every Friday evening",
    "includes a travel pouch",
];

/// The lifecycle stage an order is generated in.
#[derive(Clone, Copy, PartialEq)]
enum Stage {
    Unshipped,
    InTransit,
    DeliveredRecent,
    DeliveredOld,
}

const STAGES: &[Stage] = &[
    Stage::Unshipped,
    Stage::InTransit,
    Stage::DeliveredRecent,
    Stage::DeliveredOld,
];

/// Sample a validated world. Orders cycle through the lifecycle stages so
/// every rule branch finds a host; all invariants hold by construction.
pub fn generate_world(seed: u64, cfg: &WorldConfig) -> WorldState {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut data = WorldData::default();
    let now = system_now();

    // Tariffs for the whole brand pool; fees stay at one decimal place so
    // every derived amount renders exactly.
    for (i, brand) in BRAND_POOL.iter().enumerate() {
        data.brand_tariffs.insert(
            brand.to_string(),
            BrandTariff {
                brand: brand.to_string(),
                transit_hours: [24u32, 36, 48, 60, 72, 96][i % 6] + 12 * rng.gen_range(0..2),
                base_fee: Money::from_fen(rng.gen_range(30..=80) * 10),
                per_kg_fee: Money::from_fen(rng.gen_range(10..=35) * 10),
            },
        );
    }

    for m in 0..cfg.merchants.max(1) {
        let shop_id = format!("S{}", m + 1);
        let brand_count = rng.gen_range(1..=3usize);
        let start = rng.gen_range(0..BRAND_POOL.len());
        let mut brands = Vec::new();
        for offset in start..start + brand_count {
            let b = BRAND_POOL[offset % BRAND_POOL.len()].to_string();
            if !brands.contains(&b) {
                brands.push(b);
            }
        }
        data.merchants.insert(
            shop_id.clone(),
            MerchantRecord {
                shop_id: shop_id.clone(),
                name: SHOP_NAMES[m % SHOP_NAMES.len()].to_string(),
                return_address: format!(
                    "Warehouse {}, {} Depot Avenue, Northgate",
                    m + 1,
                    100 + rng.gen_range(1..9) * 100
                ),
                brands,
                allows_brand_choice: rng.gen_bool(0.7),
                promised_shipping_hours: *super::pick(&mut rng, &[12u32, 24, 36, 48, 72]).unwrap(),
                max_compensation_pct: Fraction::from_basis_points(rng.gen_range(3..=15) * 100),
            },
        );

        for p in 0..cfg.products_per_merchant.max(1) {
            let item_id = format!("I{}", data.products.len() + 1);
            let (category, name, fresh) = CATALOG_ITEMS[rng.gen_range(0..CATALOG_ITEMS.len())];
            let image_id = format!("A{}", data.assets.len() + 1);
            data.assets.insert(
                image_id.clone(),
                AssetRef {
                    asset_id: image_id.clone(),
                    modality: AssetModality::Image,
                    description: format!("product detail photo of the {name}"),
                    evidence: BTreeMap::new(),
                    transcript: None,
                },
            );
            let mut asset_refs = vec![image_id];
            // Some products carry a recent live-stream clip.
            if !fresh && rng.gen_bool(0.5) {
                let video_id = format!("A{}", data.assets.len() + 1);
                let fact = LIVESTREAM_FACTS[rng.gen_range(0..LIVESTREAM_FACTS.len())];
                data.assets.insert(
                    video_id.clone(),
                    AssetRef {
                        asset_id: video_id.clone(),
                        modality: AssetModality::Video,
                        description: format!("live-stream clip featuring the {name}"),
                        evidence: BTreeMap::new(),
                        transcript: Some(format!("the {name} {fact}")),
                    },
                );
                asset_refs.push(video_id);
            }
            data.products.insert(
                item_id.clone(),
                ProductRecord {
                    item_id: item_id.clone(),
                    shop_id: shop_id.clone(),
                    name: format!("{name} {}", p + 1),
                    price: Money::from_fen(rng.gen_range(20..=300) * 100 + 90),
                    unit_weight_kg: WeightKg::from_grams(rng.gen_range(2..=50) * 100),
                    category: category.to_string(),
                    is_fresh_perishable: fresh,
                    is_support_7d_back: fresh || rng.gen_bool(0.8),
                    has_shipping_insurance: rng.gen_bool(0.6),
                    asset_refs,
                },
            );
        }
    }

    for u in 0..cfg.users.max(1) {
        let user_id = format!("U{}", u + 1);
        data.users.insert(
            user_id.clone(),
            UserRecord {
                user_id,
                name: USER_NAMES[rng.gen_range(0..USER_NAMES.len())].to_string(),
                level: rng.gen_range(1..=4),
                default_address: ADDRESSES[rng.gen_range(0..ADDRESSES.len())].to_string(),
            },
        );
    }

    let product_ids: Vec<String> = data.products.keys().cloned().collect();
    let user_ids: Vec<String> = data.users.keys().cloned().collect();
    for o in 0..cfg.orders {
        let order_id = format!("O{}", o + 1);
        let stage = STAGES[o % STAGES.len()];
        let item_id = product_ids[rng.gen_range(0..product_ids.len())].clone();
        let product = data.products[&item_id].clone();
        let merchant = &data.merchants[&product.shop_id];
        let user_id = user_ids[rng.gen_range(0..user_ids.len())].clone();
        let quantity = rng.gen_range(1..=3u32);
        let address = data.users[&user_id].default_address.clone();
        let brand = merchant.brands[rng.gen_range(0..merchant.brands.len())].clone();
        let transit = data.brand_tariffs[&brand].transit_hours as i64;

        // Build timelines backwards from the stage anchor, whole hours.
        let hour =
            |days_ago: i64, h: u32| -> Timestamp { now.plus_days(-days_ago).plus_hours(h as i64) };
        let (payment_time, logistics) = match stage {
            Stage::Unshipped => (hour(rng.gen_range(0..2), rng.gen_range(8..20)), None),
            Stage::InTransit => {
                let pickup = hour(rng.gen_range(0..2), rng.gen_range(8..18));
                let payment = pickup.plus_hours(-rng.gen_range(6..36));
                (payment, Some((pickup, LogisticsState::InTransit, None)))
            }
            Stage::DeliveredRecent | Stage::DeliveredOld => {
                let days_ago = if stage == Stage::DeliveredRecent {
                    rng.gen_range(1..=5)
                } else {
                    rng.gen_range(8..=12)
                };
                let delivered = hour(days_ago, rng.gen_range(9..19));
                let pickup = delivered.plus_hours(-transit.min(48));
                let payment = pickup.plus_hours(-rng.gen_range(6..36));
                (
                    payment,
                    Some((pickup, LogisticsState::Delivered, Some(delivered))),
                )
            }
        };

        data.orders.insert(
            order_id.clone(),
            OrderRecord {
                order_id: order_id.clone(),
                user_id: user_id.clone(),
                item_id: item_id.clone(),
                quantity,
                payment_amount: Money::from_fen(product.price.fen() * quantity as i64),
                payment_time,
                receive_address: address.clone(),
                status: OrderStatus::Paid,
                has_shipping_insurance: product.has_shipping_insurance,
                remarks: Vec::new(),
            },
        );
        if let Some((pickup_time, state, delivered_time)) = logistics {
            let logistics_id = format!("L{}", data.logistics.len() + 1);
            data.logistics.insert(
                logistics_id.clone(),
                LogisticsRecord {
                    logistics_id,
                    order_id: order_id.clone(),
                    brand,
                    pickup_time,
                    receive_address: address,
                    state,
                    delivered_time,
                },
            );
        }
        // One candidate complaint photo per order: a claim kind plus
        // whether the photo actually substantiates it. The AC-<order> id
        // convention is how the task sampler finds it.
        let claim = *super::pick(&mut rng, &["missing_items", "damage", "quality"]).unwrap();
        let supports = rng.gen_bool(0.7);
        let asset_id = format!("AC-{order_id}");
        let description = match (claim, supports) {
            ("missing_items", true) => {
                format!(
                    "customer photo: parcel contents with items clearly missing ({})",
                    product.name
                )
            }
            ("damage", true) => format!("customer photo: visibly damaged {}", product.name),
            ("quality", true) => {
                format!(
                    "customer photo: clear quality defect on the {}",
                    product.name
                )
            }
            _ => format!(
                "customer photo: the {} without any visible problem",
                product.name
            ),
        };
        data.assets.insert(
            asset_id.clone(),
            AssetRef {
                asset_id,
                modality: AssetModality::Image,
                description,
                evidence: BTreeMap::from([(claim.to_string(), supports)]),
                transcript: None,
            },
        );
    }

    let product_list: Vec<String> = data.products.keys().cloned().collect();
    for c in 0..cfg.coupons {
        let coupon_id = format!("C{}", c + 1);
        let user_id = user_ids[c % user_ids.len()].clone();
        let category = data.products[&product_list[rng.gen_range(0..product_list.len())]]
            .category
            .clone();
        data.coupons.insert(
            coupon_id.clone(),
            CouponRecord {
                coupon_id,
                user_id,
                level: rng.gen_range(1..=3),
                amount_off: Money::from_yuan(rng.gen_range(5..=30)),
                minimum_purchase: Money::from_yuan(rng.gen_range(3..=15) * 10),
                category_list: vec![category],
            },
        );
    }

    WorldState::new(data).expect("generated world validates")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_world_round_trips_through_load() {
        let world = generate_world(42, &WorldConfig::default());
        let text = serde_json::to_string(&world.data).unwrap();
        let reloaded = WorldState::load_str(&text).unwrap();
        assert_eq!(reloaded.data, world.data);
        assert_eq!(reloaded.version, 0);
    }

    #[test]
    fn same_seed_same_world() {
        let a = generate_world(7, &WorldConfig::default());
        let b = generate_world(7, &WorldConfig::default());
        assert!(a.snapshot().canonical_eq(&b.snapshot()));
        let c = generate_world(8, &WorldConfig::default());
        assert!(!a.snapshot().canonical_eq(&c.snapshot()));
    }

    #[test]
    fn zero_orders_world_is_valid_but_hosts_no_order_tasks() {
        let cfg = WorldConfig {
            orders: 0,
            ..WorldConfig::default()
        };
        let world = generate_world(1, &cfg);
        assert!(world.data.orders.is_empty());
        assert!(world.data.logistics.is_empty());
    }

    #[test]
    fn orders_cover_lifecycle_stages() {
        let world = generate_world(
            3,
            &WorldConfig {
                orders: 8,
                ..WorldConfig::default()
            },
        );
        let states: Vec<Option<LogisticsState>> = world
            .data
            .orders
            .values()
            .map(|o| world.data.logistics_for_order(&o.order_id).map(|l| l.state))
            .collect();
        assert!(states.contains(&None), "an unshipped order exists");
        assert!(states.contains(&Some(LogisticsState::InTransit)));
        assert!(states.contains(&Some(LogisticsState::Delivered)));
    }
}
