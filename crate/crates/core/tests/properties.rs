//! Property tests for the cross-cutting invariants: canonicalization,
//! write-log replay, oracle bounds, ladder exclusions, protocol round
//! trips, and score monotonicity.

use proptest::prelude::*;

use ecom_core::agents::USER_DONE_ACK;
use ecom_core::episode::{Speaker, Transcript, TranscriptEntry};
use ecom_core::forge::{generate_world, WorldConfig};
use ecom_core::money::{Fraction, Money};
use ecom_core::oracle::{
    estimate_arrival_time, max_red_envelope, resolve_after_sales, user_advance_amount,
    AfterSalesInputs, AfterSalesReason, AfterSalesType, DesiredSolution, Mood, ResolutionKind,
};
use ecom_core::protocol::{parse_agent_output, render_turn, AgentTurn, TurnPayload};
use ecom_core::score::{key_answer_score, FallbackJudge};
use ecom_core::time::system_now;
use ecom_core::tools::ToolCall;
use ecom_core::world::{diff, FieldWrite, LogisticsState, OrderStatus, WorldState};

fn arb_write(
    order_ids: Vec<String>,
    logistics_ids: Vec<String>,
) -> impl Strategy<Value = FieldWrite> {
    let order = proptest::sample::select(order_ids);
    let logistics = proptest::sample::select(logistics_ids);
    prop_oneof![
        (order.clone(), "[a-z ]{1,20}").prop_map(|(order_id, address)| {
            FieldWrite::OrderAddress {
                order_id,
                address: format!("{address} st"),
            }
        }),
        (
            order.clone(),
            proptest::sample::select(OrderStatus::ALL.to_vec())
        )
            .prop_map(|(order_id, status)| FieldWrite::OrderStatus { order_id, status }),
        (order, "[a-z ]{0,30}")
            .prop_map(|(order_id, content)| { FieldWrite::RemarkAppend { order_id, content } }),
        (logistics.clone(), "[a-z ]{1,20}").prop_map(|(logistics_id, address)| {
            FieldWrite::LogisticsAddress {
                logistics_id,
                address: format!("{address} rd"),
            }
        }),
        (
            logistics,
            proptest::sample::select(LogisticsState::ALL.to_vec())
        )
            .prop_map(|(logistics_id, state)| FieldWrite::LogisticsState {
                logistics_id,
                state
            }),
    ]
}

/// A seeded world together with a legal write sequence against it.
fn arb_world_and_writes() -> impl Strategy<Value = (u64, Vec<FieldWrite>)> {
    (0u64..1000).prop_flat_map(|seed| {
        let world = generate_world(seed, &WorldConfig::default());
        let order_ids: Vec<String> = world.data.orders.keys().cloned().collect();
        let logistics_ids: Vec<String> = world.data.logistics.keys().cloned().collect();
        let writes = proptest::collection::vec(arb_write(order_ids, logistics_ids), 0..12);
        (Just(seed), writes)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Canonical bytes are a total, deterministic fingerprint, and the
    /// diff is empty exactly when they agree; replaying the write log
    /// reproduces the final snapshot byte for byte.
    #[test]
    fn canonicalization_diff_and_replay((seed, writes) in arb_world_and_writes()) {
        let world = generate_world(seed, &WorldConfig::default());
        let initial = world.snapshot();
        let mut state = world;
        for write in &writes {
            state.apply(write.clone()).unwrap();
        }
        let fin = state.snapshot();

        // Determinism of the canonical form.
        prop_assert_eq!(fin.canonical_bytes(), fin.clone().canonical_bytes());
        // diff(a,b) empty iff canonical-equal.
        let d = diff(&initial, &fin);
        prop_assert_eq!(d.is_empty(), initial.canonical_eq(&fin));
        // Write-log replay reproduces the final snapshot exactly.
        let replayed = WorldState::replay_writes(&initial, &state.write_log).unwrap();
        prop_assert!(replayed.snapshot().canonical_eq(&fin));
        prop_assert_eq!(replayed.version, writes.len() as u64);
    }

    /// 0 <= advance <= cost, with the insured no-fault case exactly
    /// max(0, cost - 9.00).
    #[test]
    fn advance_amount_bounds(cost_fen in 0i64..100_000, insured in any::<bool>(), fault in any::<bool>(), intercept in any::<bool>()) {
        let cost = Money::from_fen(cost_fen);
        let advance = user_advance_amount(cost, insured, fault, intercept);
        prop_assert!(advance >= Money::ZERO && advance <= cost);
        if insured && !fault && !intercept {
            prop_assert_eq!(advance.fen(), (cost_fen - 900).max(0));
        }
        if fault || intercept {
            prop_assert!(advance.is_zero());
        }
    }

    /// Red envelopes are at least 1 RMB and never exceed the payment for
    /// pct <= 1 and payment >= 1 RMB.
    #[test]
    fn red_envelope_bounds(payment_fen in 100i64..10_000_000, bp in 0u32..=10_000) {
        let cap = max_red_envelope(Money::from_fen(payment_fen), Fraction::from_basis_points(bp));
        prop_assert!(cap >= Money::from_yuan(1));
        prop_assert!(cap.fen() <= payment_fen.max(100));
    }

    /// The unspecified-brand arrival estimate uses the longest transit, so
    /// it dominates every per-brand estimate.
    #[test]
    fn longest_transit_dominates(seed in 0u64..500) {
        let world = generate_world(seed, &WorldConfig::default());
        for order in world.data.orders.values() {
            if world.data.logistics_for_order(&order.order_id).is_some() {
                continue;
            }
            let product = &world.data.products[&order.item_id];
            let merchant = &world.data.merchants[&product.shop_id];
            if !merchant.allows_brand_choice {
                continue;
            }
            let unspecified = estimate_arrival_time(
                Some(order), None, merchant, &world.data.brand_tariffs, None, system_now(),
            ).unwrap();
            for brand in &merchant.brands {
                let specified = estimate_arrival_time(
                    Some(order), None, merchant, &world.data.brand_tariffs, Some(brand), system_now(),
                ).unwrap();
                prop_assert!(unspecified >= specified, "brand {} beats the longest-transit estimate", brand);
            }
        }
    }

    /// Personal-reason ladders never contain reshipment, red envelopes, or
    /// refund-only, over random worlds and orders.
    #[test]
    fn personal_ladders_exclude_forbidden_remedies(seed in 0u64..500, used in any::<bool>()) {
        let world = generate_world(seed, &WorldConfig::default());
        let theta = AfterSalesType {
            reason: AfterSalesReason::PersonalReason,
            image_verification: false,
            solution: DesiredSolution::ReturnRefund,
            mood: Mood::Calm,
        };
        for order in world.data.orders.values() {
            let product = &world.data.products[&order.item_id];
            let merchant = &world.data.merchants[&product.shop_id];
            let user = &world.data.users[&order.user_id];
            let inputs = AfterSalesInputs {
                product,
                order,
                logistics: world.data.logistics_for_order(&order.order_id),
                merchant,
                user,
                tariffs: &world.data.brand_tariffs,
                evidence_ok: false,
                used,
                now: system_now(),
            };
            let ladder = resolve_after_sales(&theta, &inputs).unwrap();
            for rung in &ladder {
                prop_assert!(!matches!(
                    rung.kind,
                    ResolutionKind::Reship
                        | ResolutionKind::RedEnvelope { .. }
                        | ResolutionKind::RefundOnly
                ), "forbidden rung in a personal-reason ladder: {:?}", rung.kind);
            }
        }
    }

    /// The tag grammar round-trips: parse(render(turn)) == turn for any
    /// payload free of tag tokens.
    #[test]
    fn protocol_round_trip(thought in "[a-zA-Z0-9 .,!?]{0,60}", text in "[a-zA-Z0-9 .,!?]{0,60}", is_final in any::<bool>(), arg in "[a-zA-Z0-9]{0,12}") {
        let turn = if is_final {
            AgentTurn { thought, payload: TurnPayload::FinalAnswer { text } }
        } else {
            AgentTurn {
                thought,
                payload: TurnPayload::Call {
                    call: ToolCall::new("get_order_detail", &[("order_id", serde_json::json!(arg))]),
                },
            }
        };
        let parsed = parse_agent_output(&render_turn(&turn)).unwrap();
        prop_assert_eq!(parsed, turn);
    }

    /// Key-answer monotonicity: removing a key can only raise or preserve
    /// the score; adding one can only lower or preserve it.
    #[test]
    fn key_answer_monotonicity(keys in proptest::collection::vec("[a-z]{2,8} [0-9]{1,3}\\.[0-9]", 1..5), extra in "[a-z]{2,8} [0-9]{1,3}\\.[0-9]", hit in any::<prop::sample::Index>()) {
        // Build a transcript that states a subset of the keys.
        let stated = hit.index(keys.len() + 1);
        let entries: Vec<TranscriptEntry> = keys
            .iter()
            .take(stated)
            .map(|k| TranscriptEntry {
                speaker: Speaker::Assistant,
                text: format!("Regarding your question: {k}. {USER_DONE_ACK}"),
                asset_markers: Vec::new(),
            })
            .collect();
        let transcript = Transcript { entries };
        let judge = FallbackJudge::new(Vec::<String>::new());

        let (full, _) = key_answer_score(&transcript, &keys, &judge);
        // Removing any key never lowers the score.
        for i in 0..keys.len() {
            let mut fewer = keys.clone();
            fewer.remove(i);
            let (reduced, _) = key_answer_score(&transcript, &fewer, &judge);
            prop_assert!(reduced || !full, "removing a key lowered the score");
        }
        // Adding a key never raises it.
        let mut more = keys.clone();
        more.push(extra);
        let (extended, _) = key_answer_score(&transcript, &more, &judge);
        prop_assert!(full || !extended, "adding a key raised the score");
    }
}
