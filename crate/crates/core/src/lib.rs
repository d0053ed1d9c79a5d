//! Deterministic e-commerce customer-service environment.
//!
//! The crate bundles everything a tool-calling service agent is evaluated
//! against: the versioned world database, the operator rule catalog and its
//! pure oracle, the 18-tool API, the tagged episode protocol and engine,
//! agent policies with a dynamic rule-filtering module, a synthetic task
//! generator whose answers derive from the oracle, and the dual scoring
//! harness.

pub mod agents;
pub mod episode;
pub mod fixtures;
pub mod forge;
pub mod money;
pub mod oracle;
pub mod pipeline;
pub mod protocol;
pub mod rules;
pub mod score;
pub mod time;
pub mod tools;
pub mod world;

pub use money::{Fraction, Money, WeightKg};
pub use rules::TaskFamily;
pub use time::{system_now, Timestamp};
pub use world::{StateSnapshot, WorldData, WorldState};
