//! Two bundled seven-state models used throughout the tests and the CLI docs.
//!
//! `split_detection`: a failure after `d` is only visible to site 2 (via
//! `c`), a failure without `d` only to site 1 (via `b`). Neither site alone
//! diagnoses the system; together they do.
//!
//! `shared_blind_spot`: the `d f a c a…` branch looks normal to both sites,
//! so the system is not codiagnosable.

use crate::automaton::StochasticAutomaton;
use crate::model_file::parse_model;

pub const SPLIT_DETECTION: &str = include_str!("../models/split_detection.sdes");
pub const SHARED_BLIND_SPOT: &str = include_str!("../models/shared_blind_spot.sdes");

pub fn split_detection() -> StochasticAutomaton {
    parse_model(SPLIT_DETECTION).expect("bundled model parses")
}

pub fn shared_blind_spot() -> StochasticAutomaton {
    parse_model(SHARED_BLIND_SPOT).expect("bundled model parses")
}
