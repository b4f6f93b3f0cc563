//! Decentralized failure diagnosis for stochastic discrete-event systems.

pub mod automaton;
pub mod codiagnoser;
pub mod dot;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod model_file;
pub mod observer;
pub mod report;
pub mod stochastic;
pub mod verifier;

pub use error::{Error, Result};
