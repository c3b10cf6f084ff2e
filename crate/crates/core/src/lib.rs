//! Single-process federated-learning simulator.
//!
//! Implements FedAvg, FedProx and FedCL (diagonal-Fisher penalty computed on a
//! server-side proxy set), plus "-TE" variants in which the local penalty
//! anchors to a bias-corrected exponential moving average of all past global
//! models instead of only the latest one.

pub mod analysis;
pub mod data;
pub mod error;
pub mod federated;
pub mod nn;
pub mod penalty;
pub mod seed;
pub mod target;

pub use error::{Error, Result};
