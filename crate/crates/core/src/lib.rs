//! Degradation-aware orchestration simulator for mmWave infrastructure-to-vehicle links.

pub mod agents;
pub mod error;
pub mod handover;
pub mod linkmodel;
pub mod memory;
pub mod orchestrator;
pub mod routing;
pub mod scenario;
pub mod seed;
pub mod sensing;

pub use error::{Error, Result};
