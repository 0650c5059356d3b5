//! Simulation laboratory for quantum-enhanced reinforcement learning in
//! deterministic gridworld environments.

pub mod agents;
pub mod env;
pub mod error;
pub mod harness;
pub mod hybrid;
pub mod interaction;
pub mod metalearn;
pub mod quantum;
pub mod seed;

pub use error::{Error, Result};
