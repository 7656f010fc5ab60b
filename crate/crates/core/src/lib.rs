//! Two-agent cooperative navigation laboratory.
//!
//! Two independent DQN agents share a 5x5 grid, each seeing only its own
//! position and the treasure. A four-symbol channel carries one token per
//! agent per timestep, driven either by a trainable Q-head (emergent
//! condition) or by a fixed quadrant rule (symbolic condition). The
//! [`harness`] runs seeded experiments for both conditions and writes logs,
//! summaries and plot series; [`analysis`] recomputes every metric from the
//! logs alone.

pub mod analysis;
pub mod error;
pub mod gridworld;
pub mod harness;
pub mod neural;
pub mod par;
pub mod protocol;
pub mod stats;
pub mod training;

pub use error::{Error, Result};
pub use gridworld::{Agent, EnvState, GridPos, GridWorld, MoveAction, Observation};
pub use protocol::{Condition, Symbol};
