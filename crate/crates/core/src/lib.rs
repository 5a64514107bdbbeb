//! Hierarchical multi-agent reinforcement learning for power-grid topology
//! control.
//!
//! The crate is split along the layers of the system:
//!
//! - [`grid`]: static grid description, bus assignments, DC power flow and
//!   the overload/disconnection rules.
//! - [`env`]: the episodic environment built on top of the grid, synthetic
//!   chronics, the efficiency reward and the rescaled evaluation score.
//! - [`nn`]: a small reverse-mode autodiff kernel with graph attention
//!   blocks, Adam and checkpoints.
//! - [`agents`]: discrete soft actor-critic and PPO losses, buffers and
//!   update cycles.
//! - [`marl`]: the three-level controller (safety gate, mid-level ordering,
//!   substation agents) and the independent/dependent training strategies.
//! - [`harness`]: configuration, experiment orchestration and the CLI.

pub mod agents;
pub mod env;
pub mod grid;
pub mod harness;
pub mod marl;
pub mod nn;
pub mod rng;

pub use grid::{GridSpec, Topology};
