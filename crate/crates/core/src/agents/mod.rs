//! Single-agent learners: discrete soft actor-critic and PPO over graph
//! networks, plus their buffers and hyperparameter presets.

mod buffer;
mod hyper;
mod metrics;
mod ppo;
mod sacd;

pub use buffer::{
    compute_gae, gae_from_residuals, gae_with_targets, normalize, td_residuals, Gae, ReplayBuffer, RolloutBuffer,
    Transition,
};
pub use hyper::{Algorithm, HyperParams};
pub use metrics::MetricsWriter;
pub use ppo::{
    policy_entropy, ppo_actor_logits, ppo_clip_objective, ppo_combined_loss, ppo_critic_values, ppo_value_loss,
    PpoAgent, PpoMetrics, PPO_BLOCKS,
};
pub use sacd::*;

use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum AgentsError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("width mismatch: expected {expected}, got {got}")]
    Width { expected: usize, got: usize },
    #[error("rollout: {0}")]
    Rollout(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("metrics: {0}")]
    Metrics(String),
}
