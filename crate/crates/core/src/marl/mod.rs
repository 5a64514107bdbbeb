//! Three-level hierarchical control and the multi-agent training strategies.

mod actions;
mod controller;
mod hierarchy;
mod mid;
mod scripted;
mod train;

pub use actions::{controllable_substations, enumerate_actions};
pub use controller::{
    is_identity, run_do_nothing, run_episode, EpisodeSummary, Flow, Hooks, Interaction, TopologyEnv, TraceEvent,
};
pub use hierarchy::{
    capa_order, fixed_order, incident_max_rho, is_unsafe, mid_order, random_order, AgentLayout, AgentSlot,
    HierarchyConfig, MidPolicy, Strategy,
};
pub use scripted::ScriptedEnv;
pub use mid::{dependent_soft_value, dependent_td_residual, MidPolicyEstimate};
pub use train::{
    greedy_action, run_marl_training, sample_action, summarize_trajectory, EvalRow, StepRecord, Evaluator, Learner, TrainSchedule, TrainingOutcome,
    UpdateRow,
};

use thiserror::Error;

use crate::agents::AgentsError;
use crate::env::EnvError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum MarlError {
    #[error("substation {substation} has {elements} elements, need at least 2")]
    TooFewElements { substation: usize, elements: usize },
    #[error("configuration: {0}")]
    Config(String),
    #[error("width mismatch: expected {expected}, got {got}")]
    Width { expected: usize, got: usize },
    #[error("budget: {0}")]
    Budget(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agents(#[from] AgentsError),
    #[error(transparent)]
    Nn(#[from] NnError),
}
