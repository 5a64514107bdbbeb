//! Experiment orchestration: configuration, per-seed training runs, baseline
//! caching, evaluation, scoring and plot-ready reports.
//!
//! Exit codes of the command-line front end:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | every requested seed completed |
//! | 2 | usage error (bad flag or argument) |
//! | 3 | invalid config, grid file or checkpoint |
//! | 4 | missing or unreadable file |
//! | 5 | seed list or budget inconsistent |
//! | 6 | do-nothing baseline cache missing or stale |
//! | 7 | no trajectories to score |
//! | 8 | runtime failure during training or evaluation |
//! | 9 | seed logs misaligned |

mod cli;
mod config;
mod report;
mod run;

use std::path::Path;

use thiserror::Error;

pub use cli::{main_with_args, Cli, Command};
pub use config::{AlgoSection, EnvSection, ExperimentConfig, ProfileName, RunSection, OUTPUT_ENV};
pub use report::{
    aggregate_report, write_curve_csv, write_score_log, Aggregate, RunReport, SeedCurve, SeedTiming,
};
pub use run::{
    baseline_path, build_baseline, evaluate_checkpoints, load_baseline, load_chronics, load_grid, read_trajectory,
    score_trajectories, train, write_trajectory, BaselineCache, EvalReport,
};

use crate::env::EnvError;
use crate::grid::GridError;
use crate::marl::MarlError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("seed/budget: {0}")]
    SeedBudget(String),
    #[error("baseline: {0}")]
    MissingBaseline(String),
    #[error("no trajectories: {0}")]
    EmptyTrajectories(String),
    #[error("{0}")]
    Runtime(String),
    #[error("misaligned seed logs: {0}")]
    Misaligned(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 2,
            HarnessError::Config(_) => 3,
            HarnessError::Io(_) => 4,
            HarnessError::SeedBudget(_) => 5,
            HarnessError::MissingBaseline(_) => 6,
            HarnessError::EmptyTrajectories(_) => 7,
            HarnessError::Runtime(_) => 8,
            HarnessError::Misaligned(_) => 9,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        HarnessError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<GridError> for HarnessError {
    fn from(e: GridError) -> Self {
        match e {
            GridError::Io(..) => HarnessError::Io(e.to_string()),
            _ => HarnessError::Config(e.to_string()),
        }
    }
}

impl From<EnvError> for HarnessError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::Io(..) => HarnessError::Io(e.to_string()),
            EnvError::Grid(g) => g.into(),
            EnvError::Format(_) | EnvError::Profile(_) | EnvError::Chronic(_) => HarnessError::Config(e.to_string()),
            _ => HarnessError::Runtime(e.to_string()),
        }
    }
}

impl From<NnError> for HarnessError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Io(..) => HarnessError::Io(e.to_string()),
            NnError::Checkpoint(_) | NnError::Structure(_) => HarnessError::Config(e.to_string()),
            _ => HarnessError::Runtime(e.to_string()),
        }
    }
}

impl From<MarlError> for HarnessError {
    fn from(e: MarlError) -> Self {
        match e {
            MarlError::Env(e) => e.into(),
            MarlError::Nn(e) => e.into(),
            MarlError::Config(_) => HarnessError::Config(e.to_string()),
            _ => HarnessError::Runtime(e.to_string()),
        }
    }
}
