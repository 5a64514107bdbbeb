//! The episodic bus-switching environment.

mod chronics;
pub mod io;
mod score;

pub use chronics::{
    generate_chronics, window_offsets, Chronic, ChronicProfile, EpisodeSet, Split, Window, CHRONIC_LENGTH,
    STEPS_PER_DAY, WINDOWS_PER_CHRONIC, WINDOW_LENGTH,
};
pub use score::{efficiency_reward, l2rpn_score, COST_EPSILON};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{
    apply_overload_dynamics, build_electrical_graph, check_game_over, solve_dc_power_flow, Bus, Element,
    FailureCause, GridError, GridSpec, OverloadParams, PowerFlowResult, Topology,
};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("served/generation ratio undefined: generation is zero")]
    UndefinedRatio,
    #[error("invalid chronic profile: {0}")]
    Profile(String),
    #[error("invalid chronic: {0}")]
    Chronic(String),
    #[error("initial power flow is infeasible ({0}); grid and chronic are miscalibrated")]
    InfeasibleReset(String),
    #[error("step called on a finished episode")]
    Done,
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("{0}")]
    Format(String),
    #[error("io error on {0}: {1}")]
    Io(String, #[source] std::io::Error),
}

/// Environment settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvParams {
    pub overload: OverloadParams,
    /// Served/generation ratio mapped to zero reward.
    pub r_min: f64,
    /// Loading above which congestion counts as loss.
    pub rho_soft: f64,
    /// Loss in units of served load per unit of squared excess loading.
    pub loss_coef: f64,
}

impl Default for EnvParams {
    fn default() -> Self {
        EnvParams { overload: OverloadParams::default(), r_min: 0.9, rho_soft: 0.95, loss_coef: 1.0 }
    }
}

/// A bus-switching action on one substation, or nothing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Action {
    DoNothing,
    SetBus { substation: usize, config: Vec<Bus> },
}

impl Action {
    /// Validated bus configuration: the first slot sits on bus 1 and no load
    /// or generator is left on a bus without line endpoints.
    pub fn set_bus(spec: &GridSpec, substation: usize, config: Vec<Bus>) -> Result<Action, EnvError> {
        let slots = spec
            .substations
            .get(substation)
            .ok_or_else(|| EnvError::InvalidAction(format!("no substation {substation}")))?;
        if slots.elements.len() != config.len() {
            return Err(EnvError::InvalidAction(format!(
                "substation {substation} has {} elements, configuration has {}",
                slots.elements.len(),
                config.len()
            )));
        }
        if config.first() != Some(&Bus::One) {
            return Err(EnvError::InvalidAction("first element must be on bus 1".into()));
        }
        if !isolation_safe(&slots.elements, &config) {
            return Err(EnvError::InvalidAction(format!(
                "configuration isolates a load or generator at substation {substation}"
            )));
        }
        Ok(Action::SetBus { substation, config })
    }

    pub fn substation(&self) -> Option<usize> {
        match self {
            Action::DoNothing => None,
            Action::SetBus { substation, .. } => Some(*substation),
        }
    }
}

/// True when every bus holding a load or generator also holds a line endpoint.
pub fn isolation_safe(elements: &[Element], config: &[Bus]) -> bool {
    [Bus::One, Bus::Two].into_iter().all(|bus| {
        let on_bus = || elements.iter().zip(config).filter(move |(_, &b)| b == bus).map(|(e, _)| *e);
        !on_bus().any(|e| e.is_injection()) || on_bus().any(|e| e.line().is_some())
    })
}

/// What an agent sees.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub gen_mw: Vec<f64>,
    pub load_mw: Vec<f64>,
    pub topology: Topology,
    pub rho: Vec<f64>,
    pub flow_mw: Vec<f64>,
    /// Steps taken since reset.
    pub timestep: usize,
}

impl Observation {
    /// Bus per element then status per line.
    pub fn topology_vector(&self) -> Vec<i8> {
        self.topology.vector()
    }

    /// Largest loading over in-service lines, 0 when none.
    pub fn max_rho(&self) -> f64 {
        self.rho
            .iter()
            .zip(&self.topology.line_in_service)
            .filter(|(_, &s)| s)
            .map(|(r, _)| *r)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub failure: Option<FailureCause>,
    pub step: usize,
}

/// Reward returned on a failure step.
pub const FAILURE_REWARD: f64 = -1.0;

/// One running episode over a window of a chronic.
#[derive(Debug, Clone)]
pub struct GridEnv {
    spec: Arc<GridSpec>,
    params: EnvParams,
    chronic: Arc<Chronic>,
    offset: usize,
    length: usize,
    obs: Observation,
    done: bool,
    failure: Option<FailureCause>,
}

impl GridEnv {
    /// Starts an episode of `length` steps at `offset` in `chronic`, with
    /// the reference topology.
    pub fn reset(
        spec: Arc<GridSpec>,
        params: EnvParams,
        chronic: Arc<Chronic>,
        offset: usize,
        length: usize,
    ) -> Result<Self, EnvError> {
        if offset + length > chronic.len() {
            return Err(EnvError::Chronic(format!(
                "window {offset}+{length} overruns chronic {} of length {}",
                chronic.id,
                chronic.len()
            )));
        }
        let topo = Topology::reference(&spec);
        let inj = chronic.injections(offset);
        let g = build_electrical_graph(&spec, &topo, &inj);
        let pf = solve_dc_power_flow(&g);
        if let Some(cause) = check_game_over(&g, &pf) {
            return Err(EnvError::InfeasibleReset(cause.to_string()));
        }
        let obs = Observation {
            gen_mw: inj.gen_mw,
            load_mw: inj.load_mw,
            topology: topo,
            rho: pf.rho,
            flow_mw: pf.flow_mw,
            timestep: 0,
        };
        Ok(GridEnv { spec, params, chronic, offset, length, obs, done: false, failure: None })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn spec_arc(&self) -> &Arc<GridSpec> {
        &self.spec
    }

    pub fn params(&self) -> &EnvParams {
        &self.params
    }

    pub fn observation(&self) -> &Observation {
        &self.obs
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn failure(&self) -> Option<FailureCause> {
        self.failure
    }

    pub fn episode_len(&self) -> usize {
        self.length
    }

    /// Current bus configuration of a substation.
    pub fn substation_config(&self, sub: usize) -> Vec<Bus> {
        self.obs.topology.substation_config(&self.spec, sub)
    }

    /// Applies `action`, advances the chronic one step, re-solves the flow,
    /// runs line protection and checks for game over.
    pub fn step(&mut self, action: &Action) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::Done);
        }
        let mut topo = self.obs.topology.clone();
        if let Action::SetBus { substation, config } = action {
            if *substation >= self.spec.n_substations() {
                return Err(EnvError::InvalidAction(format!("no substation {substation}")));
            }
            topo.set_substation_config(&self.spec, *substation, config).map_err(|e| match e {
                GridError::ConfigLength { .. } => EnvError::InvalidAction(e.to_string()),
                other => EnvError::Grid(other),
            })?;
        }

        let t = self.obs.timestep + 1;
        let inj = self.chronic.injections(self.offset + t.min(self.length - 1));
        let g = build_electrical_graph(&self.spec, &topo, &inj);
        let pf = solve_dc_power_flow(&g);
        let next = apply_overload_dynamics(&pf, &topo, &self.params.overload);
        let (g, pf) = if next.line_in_service != topo.line_in_service {
            let g = build_electrical_graph(&self.spec, &next, &inj);
            let pf = solve_dc_power_flow(&g);
            (g, pf)
        } else {
            (g, pf)
        };
        let failure = check_game_over(&g, &pf);
        let reward = match failure {
            Some(_) => FAILURE_REWARD,
            None => self.reward_of(&pf)?,
        };

        self.obs = Observation {
            gen_mw: inj.gen_mw,
            load_mw: inj.load_mw,
            topology: next,
            rho: pf.rho,
            flow_mw: pf.flow_mw,
            timestep: t,
        };
        self.failure = failure;
        self.done = failure.is_some() || t >= self.length;
        Ok(StepOutcome { observation: self.obs.clone(), reward, done: self.done, failure, step: t })
    }

    fn reward_of(&self, pf: &PowerFlowResult) -> Result<f64, EnvError> {
        let excess: f64 = pf.rho.iter().map(|&r| (r - self.params.rho_soft).max(0.0).powi(2)).sum();
        let served = pf.served_load_mw;
        let losses = self.params.loss_coef * served * excess;
        efficiency_reward(served, served + losses, self.params.r_min)
    }
}
