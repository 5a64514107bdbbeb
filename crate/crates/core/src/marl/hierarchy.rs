use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{controllable_substations, enumerate_actions, MarlError};
use crate::agents::{Algorithm, HyperParams};
use crate::env::{Action, Observation};
use crate::grid::GridSpec;

/// Ordering rule of the mid level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MidPolicy {
    Capa,
    Fixed,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Isacd,
    Ippo,
    Dsacd,
    Dppo,
    /// One SACD agent over the union of all substation actions.
    Sacd,
    /// One PPO agent over the union of all substation actions.
    Ppo,
}

impl Strategy {
    pub const ALL: [Strategy; 6] =
        [Strategy::Isacd, Strategy::Ippo, Strategy::Dsacd, Strategy::Dppo, Strategy::Sacd, Strategy::Ppo];

    pub fn algorithm(self) -> Algorithm {
        match self {
            Strategy::Isacd | Strategy::Dsacd | Strategy::Sacd => Algorithm::Sacd,
            Strategy::Ippo | Strategy::Dppo | Strategy::Ppo => Algorithm::Ppo,
        }
    }

    /// Uses `π̂`-weighted value targets.
    pub fn is_dependent(self) -> bool {
        matches!(self, Strategy::Dsacd | Strategy::Dppo)
    }

    pub fn is_single_agent(self) -> bool {
        matches!(self, Strategy::Sacd | Strategy::Ppo)
    }

    /// Hyperparameter column for this strategy.
    pub fn default_hyper(self) -> HyperParams {
        match self {
            Strategy::Isacd | Strategy::Dsacd => HyperParams::masacd(),
            Strategy::Ippo | Strategy::Dppo => HyperParams::mappo(),
            Strategy::Sacd => HyperParams::sacd(),
            Strategy::Ppo => HyperParams::ppo(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Isacd => "isacd",
            Strategy::Ippo => "ippo",
            Strategy::Dsacd => "dsacd",
            Strategy::Dppo => "dppo",
            Strategy::Sacd => "sacd",
            Strategy::Ppo => "ppo",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = MarlError;

    fn from_str(s: &str) -> Result<Self, MarlError> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| MarlError::Config(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HierarchyConfig {
    /// Top-level gate: act when some line loading exceeds this.
    pub rho_thresh: f64,
    pub mid_policy: MidPolicy,
    /// Substations with more elements than this get an agent.
    pub min_substation_size: usize,
    /// Leave the activation sequence as soon as the grid is safe again.
    pub early_exit: bool,
    /// Recompute the mid-level order after every low-level action.
    pub recompute_order: bool,
    /// Laplace prior on the `π̂` counts.
    pub mid_prior: f64,
    /// Pin `π̂` to the identity (dependent strategies then reduce to
    /// independent ones).
    pub identity_mid_policy: bool,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig {
            rho_thresh: 0.95,
            mid_policy: MidPolicy::Capa,
            min_substation_size: 3,
            early_exit: true,
            recompute_order: false,
            mid_prior: 1.0,
            identity_mid_policy: false,
        }
    }
}

impl HierarchyConfig {
    pub fn validate(&self) -> Result<(), MarlError> {
        if !(self.rho_thresh > 0.0 && self.rho_thresh <= 1.0) {
            return Err(MarlError::Config("rho_thresh must be in (0, 1]".into()));
        }
        if !(self.mid_prior >= 0.0) {
            return Err(MarlError::Config("mid_prior must be nonnegative".into()));
        }
        Ok(())
    }
}

/// `max_ℓ ρ_ℓ > ρ_thresh` over in-service lines.
pub fn is_unsafe(obs: &Observation, rho_thresh: f64) -> bool {
    obs.max_rho() > rho_thresh
}

/// One low-level agent: its substation (none for the single-agent
/// baseline) and its fixed action list.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSlot {
    pub substation: Option<usize>,
    pub size: usize,
    pub actions: Vec<Action>,
}

/// The low-level agents of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentLayout {
    pub agents: Vec<AgentSlot>,
}

impl AgentLayout {
    /// One agent per substation with more than `min_size` elements.
    pub fn multi(spec: &GridSpec, min_size: usize) -> Result<Self, MarlError> {
        let subs = controllable_substations(spec, min_size);
        if subs.is_empty() {
            return Err(MarlError::Config(format!("no substation has more than {min_size} elements")));
        }
        let agents = subs
            .into_iter()
            .map(|s| {
                Ok(AgentSlot { substation: Some(s), size: spec.substation_size(s), actions: enumerate_actions(spec, s)? })
            })
            .collect::<Result<_, MarlError>>()?;
        Ok(AgentLayout { agents })
    }

    /// One agent acting on any controllable substation, with an explicit
    /// do-nothing as action 0.
    pub fn single(spec: &GridSpec, min_size: usize) -> Result<Self, MarlError> {
        let multi = Self::multi(spec, min_size)?;
        let mut actions = vec![Action::DoNothing];
        let mut size = 0;
        for slot in multi.agents {
            actions.extend(slot.actions);
            size += slot.size;
        }
        Ok(AgentLayout { agents: vec![AgentSlot { substation: None, size, actions }] })
    }

    pub fn for_strategy(spec: &GridSpec, strategy: Strategy, min_size: usize) -> Result<Self, MarlError> {
        if strategy.is_single_agent() {
            Self::single(spec, min_size)
        } else {
            Self::multi(spec, min_size)
        }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }
}

/// Largest loading over in-service lines touching `sub`.
pub fn incident_max_rho(spec: &GridSpec, obs: &Observation, sub: usize) -> f64 {
    spec.lines
        .iter()
        .enumerate()
        .filter(|(l, line)| obs.topology.line_in_service[*l] && (line.from == sub || line.to == sub))
        .map(|(l, _)| obs.rho[l])
        .fold(0.0, f64::max)
}

fn tie_key(layout: &AgentLayout, a: usize) -> usize {
    layout.agents[a].substation.unwrap_or(a)
}

/// Agents by descending incident loading, ties by ascending substation id.
pub fn capa_order(spec: &GridSpec, obs: &Observation, layout: &AgentLayout) -> Vec<usize> {
    let key: Vec<f64> = layout
        .agents
        .iter()
        .map(|a| match a.substation {
            Some(s) => incident_max_rho(spec, obs, s),
            None => obs.max_rho(),
        })
        .collect();
    let mut order: Vec<usize> = (0..layout.len()).collect();
    order.sort_by(|&a, &b| key[b].total_cmp(&key[a]).then(tie_key(layout, a).cmp(&tie_key(layout, b))));
    order
}

/// Agents by descending substation size, ties by ascending substation id.
pub fn fixed_order(layout: &AgentLayout) -> Vec<usize> {
    let mut order: Vec<usize> = (0..layout.len()).collect();
    order.sort_by(|&a, &b| {
        layout.agents[b].size.cmp(&layout.agents[a].size).then(tie_key(layout, a).cmp(&tie_key(layout, b)))
    });
    order
}

/// Uniform random permutation of the agents.
pub fn random_order<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

/// Order produced by the configured mid-level policy.
pub fn mid_order<R: Rng>(
    policy: MidPolicy,
    spec: &GridSpec,
    obs: &Observation,
    layout: &AgentLayout,
    rng: &mut R,
) -> Vec<usize> {
    match policy {
        MidPolicy::Capa => capa_order(spec, obs, layout),
        MidPolicy::Fixed => fixed_order(layout),
        MidPolicy::Random => random_order(layout.len(), rng),
    }
}
