use std::collections::{BTreeSet, VecDeque};

use super::TopologyEnv;
use crate::env::{Action, EnvError, Observation, StepOutcome, FAILURE_REWARD};
use crate::grid::{FailureCause, GridSpec, Topology};

/// An environment that replays prescribed line loadings instead of solving
/// flows. Bus actions change the topology and pop the next entry of
/// `after_action`; do-nothing steps read `passive[t]`.
#[derive(Debug, Clone)]
pub struct ScriptedEnv {
    spec: GridSpec,
    obs: Observation,
    length: usize,
    passive: Vec<Vec<f64>>,
    after_action: VecDeque<Vec<f64>>,
    failures: BTreeSet<usize>,
    done: bool,
    /// Every action stepped, in order.
    pub log: Vec<Action>,
}

impl ScriptedEnv {
    /// `passive[t]` is the loading at timestep `t`, for `t` in `0..=length`.
    pub fn new(spec: GridSpec, length: usize, passive: Vec<Vec<f64>>, after_action: Vec<Vec<f64>>) -> Self {
        assert_eq!(passive.len(), length + 1, "one loading vector per timestep");
        let obs = Observation {
            gen_mw: vec![0.0; spec.generators.len()],
            load_mw: vec![0.0; spec.loads.len()],
            topology: Topology::reference(&spec),
            flow_mw: vec![0.0; spec.n_lines()],
            rho: passive[0].clone(),
            timestep: 0,
        };
        ScriptedEnv {
            spec,
            obs,
            length,
            passive,
            after_action: after_action.into(),
            failures: BTreeSet::new(),
            done: false,
            log: Vec::new(),
        }
    }

    /// Makes the step reaching timestep `t` a network split.
    pub fn fail_at(mut self, t: usize) -> Self {
        self.failures.insert(t);
        self
    }
}

impl TopologyEnv for ScriptedEnv {
    fn spec(&self) -> &GridSpec {
        &self.spec
    }

    fn observation(&self) -> &Observation {
        &self.obs
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn step(&mut self, action: &Action) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::Done);
        }
        let t = self.obs.timestep + 1;
        self.log.push(action.clone());
        let rho = match action {
            Action::DoNothing => self.passive[t].clone(),
            Action::SetBus { substation, config } => {
                self.obs.topology.set_substation_config(&self.spec, *substation, config)?;
                self.after_action.pop_front().unwrap_or_else(|| self.passive[t].clone())
            }
        };
        self.obs.rho = rho;
        self.obs.timestep = t;
        let failure = self.failures.contains(&t).then_some(FailureCause::NetworkSplit);
        self.done = failure.is_some() || t >= self.length;
        let reward = if failure.is_some() { FAILURE_REWARD } else { 1.0 };
        Ok(StepOutcome { observation: self.obs.clone(), reward, done: self.done, failure, step: t })
    }
}
