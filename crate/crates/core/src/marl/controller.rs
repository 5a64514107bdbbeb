use rand::Rng;

use super::{is_unsafe, mid_order, AgentLayout, HierarchyConfig, MarlError};
use crate::env::{Action, EnvError, GridEnv, Observation, StepOutcome};
use crate::grid::GridSpec;

/// What the controller needs from an environment.
pub trait TopologyEnv {
    fn spec(&self) -> &GridSpec;
    fn observation(&self) -> &Observation;
    fn is_done(&self) -> bool;
    fn step(&mut self, action: &Action) -> Result<StepOutcome, EnvError>;
}

impl TopologyEnv for GridEnv {
    fn spec(&self) -> &GridSpec {
        GridEnv::spec(self)
    }

    fn observation(&self) -> &Observation {
        GridEnv::observation(self)
    }

    fn is_done(&self) -> bool {
        GridEnv::is_done(self)
    }

    fn step(&mut self, action: &Action) -> Result<StepOutcome, EnvError> {
        GridEnv::step(self, action)
    }
}

/// One counted low-level interaction.
#[derive(Debug)]
pub struct Interaction<'a> {
    pub agent: usize,
    pub action: usize,
    pub before: &'a Observation,
    pub outcome: &'a StepOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// Callbacks into whoever owns the low-level agents.
pub trait Hooks {
    /// Index into the agent's action list.
    fn choose(&mut self, agent: usize, obs: &Observation) -> Result<usize, MarlError>;

    fn on_interaction(&mut self, _interaction: &Interaction<'_>) -> Result<Flow, MarlError> {
        Ok(Flow::Continue)
    }

    /// Steps taken without a counted interaction.
    fn on_passive_step(&mut self, _outcome: &StepOutcome) -> Result<(), MarlError> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    /// Top-level decision at observation `step`.
    Gate { step: usize, unsafe_grid: bool },
    Order(Vec<usize>),
    /// Identity action, no env step.
    Skip { agent: usize, action: usize },
    /// Counted interaction number `count` within the episode.
    Act { agent: usize, action: usize, count: usize },
    /// The sequence ended without an env step; do-nothing was played.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpisodeSummary {
    /// Steps completed without failure.
    pub survived: usize,
    /// `Σ (1 − r_t)` over survived steps.
    pub cost: f64,
    pub failed: bool,
    pub interactions: usize,
    pub env_steps: usize,
    /// A hook asked to stop before the episode ended.
    pub stopped: bool,
}

impl EpisodeSummary {
    fn new() -> Self {
        EpisodeSummary { survived: 0, cost: 0.0, failed: false, interactions: 0, env_steps: 0, stopped: false }
    }

    fn record(&mut self, out: &StepOutcome) {
        self.env_steps += 1;
        if out.failure.is_some() {
            self.failed = true;
        } else {
            self.survived += 1;
            self.cost += 1.0 - out.reward;
        }
    }
}

/// True when `action` would leave the topology unchanged.
pub fn is_identity(spec: &GridSpec, obs: &Observation, action: &Action) -> bool {
    match action {
        Action::DoNothing => false,
        Action::SetBus { substation, config } => obs.topology.substation_config(spec, *substation) == *config,
    }
}

/// Plays one episode under the three-level hierarchy.
///
/// While the grid is safe the top level plays do-nothing. When it is unsafe
/// the mid level orders the agents and each in turn picks an action;
/// identity actions are skipped, everything else is one env step and one
/// counted interaction.
pub fn run_episode<E: TopologyEnv, H: Hooks, R: Rng>(
    env: &mut E,
    layout: &AgentLayout,
    cfg: &HierarchyConfig,
    hooks: &mut H,
    order_rng: &mut R,
    mut trace: Option<&mut Vec<TraceEvent>>,
) -> Result<EpisodeSummary, MarlError> {
    let mut summary = EpisodeSummary::new();
    let emit = |trace: &mut Option<&mut Vec<TraceEvent>>, e: TraceEvent| {
        if let Some(t) = trace.as_deref_mut() {
            t.push(e);
        }
    };
    while !env.is_done() {
        let unsafe_grid = is_unsafe(env.observation(), cfg.rho_thresh);
        emit(&mut trace, TraceEvent::Gate { step: env.observation().timestep, unsafe_grid });
        if !unsafe_grid {
            let out = env.step(&Action::DoNothing)?;
            summary.record(&out);
            hooks.on_passive_step(&out)?;
            continue;
        }

        let mut order = mid_order(cfg.mid_policy, env.spec(), env.observation(), layout, order_rng);
        emit(&mut trace, TraceEvent::Order(order.clone()));
        let mut acted = vec![false; layout.len()];
        let mut stepped = false;
        let mut pos = 0;
        while pos < order.len() {
            let agent = order[pos];
            pos += 1;
            acted[agent] = true;
            let before = env.observation().clone();
            let action = hooks.choose(agent, &before)?;
            let act = layout.agents[agent]
                .actions
                .get(action)
                .ok_or_else(|| MarlError::Config(format!("agent {agent} has no action {action}")))?;
            if is_identity(env.spec(), &before, act) {
                emit(&mut trace, TraceEvent::Skip { agent, action });
                continue;
            }
            let out = env.step(act)?;
            stepped = true;
            summary.record(&out);
            summary.interactions += 1;
            emit(&mut trace, TraceEvent::Act { agent, action, count: summary.interactions });
            let flow = hooks.on_interaction(&Interaction { agent, action, before: &before, outcome: &out })?;
            if flow == Flow::Stop {
                summary.stopped = true;
                return Ok(summary);
            }
            if out.done || (cfg.early_exit && !is_unsafe(env.observation(), cfg.rho_thresh)) {
                break;
            }
            if cfg.recompute_order {
                let rest = mid_order(cfg.mid_policy, env.spec(), env.observation(), layout, order_rng);
                order = order[..pos].iter().copied().chain(rest.into_iter().filter(|a| !acted[*a])).collect();
            }
        }
        if !stepped && !env.is_done() {
            emit(&mut trace, TraceEvent::Fallback);
            let out = env.step(&Action::DoNothing)?;
            summary.record(&out);
            hooks.on_passive_step(&out)?;
        }
    }
    Ok(summary)
}

/// Do-nothing for a whole episode.
pub fn run_do_nothing<E: TopologyEnv>(env: &mut E) -> Result<EpisodeSummary, MarlError> {
    let mut summary = EpisodeSummary::new();
    while !env.is_done() {
        let out = env.step(&Action::DoNothing)?;
        summary.record(&out);
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::case5;
    use crate::marl::ScriptedEnv;
    use crate::rng::{stream, Stream};
    use std::collections::VecDeque;

    struct Script {
        choices: VecDeque<usize>,
        stop_after: Option<usize>,
        seen: usize,
    }

    impl Hooks for Script {
        fn choose(&mut self, _agent: usize, _obs: &Observation) -> Result<usize, MarlError> {
            Ok(self.choices.pop_front().expect("scripted choice"))
        }

        fn on_interaction(&mut self, _i: &Interaction<'_>) -> Result<Flow, MarlError> {
            self.seen += 1;
            Ok(if Some(self.seen) == self.stop_after { Flow::Stop } else { Flow::Continue })
        }
    }

    fn flat(v: f64) -> Vec<f64> {
        vec![v; 8]
    }

    fn run(env: &mut ScriptedEnv, choices: &[usize], stop_after: Option<usize>) -> (EpisodeSummary, Vec<TraceEvent>) {
        let layout = AgentLayout::multi(&case5(), 3).unwrap();
        let mut hooks = Script { choices: choices.iter().copied().collect(), stop_after, seen: 0 };
        let mut trace = Vec::new();
        let s = run_episode(env, &layout, &HierarchyConfig::default(), &mut hooks, &mut stream(0, Stream::MidPolicy), Some(&mut trace))
            .unwrap();
        (s, trace)
    }

    #[test]
    fn calm_episode_has_no_interactions() {
        let mut env = ScriptedEnv::new(case5(), 5, vec![flat(0.5); 6], vec![]);
        let (s, trace) = run(&mut env, &[], None);
        assert_eq!((s.interactions, s.env_steps, s.survived), (0, 5, 5));
        assert!(env.log.iter().all(|a| *a == Action::DoNothing));
        assert_eq!(trace.len(), 5);
    }

    #[test]
    fn first_agent_resolves_one_unsafe_step() {
        let mut passive = vec![flat(0.5); 4];
        passive[1][7] = 0.97;
        let mut env = ScriptedEnv::new(case5(), 3, passive, vec![flat(0.4)]);
        let (s, trace) = run(&mut env, &[1], None);
        assert_eq!(s.interactions, 1);
        assert_eq!(trace[2], TraceEvent::Order(vec![2, 0, 1]));
        assert_eq!(trace[3], TraceEvent::Act { agent: 2, action: 1, count: 1 });
    }

    #[test]
    fn all_identity_choices_fall_back_to_do_nothing() {
        let mut passive = vec![flat(0.5); 3];
        passive[0] = flat(0.99);
        let mut env = ScriptedEnv::new(case5(), 2, passive, vec![]);
        let (s, trace) = run(&mut env, &[0, 0, 0], None);
        assert_eq!(s.interactions, 0);
        assert_eq!(env.log[0], Action::DoNothing);
        assert!(trace.contains(&TraceEvent::Fallback));
        assert_eq!(trace.iter().filter(|e| matches!(e, TraceEvent::Skip { .. })).count(), 3);
    }

    #[test]
    fn failure_on_agent_step_ends_the_episode() {
        let mut env = ScriptedEnv::new(case5(), 4, vec![flat(0.99); 5], vec![]).fail_at(1);
        let (s, _) = run(&mut env, &[3], None);
        assert!(s.failed);
        assert_eq!((s.survived, s.interactions, s.env_steps), (0, 1, 1));
    }

    #[test]
    fn hooks_can_stop_mid_episode() {
        let mut env = ScriptedEnv::new(case5(), 6, vec![flat(0.99); 7], vec![]);
        let (s, _) = run(&mut env, &[1, 2, 3, 4, 5], Some(2));
        assert!(s.stopped);
        assert_eq!(s.interactions, 2);
    }
}
