use std::rc::Rc;
use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    dependent_soft_value, run_do_nothing, run_episode, AgentLayout, EpisodeSummary, Flow, HierarchyConfig, Hooks,
    Interaction, MarlError, MidPolicyEstimate, Strategy,
};
use crate::agents::{
    compute_gae, Algorithm, HyperParams, PpoAgent, ReplayBuffer, RolloutBuffer, SacdAgent, Transition,
};
use crate::env::{l2rpn_score, Chronic, EnvParams, EpisodeSet, GridEnv, Observation, Split, StepOutcome};
use crate::grid::GridSpec;
use crate::nn::{encode_observation, feature_width, Checkpoint, GraphBatch, ENCODING_VERSION};
use crate::rng::{indexed_stream, stream, RunRng, Stream};

/// Interaction budget and evaluation cadence of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSchedule {
    pub budget: usize,
    pub eval_period: usize,
    /// Guard against chronics that never trigger the gate.
    pub max_episodes: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule { budget: 10_000, eval_period: 100, max_episodes: 100_000 }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<(), MarlError> {
        if self.budget == 0 || self.eval_period == 0 {
            return Err(MarlError::Config("budget and eval_period must be positive".into()));
        }
        if !self.budget.is_multiple_of(self.eval_period) {
            return Err(MarlError::Config("eval_period must divide the budget".into()));
        }
        Ok(())
    }
}

/// A low-level learner of either family.
#[derive(Debug, Clone)]
pub enum Learner {
    Sacd(SacdAgent),
    Ppo(PpoAgent),
}

impl Learner {
    pub fn new<R: Rng>(in_width: usize, n_actions: usize, hp: &HyperParams, rng: &mut R) -> Result<Self, MarlError> {
        Ok(match hp.algorithm {
            Algorithm::Sacd => Learner::Sacd(SacdAgent::new(in_width, n_actions, hp, rng)?),
            Algorithm::Ppo => Learner::Ppo(PpoAgent::new(in_width, n_actions, hp, rng)?),
        })
    }

    pub fn policy(&self, g: &GraphBatch) -> Result<Array2<f64>, MarlError> {
        Ok(match self {
            Learner::Sacd(a) => a.policy(g)?,
            Learner::Ppo(a) => a.policy(g)?,
        })
    }

    pub fn hyper(&self) -> &HyperParams {
        match self {
            Learner::Sacd(a) => &a.hp,
            Learner::Ppo(a) => &a.hp,
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            Learner::Sacd(a) => a.n_actions,
            Learner::Ppo(a) => a.n_actions,
        }
    }

    /// Checkpoint with the hyperparameters and shapes needed to restore.
    pub fn checkpoint(&self, mut manifest: serde_json::Value, in_width: usize) -> Checkpoint {
        if let Some(obj) = manifest.as_object_mut() {
            obj.insert("hyper".into(), serde_json::to_value(self.hyper()).expect("serializable"));
            obj.insert("n_actions".into(), self.n_actions().into());
            obj.insert("in_width".into(), in_width.into());
            obj.insert("encoding_version".into(), ENCODING_VERSION.into());
        }
        match self {
            Learner::Sacd(a) => {
                Checkpoint::from_sets(manifest, &[("online", &a.params), ("target", &a.target), ("temperature", &a.log_alpha)])
            }
            Learner::Ppo(a) => Checkpoint::from_sets(manifest, &[("online", &a.params)]),
        }
    }

    pub fn restore(ck: &Checkpoint) -> Result<Self, MarlError> {
        let field = |k: &str| ck.manifest.get(k).ok_or_else(|| MarlError::Config(format!("checkpoint lacks `{k}`")));
        let hp: HyperParams = serde_json::from_value(field("hyper")?.clone())
            .map_err(|e| MarlError::Config(format!("checkpoint hyperparameters: {e}")))?;
        let n_actions = field("n_actions")?.as_u64().ok_or_else(|| MarlError::Config("bad n_actions".into()))? as usize;
        let in_width = field("in_width")?.as_u64().ok_or_else(|| MarlError::Config("bad in_width".into()))? as usize;
        let mut learner = Learner::new(in_width, n_actions, &hp, &mut stream(0, Stream::Init))?;
        let replace = |fresh: &crate::nn::ParameterSet, stored: crate::nn::ParameterSet| {
            fresh.check_covers(&stored)?;
            stored.check_covers(fresh)?;
            Ok::<_, MarlError>(stored)
        };
        match &mut learner {
            Learner::Sacd(a) => {
                a.params = replace(&a.params, ck.parameter_set("online")?)?;
                a.target = replace(&a.target, ck.parameter_set("target")?)?;
                a.log_alpha = replace(&a.log_alpha, ck.parameter_set("temperature")?)?;
            }
            Learner::Ppo(a) => a.params = replace(&a.params, ck.parameter_set("online")?)?,
        }
        Ok(learner)
    }
}

/// Index of the largest probability, lowest index on ties.
pub fn greedy_action(probs: &[f64]) -> usize {
    let mut best = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = k;
        }
    }
    best
}

/// Inverse-CDF draw from `probs`.
pub fn sample_action<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last = k;
            acc += p;
            if u < acc {
                return k;
            }
        }
    }
    last
}

/// Scores policies on the evaluation sub-episodes against a cached
/// do-nothing baseline.
#[derive(Debug, Clone)]
pub struct Evaluator {
    spec: Arc<GridSpec>,
    params: EnvParams,
    episodes: Vec<(Arc<Chronic>, usize)>,
    length: usize,
    pub baseline: Vec<EpisodeSummary>,
}

impl Evaluator {
    /// Runs the baseline on every window of `split`.
    pub fn new(spec: Arc<GridSpec>, params: EnvParams, set: &EpisodeSet, split: Split) -> Result<Self, MarlError> {
        let mut ev = Self::without_baseline(spec, params, set, split)?;
        ev.baseline = (0..ev.len()).map(|k| run_do_nothing(&mut ev.reset(k)?)).collect::<Result<_, _>>()?;
        Ok(ev)
    }

    /// Uses a stored baseline, one summary per window of `split`.
    pub fn with_baseline(
        spec: Arc<GridSpec>,
        params: EnvParams,
        set: &EpisodeSet,
        split: Split,
        baseline: Vec<EpisodeSummary>,
    ) -> Result<Self, MarlError> {
        let mut ev = Self::without_baseline(spec, params, set, split)?;
        if baseline.len() != ev.len() {
            return Err(MarlError::Width { expected: ev.len(), got: baseline.len() });
        }
        ev.baseline = baseline;
        Ok(ev)
    }

    fn without_baseline(spec: Arc<GridSpec>, params: EnvParams, set: &EpisodeSet, split: Split) -> Result<Self, MarlError> {
        let episodes: Vec<_> =
            set.windows(split).into_iter().map(|w| (Arc::new(set.chronics[w.chronic].clone()), w.offset)).collect();
        if episodes.is_empty() {
            return Err(MarlError::Config(format!("no {split:?} windows")));
        }
        Ok(Evaluator { spec, params, episodes, length: set.window, baseline: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn episode_len(&self) -> usize {
        self.length
    }

    pub fn reset(&self, k: usize) -> Result<GridEnv, MarlError> {
        let (chronic, offset) = &self.episodes[k];
        Ok(GridEnv::reset(self.spec.clone(), self.params, chronic.clone(), *offset, self.length)?)
    }

    pub fn score_summary(&self, k: usize, s: &EpisodeSummary) -> f64 {
        let b = &self.baseline[k];
        l2rpn_score(s.survived, b.survived, self.length, s.cost, b.cost)
    }

    /// Greedy play of `learners` on every window; one score per window.
    pub fn evaluate<R: Rng>(
        &self,
        learners: &[Learner],
        layout: &AgentLayout,
        cfg: &HierarchyConfig,
        order_rng: &mut R,
    ) -> Result<Vec<f64>, MarlError> {
        (0..self.len())
            .map(|k| {
                let (s, _) = self.play(k, learners, layout, cfg, order_rng, false)?;
                Ok(self.score_summary(k, &s))
            })
            .collect()
    }

    /// Greedy play on window `k`, optionally recording every step.
    pub fn play<R: Rng>(
        &self,
        k: usize,
        learners: &[Learner],
        layout: &AgentLayout,
        cfg: &HierarchyConfig,
        order_rng: &mut R,
        record: bool,
    ) -> Result<(EpisodeSummary, Vec<StepRecord>), MarlError> {
        let mut hooks = GreedyHooks { spec: &self.spec, learners, record, steps: Vec::new() };
        let mut env = self.reset(k)?;
        let s = run_episode(&mut env, layout, cfg, &mut hooks, order_rng, None)?;
        Ok((s, hooks.steps))
    }
}

/// Reward and outcome of one env step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub reward: f64,
    pub failed: bool,
}

/// Survival and cost implied by a recorded trajectory.
pub fn summarize_trajectory(steps: &[StepRecord]) -> (usize, f64) {
    let ok = steps.iter().filter(|s| !s.failed);
    (ok.clone().count(), ok.map(|s| 1.0 - s.reward).sum())
}

struct GreedyHooks<'a> {
    spec: &'a GridSpec,
    learners: &'a [Learner],
    record: bool,
    steps: Vec<StepRecord>,
}

impl GreedyHooks<'_> {
    fn log(&mut self, out: &StepOutcome) {
        if self.record {
            self.steps.push(StepRecord { step: out.step, reward: out.reward, failed: out.failure.is_some() });
        }
    }
}

impl Hooks for GreedyHooks<'_> {
    fn choose(&mut self, agent: usize, obs: &Observation) -> Result<usize, MarlError> {
        let g = encode_observation(self.spec, obs)?;
        let p = self.learners[agent].policy(&g)?;
        Ok(greedy_action(p.row(0).as_slice().expect("row-major")))
    }

    fn on_interaction(&mut self, it: &Interaction<'_>) -> Result<Flow, MarlError> {
        self.log(it.outcome);
        Ok(Flow::Continue)
    }

    fn on_passive_step(&mut self, out: &StepOutcome) -> Result<(), MarlError> {
        self.log(out);
        Ok(())
    }
}

/// One row of the score log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub interaction: usize,
    pub mean: f64,
    pub scores: Vec<f64>,
}

/// Loss components of one update. For PPO, `critic_loss` is `L^VF`,
/// `actor_loss` is `−L^CLIP`, `aux_loss` the combined loss and `alpha` 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRow {
    pub interaction: usize,
    pub agent: usize,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub aux_loss: f64,
    pub alpha: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub strategy: Strategy,
    pub seed: u64,
    pub layout: AgentLayout,
    pub learners: Vec<Learner>,
    pub mid: MidPolicyEstimate,
    pub score_log: Vec<EvalRow>,
    pub updates: Vec<UpdateRow>,
    pub interactions: usize,
    pub env_steps: usize,
    pub episodes: usize,
    pub in_width: usize,
}

impl TrainingOutcome {
    pub fn checkpoint(&self, agent: usize) -> Checkpoint {
        let manifest = serde_json::json!({
            "strategy": self.strategy,
            "seed": self.seed,
            "agent": agent,
            "substation": self.layout.agents[agent].substation,
            "interactions": self.interactions,
        });
        self.learners[agent].checkpoint(manifest, self.in_width)
    }
}

struct Pending {
    agent: usize,
    state: Rc<GraphBatch>,
    action: usize,
    reward: f64,
    next_state: Rc<GraphBatch>,
    log_prob: f64,
}

struct Trainer<'a> {
    spec: &'a GridSpec,
    layout: &'a AgentLayout,
    strategy: Strategy,
    hp: HyperParams,
    cfg: &'a HierarchyConfig,
    schedule: &'a TrainSchedule,
    evaluator: &'a Evaluator,
    seed: u64,
    learners: Vec<Learner>,
    replay: Vec<ReplayBuffer>,
    rollouts: Vec<RolloutBuffer>,
    mid: MidPolicyEstimate,
    pending: Option<Pending>,
    choice: Option<(Rc<GraphBatch>, f64)>,
    acting_rng: RunRng,
    replay_rng: RunRng,
    minibatch_rng: RunRng,
    interactions: usize,
    score_log: Vec<EvalRow>,
    updates: Vec<UpdateRow>,
}

impl Trainer<'_> {
    fn row(&self, agent: usize) -> Vec<f64> {
        if self.strategy.is_dependent() {
            self.mid.row(agent)
        } else {
            (0..self.layout.len()).map(|j| if j == agent { 1.0 } else { 0.0 }).collect()
        }
    }

    /// Bootstrap values of `next` for agent `i`: its own soft value or
    /// the `π̂`-weighted mix over agents.
    fn bootstrap(&self, i: usize, next: &GraphBatch) -> Result<Vec<f64>, MarlError> {
        let own = |l: &Learner| -> Result<Vec<f64>, MarlError> {
            Ok(match l {
                Learner::Sacd(a) => a.soft_values(next)?,
                Learner::Ppo(a) => a.values(next)?,
            })
        };
        if !self.strategy.is_dependent() {
            return own(&self.learners[i]);
        }
        let row = self.row(i);
        let per_agent: Vec<Option<Vec<f64>>> = row
            .iter()
            .zip(&self.learners)
            .map(|(&p, l)| if p != 0.0 { own(l).map(Some) } else { Ok(None) })
            .collect::<Result<_, _>>()?;
        (0..next.n_graphs)
            .map(|b| {
                let v: Vec<f64> = per_agent.iter().map(|v| v.as_ref().map_or(0.0, |v| v[b])).collect();
                dependent_soft_value(&row, &v)
            })
            .collect()
    }

    fn finalize(&mut self, p: Pending, next_agent: Option<usize>, done: bool) -> Result<(), MarlError> {
        let t = Transition {
            state: p.state,
            action: p.action,
            reward: p.reward,
            next_state: p.next_state,
            done,
            agent: p.agent,
            next_agent,
            log_prob: p.log_prob,
        };
        match self.hp.algorithm {
            Algorithm::Sacd => self.replay[p.agent].push(t),
            Algorithm::Ppo => {
                let roll = &mut self.rollouts[p.agent];
                roll.push(t)?;
                if roll.is_full() {
                    roll.seal();
                    self.ppo_update(p.agent)?;
                }
            }
        }
        Ok(())
    }

    fn ppo_update(&mut self, i: usize) -> Result<(), MarlError> {
        let roll = &self.rollouts[i];
        let states = GraphBatch::concat(&roll.steps.iter().map(|t| t.state.as_ref()).collect::<Vec<_>>())?;
        let nexts = GraphBatch::concat(&roll.steps.iter().map(|t| t.next_state.as_ref()).collect::<Vec<_>>())?;
        let values = match &self.learners[i] {
            Learner::Ppo(a) => a.values(&states)?,
            Learner::Sacd(_) => return Err(MarlError::Config("PPO update on a SACD learner".into())),
        };
        let next_values = self.bootstrap(i, &nexts)?;
        let gae = compute_gae(roll, self.hp.gamma, self.hp.gae_lambda, &values, &next_values)?;
        let Learner::Ppo(agent) = &mut self.learners[i] else { unreachable!() };
        let m = agent.update(&self.rollouts[i], &gae, &mut self.minibatch_rng)?;
        self.updates.push(UpdateRow {
            interaction: self.interactions,
            agent: i,
            critic_loss: m.value_loss,
            actor_loss: -m.clip_objective,
            aux_loss: m.loss,
            alpha: 0.0,
            entropy: m.entropy,
        });
        self.rollouts[i].clear();
        Ok(())
    }

    fn sacd_update(&mut self, i: usize) -> Result<(), MarlError> {
        if self.replay[i].len() < self.hp.batch_size {
            return Ok(());
        }
        let batch: Vec<Transition> =
            self.replay[i].sample(&mut self.replay_rng, self.hp.batch_size)?.into_iter().cloned().collect();
        let nexts = GraphBatch::concat(&batch.iter().map(|t| t.next_state.as_ref()).collect::<Vec<_>>())?;
        let boot = self.bootstrap(i, &nexts)?;
        let Learner::Sacd(agent) = &mut self.learners[i] else {
            return Err(MarlError::Config("SACD update on a PPO learner".into()));
        };
        let refs: Vec<&Transition> = batch.iter().collect();
        let m = agent.update(&refs, &boot)?;
        self.updates.push(UpdateRow {
            interaction: self.interactions,
            agent: i,
            critic_loss: m.critic_loss,
            actor_loss: m.actor_loss,
            aux_loss: m.temperature_loss,
            alpha: m.alpha,
            entropy: m.entropy,
        });
        Ok(())
    }

    fn evaluate(&mut self) -> Result<(), MarlError> {
        let k = (self.interactions / self.schedule.eval_period) as u64;
        let mut rng = indexed_stream(self.seed, Stream::Evaluation, k);
        let scores = self.evaluator.evaluate(&self.learners, self.layout, self.cfg, &mut rng)?;
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        self.score_log.push(EvalRow { interaction: self.interactions, mean, scores });
        Ok(())
    }

    /// Closes the pending transition at the end of an episode.
    fn end_episode(&mut self, failed: bool) -> Result<(), MarlError> {
        if let Some(mut p) = self.pending.take() {
            if failed {
                p.reward = crate::env::FAILURE_REWARD;
            }
            self.finalize(p, None, true)?;
        }
        Ok(())
    }
}

impl Hooks for Trainer<'_> {
    fn choose(&mut self, agent: usize, obs: &Observation) -> Result<usize, MarlError> {
        let g = Rc::new(encode_observation(self.spec, obs)?);
        let p = self.learners[agent].policy(&g)?;
        let probs = p.row(0);
        let probs = probs.as_slice().expect("row-major");
        let a = sample_action(probs, &mut self.acting_rng);
        self.choice = Some((g, probs[a].ln()));
        Ok(a)
    }

    fn on_interaction(&mut self, it: &Interaction<'_>) -> Result<Flow, MarlError> {
        self.interactions += 1;
        let (state, log_prob) =
            self.choice.take().ok_or_else(|| MarlError::Config("interaction without a choice".into()))?;
        if let Some(p) = self.pending.take() {
            if !self.cfg.identity_mid_policy {
                self.mid.update(p.agent, it.agent)?;
            }
            self.finalize(p, Some(it.agent), false)?;
        }
        let next_state = Rc::new(encode_observation(self.spec, &it.outcome.observation)?);
        let p = Pending { agent: it.agent, state, action: it.action, reward: it.outcome.reward, next_state, log_prob };
        if it.outcome.done {
            self.finalize(p, None, true)?;
        } else {
            self.pending = Some(p);
        }
        if self.hp.algorithm == Algorithm::Sacd && self.interactions >= self.hp.update_start {
            for k in 0..self.layout.len() {
                self.sacd_update(k)?;
            }
        }
        if self.interactions.is_multiple_of(self.schedule.eval_period) {
            self.evaluate()?;
        }
        Ok(if self.interactions >= self.schedule.budget { Flow::Stop } else { Flow::Continue })
    }

    fn on_passive_step(&mut self, out: &StepOutcome) -> Result<(), MarlError> {
        if out.done {
            self.end_episode(out.failure.is_some())?;
        }
        Ok(())
    }
}

/// Trains one strategy for one seed.
///
/// Episodes are drawn uniformly from the training windows; a run ends after
/// exactly `schedule.budget` counted interactions, with an evaluation on
/// the test windows every `schedule.eval_period` interactions.
#[allow(clippy::too_many_arguments)]
pub fn run_marl_training(
    strategy: Strategy,
    cfg: &HierarchyConfig,
    hp: &HyperParams,
    seed: u64,
    spec: Arc<GridSpec>,
    env_params: EnvParams,
    set: &EpisodeSet,
    evaluator: &Evaluator,
    schedule: &TrainSchedule,
) -> Result<TrainingOutcome, MarlError> {
    cfg.validate()?;
    schedule.validate()?;
    hp.validate()?;
    if hp.algorithm != strategy.algorithm() {
        return Err(MarlError::Config(format!("strategy {} needs {:?} hyperparameters", strategy.name(), strategy.algorithm())));
    }
    let layout = AgentLayout::for_strategy(&spec, strategy, cfg.min_substation_size)?;
    let in_width = feature_width(&spec);
    let learners = layout
        .agents
        .iter()
        .enumerate()
        .map(|(k, a)| Learner::new(in_width, a.actions.len(), hp, &mut indexed_stream(seed, Stream::Init, k as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let n = layout.len();
    let mid = if cfg.identity_mid_policy { MidPolicyEstimate::identity(n) } else { MidPolicyEstimate::new(n, cfg.mid_prior) };
    let windows = set.windows(Split::Train);
    if windows.is_empty() {
        return Err(MarlError::Config("no training windows".into()));
    }
    let chronics: Vec<Arc<Chronic>> = set.chronics.iter().cloned().map(Arc::new).collect();

    let layout_ref = layout.clone();
    let mut trainer = Trainer {
        spec: &spec,
        layout: &layout_ref,
        strategy,
        hp: hp.clone(),
        cfg,
        schedule,
        evaluator,
        seed,
        learners,
        replay: (0..n).map(|_| ReplayBuffer::new(hp.replay_capacity)).collect(),
        rollouts: (0..n).map(|_| RolloutBuffer::new(hp.horizon())).collect(),
        mid,
        pending: None,
        choice: None,
        acting_rng: stream(seed, Stream::Acting),
        replay_rng: stream(seed, Stream::Replay),
        minibatch_rng: stream(seed, Stream::Minibatch),
        interactions: 0,
        score_log: Vec::new(),
        updates: Vec::new(),
    };
    let mut episode_rng = stream(seed, Stream::Episodes);
    let mut mid_rng = stream(seed, Stream::MidPolicy);
    let mut env_steps = 0;
    let mut episodes = 0;
    loop {
        if episodes >= schedule.max_episodes {
            return Err(MarlError::Budget(format!(
                "{} interactions after {episodes} episodes; the gate rarely fires on these chronics",
                trainer.interactions
            )));
        }
        let w = &windows[episode_rng.gen_range(0..windows.len())];
        let mut env = GridEnv::reset(spec.clone(), env_params, chronics[w.chronic].clone(), w.offset, set.window)?;
        let summary = run_episode(&mut env, &layout_ref, cfg, &mut trainer, &mut mid_rng, None)?;
        episodes += 1;
        env_steps += summary.env_steps;
        if summary.stopped {
            break;
        }
        trainer.end_episode(summary.failed)?;
    }
    Ok(TrainingOutcome {
        strategy,
        seed,
        layout,
        learners: trainer.learners,
        mid: trainer.mid,
        score_log: trainer.score_log,
        updates: trainer.updates,
        interactions: trainer.interactions,
        env_steps,
        episodes,
        in_width,
    })
}
