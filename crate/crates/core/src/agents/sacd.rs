//! Discrete soft actor-critic.
//!
//! Network: a shared trunk of three graph blocks feeding an actor head
//! (three blocks, mean pool, dense logits) and two critic heads (one block,
//! mean pool, dense Q-values). The target network copies the trunk and the
//! critic heads.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;

use super::{AgentsError, HyperParams, Transition};
use crate::nn::{
    dense, gnn_block, init_dense, init_gnn_block, mean_pool, soft_update_target, Adam, Bound, GraphBatch,
    ParameterSet, Role, Tape, Var,
};

pub const TRUNK_BLOCKS: usize = 3;
pub const ACTOR_BLOCKS: usize = 3;
pub const CRITIC_BLOCKS: usize = 1;

/// `V = Σ_a π_a (Q_a − α·ln π_a)`; actions with `π_a = 0` contribute 0.
pub fn sacd_soft_state_value(pi: &[f64], q: &[f64], alpha: f64) -> Result<f64, AgentsError> {
    if pi.len() != q.len() {
        return Err(AgentsError::Width { expected: pi.len(), got: q.len() });
    }
    Ok(pi
        .iter()
        .zip(q)
        .filter(|(&p, _)| p > 0.0)
        .map(|(&p, &qa)| p * (qa - alpha * p.ln()))
        .sum())
}

/// `Σ_k mean_b ½(Q_k(s_b, a_b) − y_b)²` over the given critics.
pub fn sacd_critic_loss(tape: &mut Tape, critics: &[Var], actions: &[usize], y: &[f64]) -> Result<Var, AgentsError> {
    if actions.is_empty() {
        return Err(AgentsError::EmptyBatch);
    }
    let target = tape.leaf(Array2::from_shape_vec((y.len(), 1), y.to_vec()).map_err(|_| AgentsError::Width {
        expected: actions.len(),
        got: y.len(),
    })?);
    let mut total: Option<Var> = None;
    for &q in critics {
        let qa = tape.gather_cols(q, actions)?;
        let err = tape.sub(qa, target)?;
        let sq = tape.mul(err, err)?;
        let half = tape.scale(sq, 0.5);
        let loss = tape.mean(half)?;
        total = Some(match total {
            Some(t) => tape.add(t, loss)?,
            None => loss,
        });
    }
    total.ok_or(AgentsError::EmptyBatch)
}

/// `mean_b Σ_a π_a (α·ln π_a − Q_a)` with `q` treated as a constant.
pub fn sacd_actor_loss(tape: &mut Tape, logits: Var, q: &Array2<f64>, alpha: f64) -> Result<Var, AgentsError> {
    if tape.value(logits).nrows() == 0 {
        return Err(AgentsError::EmptyBatch);
    }
    let q = tape.leaf(q.clone());
    let logp = tape.log_softmax(logits);
    let p = tape.exp(logp);
    let alp = tape.scale(logp, alpha);
    let inner = tape.sub(alp, q)?;
    let weighted = tape.mul(p, inner)?;
    let per_state = tape.row_sum(weighted);
    Ok(tape.mean(per_state)?)
}

/// `mean_b α·(H(π_b) − H̄)` as a function of `ln α`. Its gradient with respect
/// to `ln α` is `α·(mean H − H̄)`.
pub fn sacd_temperature_loss(
    tape: &mut Tape,
    log_alpha: Var,
    entropies: &[f64],
    target_entropy: f64,
) -> Result<Var, AgentsError> {
    if entropies.is_empty() {
        return Err(AgentsError::EmptyBatch);
    }
    let gap = entropies.iter().map(|h| h - target_entropy).sum::<f64>() / entropies.len() as f64;
    let alpha = tape.exp(log_alpha);
    Ok(tape.scale(alpha, gap))
}

/// Entropy of each row of a probability matrix.
pub fn row_entropies(p: &Array2<f64>) -> Vec<f64> {
    p.rows().into_iter().map(|r| -r.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()).collect()
}

pub fn trunk(tape: &mut Tape, p: &Bound, g: &GraphBatch) -> Result<Var, AgentsError> {
    let mut h = tape.leaf(g.features.clone());
    for k in 0..TRUNK_BLOCKS {
        h = gnn_block(tape, p, &format!("trunk.{k}"), h, g)?;
    }
    Ok(h)
}

/// Actor logits, `n_graphs × n_actions`.
pub fn actor_logits(tape: &mut Tape, p: &Bound, h: Var, g: &GraphBatch) -> Result<Var, AgentsError> {
    let mut h = h;
    for k in 0..ACTOR_BLOCKS {
        h = gnn_block(tape, p, &format!("actor.{k}"), h, g)?;
    }
    let pooled = mean_pool(tape, h, g)?;
    Ok(dense(tape, p, "actor.out", pooled)?)
}

/// Q-values of critic head `which` (1 or 2), `n_graphs × n_actions`.
pub fn critic_q(tape: &mut Tape, p: &Bound, h: Var, g: &GraphBatch, which: usize) -> Result<Var, AgentsError> {
    let mut h = h;
    for k in 0..CRITIC_BLOCKS {
        h = gnn_block(tape, p, &format!("critic{which}.{k}"), h, g)?;
    }
    let pooled = mean_pool(tape, h, g)?;
    Ok(dense(tape, p, &format!("critic{which}.out"), pooled)?)
}

fn stack(states: &[&GraphBatch]) -> Result<GraphBatch, AgentsError> {
    Ok(GraphBatch::concat(states)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SacdMetrics {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub temperature_loss: f64,
    pub alpha: f64,
    pub entropy: f64,
}

/// One SACD learner: online network, target network, temperature.
#[derive(Debug, Clone)]
pub struct SacdAgent {
    pub params: ParameterSet,
    pub target: ParameterSet,
    pub log_alpha: ParameterSet,
    pub n_actions: usize,
    pub hp: HyperParams,
    opt: Adam,
    alpha_opt: Adam,
}

impl SacdAgent {
    pub fn new<R: Rng>(in_width: usize, n_actions: usize, hp: &HyperParams, rng: &mut R) -> Result<Self, AgentsError> {
        hp.validate()?;
        if n_actions == 0 {
            return Err(AgentsError::Config("agent needs at least one action".into()));
        }
        let w = hp.width;
        let mut ps = ParameterSet::new(Role::Shared);
        for k in 0..TRUNK_BLOCKS {
            init_gnn_block(&mut ps, &format!("trunk.{k}"), if k == 0 { in_width } else { w }, w, rng)?;
        }
        for k in 0..ACTOR_BLOCKS {
            init_gnn_block(&mut ps, &format!("actor.{k}"), w, w, rng)?;
        }
        init_dense(&mut ps, "actor.out", w, n_actions, 0.01, rng)?;
        let heads: &[usize] = if hp.twin_critics { &[1, 2] } else { &[1] };
        for &c in heads {
            for k in 0..CRITIC_BLOCKS {
                init_gnn_block(&mut ps, &format!("critic{c}.{k}"), w, w, rng)?;
            }
            init_dense(&mut ps, &format!("critic{c}.out"), w, n_actions, 1.0, rng)?;
        }
        let target = ps.subset(&["trunk.", "critic1.", "critic2."], Role::TargetCritic);
        let mut log_alpha = ParameterSet::new(Role::Shared);
        log_alpha.insert("log_alpha", Array2::from_elem((1, 1), hp.initial_alpha.ln()))?;
        Ok(SacdAgent {
            params: ps,
            target,
            log_alpha,
            n_actions,
            hp: hp.clone(),
            opt: Adam::new(hp.lr),
            alpha_opt: Adam::new(hp.lr),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.get("log_alpha").expect("present")[[0, 0]].exp()
    }

    pub fn target_entropy(&self) -> f64 {
        self.hp.target_entropy_scale * (self.n_actions as f64).ln()
    }

    fn heads(&self) -> &'static [usize] {
        if self.hp.twin_critics {
            &[1, 2]
        } else {
            &[1]
        }
    }

    /// Action probabilities, one row per graph of `g`.
    pub fn policy(&self, g: &GraphBatch) -> Result<Array2<f64>, AgentsError> {
        let mut t = Tape::new();
        let p = t.bind(&self.params);
        let h = trunk(&mut t, &p, g)?;
        let logits = actor_logits(&mut t, &p, h, g)?;
        let probs = t.softmax(logits);
        Ok(t.value(probs).clone())
    }

    /// Elementwise minimum over the critic heads of `params`.
    fn q_min(&self, params: &ParameterSet, g: &GraphBatch) -> Result<Array2<f64>, AgentsError> {
        let mut t = Tape::new();
        let p = t.bind(params);
        let h = trunk(&mut t, &p, g)?;
        let mut q: Option<Var> = None;
        for &c in self.heads() {
            let qc = critic_q(&mut t, &p, h, g, c)?;
            q = Some(match q {
                Some(prev) => t.minimum(prev, qc)?,
                None => qc,
            });
        }
        Ok(t.value(q.expect("at least one head")).clone())
    }

    /// Soft state values `V(s)` for every graph of `g`, from the target
    /// critics and the online policy.
    pub fn soft_values(&self, g: &GraphBatch) -> Result<Vec<f64>, AgentsError> {
        let pi = self.policy(g)?;
        let q = self.q_min(&self.target, g)?;
        let alpha = self.alpha();
        pi.rows()
            .into_iter()
            .zip(q.rows())
            .map(|(p, q)| sacd_soft_state_value(p.as_slice().expect("row-major"), q.as_slice().expect("row-major"), alpha))
            .collect()
    }

    /// Targets `y = r + γ(1 − done)·bootstrap`.
    pub fn td_targets(&self, batch: &[&Transition], bootstrap: &[f64]) -> Vec<f64> {
        batch
            .iter()
            .zip(bootstrap)
            .map(|(t, &v)| if t.done { t.reward } else { t.reward + self.hp.gamma * v })
            .collect()
    }

    /// One combined critic + actor step, one temperature step and a soft
    /// target update. `bootstrap[b]` is the soft value of `batch[b].next_state`.
    pub fn update(&mut self, batch: &[&Transition], bootstrap: &[f64]) -> Result<SacdMetrics, AgentsError> {
        if batch.is_empty() {
            return Err(AgentsError::EmptyBatch);
        }
        if bootstrap.len() != batch.len() {
            return Err(AgentsError::Width { expected: batch.len(), got: bootstrap.len() });
        }
        let y = self.td_targets(batch, bootstrap);
        let states: Vec<&GraphBatch> = batch.iter().map(|t| t.state.as_ref()).collect();
        let g = stack(&states)?;
        let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
        let alpha = self.alpha();

        let mut t = Tape::new();
        let p = t.bind(&self.params);
        let h = trunk(&mut t, &p, &g)?;
        let logits = actor_logits(&mut t, &p, h, &g)?;
        let mut qs = Vec::new();
        for &c in self.heads() {
            qs.push(critic_q(&mut t, &p, h, &g, c)?);
        }
        let mut q_min = t.value(qs[0]).clone();
        for &q in &qs[1..] {
            q_min.zip_mut_with(t.value(q), |a, &b| *a = a.min(b));
        }
        let critic = sacd_critic_loss(&mut t, &qs, &actions, &y)?;
        let actor = sacd_actor_loss(&mut t, logits, &q_min, alpha)?;
        let loss = t.add(critic, actor)?;
        let grads = p.gradients(&t.backward(loss)?);
        self.opt.step(&mut self.params, &grads)?;

        let probs = t.value(logits).clone();
        let probs = softmax_rows(&probs);
        let entropies = row_entropies(&probs);
        let mut ta = Tape::new();
        let pa = ta.bind(&self.log_alpha);
        let temp = sacd_temperature_loss(&mut ta, pa.get("log_alpha")?, &entropies, self.target_entropy())?;
        let ga = pa.gradients(&ta.backward(temp)?);
        self.alpha_opt.step(&mut self.log_alpha, &ga)?;

        soft_update_target(&self.params, &mut self.target, self.hp.tau)?;
        Ok(SacdMetrics {
            critic_loss: t.scalar(critic),
            actor_loss: t.scalar(actor),
            temperature_loss: ta.scalar(temp),
            alpha: self.alpha(),
            entropy: entropies.iter().sum::<f64>() / entropies.len() as f64,
        })
    }

    /// Critic loss on `batch` with the current parameters.
    pub fn critic_loss(&self, batch: &[&Transition], bootstrap: &[f64]) -> Result<f64, AgentsError> {
        let y = self.td_targets(batch, bootstrap);
        let states: Vec<&GraphBatch> = batch.iter().map(|t| t.state.as_ref()).collect();
        let g = stack(&states)?;
        let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
        let mut t = Tape::new();
        let p = t.bind(&self.params);
        let h = trunk(&mut t, &p, &g)?;
        let mut qs = Vec::new();
        for &c in self.heads() {
            qs.push(critic_q(&mut t, &p, h, &g, c)?);
        }
        let l = sacd_critic_loss(&mut t, &qs, &actions, &y)?;
        Ok(t.scalar(l))
    }

    pub fn parameter_sets(&self) -> BTreeMap<&'static str, &ParameterSet> {
        BTreeMap::from([("online", &self.params), ("target", &self.target), ("temperature", &self.log_alpha)])
    }
}

pub(crate) fn softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut p = x.clone();
    for mut row in p.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - m).exp());
        let z = row.sum();
        row.mapv_inplace(|v| v / z);
    }
    p
}
