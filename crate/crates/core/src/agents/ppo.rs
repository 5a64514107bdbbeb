//! PPO with separate actor and critic graph networks.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{normalize, AgentsError, Gae, HyperParams, RolloutBuffer};
use crate::nn::{
    dense, gnn_block, init_dense, init_gnn_block, mean_pool, Adam, Bound, GraphBatch, ParameterSet, Role, Tape, Var,
};

pub const PPO_BLOCKS: usize = 3;

/// `L^CLIP = mean_b min(r_b A_b, clip(r_b, 1 − ε, 1 + ε) A_b)` with
/// `r_b = exp(log π(a_b|s_b) − log π_old(a_b|s_b))`. `logp` is the n×1
/// column of current log-probabilities of the taken actions.
pub fn ppo_clip_objective(
    tape: &mut Tape,
    logp: Var,
    old_logp: &[f64],
    advantages: &[f64],
    eps: f64,
) -> Result<Var, AgentsError> {
    let n = tape.value(logp).nrows();
    if n == 0 {
        return Err(AgentsError::EmptyBatch);
    }
    if old_logp.len() != n || advantages.len() != n {
        return Err(AgentsError::Width { expected: n, got: old_logp.len().min(advantages.len()) });
    }
    let old = tape.leaf(column(old_logp));
    let adv = tape.leaf(column(advantages));
    let diff = tape.sub(logp, old)?;
    let ratio = tape.exp(diff);
    let surr1 = tape.mul(ratio, adv)?;
    let clipped = tape.clamp(ratio, 1.0 - eps, 1.0 + eps);
    let surr2 = tape.mul(clipped, adv)?;
    let m = tape.minimum(surr1, surr2)?;
    Ok(tape.mean(m)?)
}

/// `L^VF = mean_b (V(s_b) − V^targ_b)²`.
pub fn ppo_value_loss(tape: &mut Tape, values: Var, targets: &[f64]) -> Result<Var, AgentsError> {
    let n = tape.value(values).nrows();
    if targets.len() != n {
        return Err(AgentsError::Width { expected: n, got: targets.len() });
    }
    let t = tape.leaf(column(targets));
    let d = tape.sub(values, t)?;
    let sq = tape.mul(d, d)?;
    Ok(tape.mean(sq)?)
}

/// Mean policy entropy `mean_b −Σ_a π log π` of row logits.
pub fn policy_entropy(tape: &mut Tape, logits: Var) -> Result<Var, AgentsError> {
    let logp = tape.log_softmax(logits);
    let p = tape.exp(logp);
    let plogp = tape.mul(p, logp)?;
    let rows = tape.row_sum(plogp);
    let m = tape.mean(rows)?;
    Ok(tape.scale(m, -1.0))
}

/// `L = −L^CLIP + c₁·L^VF − c₂·S`.
pub fn ppo_combined_loss(tape: &mut Tape, clip: Var, vf: Var, entropy: Var, c1: f64, c2: f64) -> Result<Var, AgentsError> {
    let a = tape.scale(clip, -1.0);
    let b = tape.scale(vf, c1);
    let c = tape.scale(entropy, -c2);
    let ab = tape.add(a, b)?;
    Ok(tape.add(ab, c)?)
}

fn column(xs: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((xs.len(), 1), xs.to_vec()).expect("length matches")
}

fn tower(tape: &mut Tape, p: &Bound, prefix: &str, g: &GraphBatch) -> Result<Var, AgentsError> {
    let mut h = tape.leaf(g.features.clone());
    for k in 0..PPO_BLOCKS {
        h = gnn_block(tape, p, &format!("{prefix}.{k}"), h, g)?;
    }
    let pooled = mean_pool(tape, h, g)?;
    Ok(dense(tape, p, &format!("{prefix}.out"), pooled)?)
}

pub fn ppo_actor_logits(tape: &mut Tape, p: &Bound, g: &GraphBatch) -> Result<Var, AgentsError> {
    tower(tape, p, "actor", g)
}

pub fn ppo_critic_values(tape: &mut Tape, p: &Bound, g: &GraphBatch) -> Result<Var, AgentsError> {
    tower(tape, p, "critic", g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpoMetrics {
    pub clip_objective: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub loss: f64,
}

/// One PPO learner.
#[derive(Debug, Clone)]
pub struct PpoAgent {
    pub params: ParameterSet,
    pub n_actions: usize,
    pub hp: HyperParams,
    opt: Adam,
}

impl PpoAgent {
    pub fn new<R: Rng>(in_width: usize, n_actions: usize, hp: &HyperParams, rng: &mut R) -> Result<Self, AgentsError> {
        hp.validate()?;
        if n_actions == 0 {
            return Err(AgentsError::Config("agent needs at least one action".into()));
        }
        let w = hp.width;
        let mut ps = ParameterSet::new(Role::Shared);
        for (prefix, out, gain) in [("actor", n_actions, 0.01), ("critic", 1, 1.0)] {
            for k in 0..PPO_BLOCKS {
                init_gnn_block(&mut ps, &format!("{prefix}.{k}"), if k == 0 { in_width } else { w }, w, rng)?;
            }
            init_dense(&mut ps, &format!("{prefix}.out"), w, out, gain, rng)?;
        }
        Ok(PpoAgent { params: ps, n_actions, hp: hp.clone(), opt: Adam::new(hp.lr) })
    }

    /// Action probabilities, one row per graph.
    pub fn policy(&self, g: &GraphBatch) -> Result<Array2<f64>, AgentsError> {
        let mut t = Tape::new();
        let p = t.bind(&self.params);
        let logits = ppo_actor_logits(&mut t, &p, g)?;
        let probs = t.softmax(logits);
        Ok(t.value(probs).clone())
    }

    /// `V(s)` per graph.
    pub fn values(&self, g: &GraphBatch) -> Result<Vec<f64>, AgentsError> {
        let mut t = Tape::new();
        let p = t.bind(&self.params);
        let v = ppo_critic_values(&mut t, &p, g)?;
        Ok(t.value(v).iter().copied().collect())
    }

    /// Epochs of shuffled minibatch steps on the combined loss over a sealed
    /// rollout with precomputed advantages.
    pub fn update<R: Rng>(&mut self, rollout: &RolloutBuffer, gae: &Gae, rng: &mut R) -> Result<PpoMetrics, AgentsError> {
        if !rollout.is_sealed() {
            return Err(AgentsError::Rollout("update on an unsealed rollout".into()));
        }
        let n = rollout.len();
        if n == 0 {
            return Err(AgentsError::EmptyBatch);
        }
        if gae.advantages.len() != n {
            return Err(AgentsError::Width { expected: n, got: gae.advantages.len() });
        }
        let adv = if self.hp.normalize_advantages { normalize(&gae.advantages) } else { gae.advantages.clone() };
        let mb = self.hp.minibatch_size.min(n);
        let mut order: Vec<usize> = (0..n).collect();
        let mut last = None;
        for _ in 0..self.hp.epochs {
            order.shuffle(rng);
            for chunk in order.chunks(mb) {
                last = Some(self.step(rollout, chunk, &adv, &gae.targets)?);
            }
        }
        last.ok_or(AgentsError::EmptyBatch)
    }

    fn step(&mut self, rollout: &RolloutBuffer, idx: &[usize], adv: &[f64], targets: &[f64]) -> Result<PpoMetrics, AgentsError> {
        let states: Vec<&GraphBatch> = idx.iter().map(|&i| rollout.steps[i].state.as_ref()).collect();
        let g = GraphBatch::concat(&states)?;
        let actions: Vec<usize> = idx.iter().map(|&i| rollout.steps[i].action).collect();
        let old: Vec<f64> = idx.iter().map(|&i| rollout.steps[i].log_prob).collect();
        let a: Vec<f64> = idx.iter().map(|&i| adv[i]).collect();
        let tg: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();

        let mut t = Tape::new();
        let p = t.bind(&self.params);
        let logits = ppo_actor_logits(&mut t, &p, &g)?;
        let logp_all = t.log_softmax(logits);
        let logp = t.gather_cols(logp_all, &actions)?;
        let clip = ppo_clip_objective(&mut t, logp, &old, &a, self.hp.clip_eps)?;
        let v = ppo_critic_values(&mut t, &p, &g)?;
        let vf = ppo_value_loss(&mut t, v, &tg)?;
        let ent = policy_entropy(&mut t, logits)?;
        let loss = ppo_combined_loss(&mut t, clip, vf, ent, self.hp.vf_coef, self.hp.ent_coef)?;
        let grads = p.gradients(&t.backward(loss)?);
        self.opt.step(&mut self.params, &grads)?;
        Ok(PpoMetrics { clip_objective: t.scalar(clip), value_loss: t.scalar(vf), entropy: t.scalar(ent), loss: t.scalar(loss) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{compute_gae, Transition};
    use crate::nn::gradcheck::check_gradients;
    use crate::rng::{stream, Stream};
    use ndarray::array;
    use std::rc::Rc;

    #[test]
    fn equal_policies_give_mean_advantage() {
        let mut t = Tape::new();
        let lp = t.leaf(array![[-0.5], [-1.2], [-0.1]]);
        let adv = [1.0, -2.0, 0.5];
        let o = ppo_clip_objective(&mut t, lp, &[-0.5, -1.2, -0.1], &adv, 0.2).unwrap();
        assert!((t.scalar(o) - (-0.5 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn saturated_clip_blocks_the_gradient() {
        let mut t = Tape::new();
        let lp = t.leaf(array![[1.5f64.ln()]]);
        let o = ppo_clip_objective(&mut t, lp, &[0.0], &[2.0], 0.2).unwrap();
        assert!((t.scalar(o) - 1.2 * 2.0).abs() < 1e-12);
        let g = t.backward(o).unwrap();
        assert_eq!(g.get(lp).unwrap()[[0, 0]], 0.0);
    }

    #[test]
    fn clip_objective_matches_elementwise_expansion() {
        let lp = [-0.3, -2.0, -0.7, -1.1];
        let old = [-0.5, -1.0, -0.7, -1.5];
        let adv = [1.0, 0.4, -0.3, -2.0];
        let eps = 0.12;
        let mut t = Tape::new();
        let v = t.leaf(column(&lp));
        let o = ppo_clip_objective(&mut t, v, &old, &adv, eps).unwrap();
        let mut sum = 0.0;
        for k in 0..4 {
            let r = (lp[k] - old[k]).exp();
            sum += (r * adv[k]).min(r.clamp(1.0 - eps, 1.0 + eps) * adv[k]);
        }
        assert_eq!(t.scalar(o), sum / 4.0);
    }

    #[test]
    fn clip_objective_ignores_a_common_log_prob_shift() {
        let lp = [-0.3, -2.0, -0.7];
        let old = [-0.5, -1.0, -0.7];
        let adv = [1.0, 0.4, -0.3];
        let eval = |shift: f64| {
            let mut t = Tape::new();
            let v = t.leaf(column(&lp.map(|x| x + shift)));
            let o = ppo_clip_objective(&mut t, v, &old.map(|x| x + shift), &adv, 0.2).unwrap();
            t.scalar(o)
        };
        assert!((eval(0.0) - eval(3.0)).abs() < 1e-12);
    }

    #[test]
    fn value_loss_examples() {
        let mut t = Tape::new();
        let v = t.leaf(array![[1.0], [2.0]]);
        let l = ppo_value_loss(&mut t, v, &[1.0, 2.0]).unwrap();
        assert_eq!(t.scalar(l), 0.0);
        let l = ppo_value_loss(&mut t, v, &[0.0, 1.0]).unwrap();
        assert_eq!(t.scalar(l), 1.0);
        let l = ppo_value_loss(&mut t, v, &[0.5, -1.0]).unwrap();
        assert_eq!(t.scalar(l), (0.25 + 9.0) / 2.0);
    }

    #[test]
    fn combined_loss_weights() {
        let mut t = Tape::new();
        let clip = t.leaf(array![[0.8]]);
        let vf = t.leaf(array![[0.3]]);
        let k = 5.0f64;
        let logits = t.leaf(Array2::zeros((2, 5)));
        let ent = policy_entropy(&mut t, logits).unwrap();
        assert!((t.scalar(ent) - k.ln()).abs() < 1e-12);
        let l = ppo_combined_loss(&mut t, clip, vf, ent, 0.0, 0.0).unwrap();
        assert_eq!(t.scalar(l), -0.8);
        let s = t.scalar(ent);
        let l = ppo_combined_loss(&mut t, clip, vf, ent, 0.5, 0.01).unwrap();
        assert_eq!(t.scalar(l), -0.8 + 0.5 * 0.3 + -0.01 * s);
    }

    fn rollout(n: usize) -> RolloutBuffer {
        let mut rng = stream(7, Stream::Replay);
        let mut r = RolloutBuffer::new(n);
        for k in 0..n {
            let x = Array2::from_shape_fn((3, 4), |_| rng.gen_range(-1.0..1.0));
            let g = Rc::new(GraphBatch::new(x, &[(0, 1), (1, 0), (2, 1), (1, 2)]).unwrap());
            r.push(Transition {
                state: g.clone(),
                action: k % 3,
                reward: rng.gen_range(-1.0..1.0),
                next_state: g,
                done: k == n - 1,
                agent: 0,
                next_agent: None,
                log_prob: -(3f64.ln()),
            })
            .unwrap();
        }
        r.seal();
        r
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_bit_identical() {
        let hp = HyperParams { lr: 0.0, width: 5, minibatch_size: 4, n_minibatches: 2, ..HyperParams::mappo() };
        let mut agent = PpoAgent::new(4, 3, &hp, &mut stream(0, Stream::Init)).unwrap();
        let before = agent.params.clone();
        let r = rollout(8);
        let v = vec![0.0; 8];
        let gae = compute_gae(&r, hp.gamma, hp.gae_lambda, &v, &v).unwrap();
        agent.update(&r, &gae, &mut stream(0, Stream::Minibatch)).unwrap();
        assert_eq!(agent.params, before);
    }

    #[test]
    fn combined_loss_passes_finite_differences() {
        for seed in 0..3 {
            let hp = HyperParams { width: 4, ..HyperParams::mappo() };
            let agent = PpoAgent::new(4, 3, &hp, &mut stream(seed, Stream::Init)).unwrap();
            let r = rollout(4);
            let g = GraphBatch::concat(&r.steps.iter().map(|t| t.state.as_ref()).collect::<Vec<_>>()).unwrap();
            let actions: Vec<usize> = r.steps.iter().map(|t| t.action).collect();
            let old = [-1.0, -1.2, -0.9, -1.1];
            let adv = [0.5, -1.0, 2.0, 0.3];
            let tg = [0.1, 0.2, -0.3, 0.4];
            let check = check_gradients(&agent.params, 1e-5, |t, p| {
                let e = |e: AgentsError| crate::nn::NnError::Structure(e.to_string());
                let logits = ppo_actor_logits(t, p, &g).map_err(e)?;
                let lp_all = t.log_softmax(logits);
                let lp = t.gather_cols(lp_all, &actions)?;
                let clip = ppo_clip_objective(t, lp, &old, &adv, 0.12).map_err(e)?;
                let v = ppo_critic_values(t, p, &g).map_err(e)?;
                let vf = ppo_value_loss(t, v, &tg).map_err(e)?;
                let ent = policy_entropy(t, logits).map_err(e)?;
                ppo_combined_loss(t, clip, vf, ent, 0.5, 0.01).map_err(e)
            })
            .unwrap();
            assert!(check.max_rel_error < 1e-4, "seed {seed}: {check:?}");
        }
    }
}
