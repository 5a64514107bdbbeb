use std::rc::Rc;

use rand::Rng;

use super::AgentsError;
use crate::nn::GraphBatch;

/// One low-level interaction of an agent.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: Rc<GraphBatch>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Rc<GraphBatch>,
    pub done: bool,
    pub agent: usize,
    /// Agent that acted next; `None` for terminal transitions.
    pub next_agent: Option<usize>,
    /// Behaviour log-probability (PPO only).
    pub log_prob: f64,
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer { items: Vec::with_capacity(capacity.min(1 << 16)), capacity: capacity.max(1), next: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// `n` indices drawn uniformly with replacement.
    pub fn sample<R: Rng>(&self, rng: &mut R, n: usize) -> Result<Vec<&Transition>, AgentsError> {
        if self.items.is_empty() {
            return Err(AgentsError::EmptyBatch);
        }
        Ok((0..n).map(|_| &self.items[rng.gen_range(0..self.items.len())]).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }
}

/// Advantages and value targets of a sealed rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gae {
    pub advantages: Vec<f64>,
    pub targets: Vec<f64>,
}

/// On-policy steps of one agent, up to a horizon.
#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    pub steps: Vec<Transition>,
    horizon: usize,
    sealed: bool,
}

impl RolloutBuffer {
    pub fn new(horizon: usize) -> Self {
        RolloutBuffer { steps: Vec::with_capacity(horizon), horizon, sealed: false }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.steps.len() >= self.horizon
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn push(&mut self, t: Transition) -> Result<(), AgentsError> {
        if self.sealed {
            return Err(AgentsError::Rollout("push into a sealed rollout".into()));
        }
        if self.is_full() {
            return Err(AgentsError::Rollout(format!("rollout already holds {} steps", self.horizon)));
        }
        self.steps.push(t);
        Ok(())
    }

    pub fn seal(&mut self) {
        self.sealed = true;
    }

    pub fn clear(&mut self) {
        self.steps.clear();
        self.sealed = false;
    }
}

/// `δ_t = r_t + γ·V(s_{t+1}) − V(s_t)`, with no bootstrap on terminal steps.
pub fn td_residuals(rewards: &[f64], values: &[f64], next_values: &[f64], dones: &[bool], gamma: f64) -> Vec<f64> {
    (0..rewards.len())
        .map(|t| {
            let boot = if dones[t] { 0.0 } else { gamma * next_values[t] };
            rewards[t] + boot - values[t]
        })
        .collect()
}

/// `A_t = δ_t + γλ·A_{t+1}`, cut at terminal steps and at the end of the
/// rollout.
pub fn gae_from_residuals(deltas: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    let mut adv = vec![0.0; deltas.len()];
    let mut next = 0.0;
    for t in (0..deltas.len()).rev() {
        let carry = if dones[t] { 0.0 } else { gamma * lambda * next };
        adv[t] = deltas[t] + carry;
        next = adv[t];
    }
    adv
}

/// Generalized advantage estimation over a sealed rollout given `V(s_t)` and
/// `V(s_{t+1})` per step.
pub fn compute_gae(
    rollout: &RolloutBuffer,
    gamma: f64,
    lambda: f64,
    values: &[f64],
    next_values: &[f64],
) -> Result<Gae, AgentsError> {
    if !rollout.is_sealed() {
        return Err(AgentsError::Rollout("advantages requested on an unsealed rollout".into()));
    }
    let n = rollout.len();
    if values.len() != n || next_values.len() != n {
        return Err(AgentsError::Width { expected: n, got: values.len().min(next_values.len()) });
    }
    let rewards: Vec<f64> = rollout.steps.iter().map(|s| s.reward).collect();
    let dones: Vec<bool> = rollout.steps.iter().map(|s| s.done).collect();
    let deltas = td_residuals(&rewards, values, next_values, &dones, gamma);
    Ok(gae_with_targets(&deltas, &dones, values, gamma, lambda))
}

/// Advantages from residuals plus value targets `A_t + V(s_t)`.
pub fn gae_with_targets(deltas: &[f64], dones: &[bool], values: &[f64], gamma: f64, lambda: f64) -> Gae {
    let advantages = gae_from_residuals(deltas, dones, gamma, lambda);
    let targets = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Gae { advantages, targets }
}

/// Shifts and scales to mean 0 and standard deviation 1 (left centred only
/// when the spread is zero).
pub fn normalize(xs: &[f64]) -> Vec<f64> {
    if xs.is_empty() {
        return Vec::new();
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    xs.iter().map(|x| if sd > 1e-12 { (x - mean) / sd } else { x - mean }).collect()
}
