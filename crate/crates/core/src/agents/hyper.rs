use serde::{Deserialize, Serialize};

use super::AgentsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sacd,
    Ppo,
}

/// Every learning scalar of one algorithm. Fields that do not apply to the
/// algorithm are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub lr: f64,
    /// SACD batch size.
    pub batch_size: usize,
    /// PPO: rollouts of `n_minibatches × minibatch_size` steps.
    pub n_minibatches: usize,
    pub minibatch_size: usize,
    /// SACD: counted interactions before updates begin.
    pub update_start: usize,
    pub target_entropy_scale: f64,
    pub tau: f64,
    pub initial_alpha: f64,
    pub twin_critics: bool,
    pub replay_capacity: usize,
    pub clip_eps: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
    pub gae_lambda: f64,
    pub epochs: usize,
    pub normalize_advantages: bool,
    /// Width of every graph block.
    pub width: usize,
}

impl HyperParams {
    fn base(algorithm: Algorithm) -> Self {
        HyperParams {
            algorithm,
            gamma: 0.99,
            lr: 1e-3,
            batch_size: 64,
            n_minibatches: 4,
            minibatch_size: 32,
            update_start: 4000,
            target_entropy_scale: 0.98,
            tau: 0.005,
            initial_alpha: 1.0,
            twin_critics: true,
            replay_capacity: 100_000,
            clip_eps: 0.2,
            vf_coef: 0.5,
            ent_coef: 0.01,
            gae_lambda: 0.95,
            epochs: 4,
            normalize_advantages: true,
            width: 128,
        }
    }

    /// Single-agent PPO column.
    pub fn ppo() -> Self {
        HyperParams {
            gamma: 0.95,
            lr: 0.003,
            n_minibatches: 4,
            minibatch_size: 32,
            vf_coef: 0.5,
            ent_coef: 0.01,
            clip_eps: 0.2,
            gae_lambda: 0.95,
            ..Self::base(Algorithm::Ppo)
        }
    }

    /// Multi-agent PPO column (IPPO and DPPO).
    pub fn mappo() -> Self {
        HyperParams {
            gamma: 0.996,
            lr: 0.002,
            n_minibatches: 2,
            minibatch_size: 32,
            vf_coef: 0.5,
            ent_coef: 5e-5,
            clip_eps: 0.12,
            gae_lambda: 0.85,
            ..Self::base(Algorithm::Ppo)
        }
    }

    /// Single-agent SACD column.
    pub fn sacd() -> Self {
        HyperParams {
            gamma: 0.995,
            lr: 5e-5,
            batch_size: 64,
            update_start: 4000,
            target_entropy_scale: 0.98,
            tau: 0.001,
            ..Self::base(Algorithm::Sacd)
        }
    }

    /// Multi-agent SACD column (ISACD and DSACD).
    pub fn masacd() -> Self {
        HyperParams {
            gamma: 0.998,
            lr: 2e-4,
            batch_size: 16,
            update_start: 3000,
            target_entropy_scale: 0.98,
            tau: 0.002,
            ..Self::base(Algorithm::Sacd)
        }
    }

    /// PPO rollout length per agent.
    pub fn horizon(&self) -> usize {
        self.n_minibatches * self.minibatch_size
    }

    pub fn validate(&self) -> Result<(), AgentsError> {
        let bad = |m: &str| Err(AgentsError::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must be in (0, 1)");
        }
        if !(self.lr >= 0.0) {
            return bad("lr must be nonnegative");
        }
        if !(self.clip_eps > 0.0) {
            return bad("clip_eps must be positive");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must be in [0, 1]");
        }
        if !(self.tau >= 0.0 && self.tau <= 1.0) {
            return bad("tau must be in [0, 1]");
        }
        if !(self.initial_alpha > 0.0) {
            return bad("initial_alpha must be positive");
        }
        if self.batch_size == 0 || self.n_minibatches == 0 || self.minibatch_size == 0 || self.width == 0 {
            return bad("sizes must be positive");
        }
        if self.replay_capacity < self.batch_size {
            return bad("replay_capacity must hold at least one batch");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_carry_the_published_values() {
        let p = HyperParams::ppo();
        assert_eq!((p.n_minibatches, p.minibatch_size, p.gamma, p.lr), (4, 32, 0.95, 0.003));
        assert_eq!((p.vf_coef, p.ent_coef, p.clip_eps, p.gae_lambda), (0.5, 0.01, 0.2, 0.95));
        let p = HyperParams::mappo();
        assert_eq!((p.n_minibatches, p.minibatch_size, p.gamma, p.lr), (2, 32, 0.996, 0.002));
        assert_eq!((p.vf_coef, p.ent_coef, p.clip_eps, p.gae_lambda), (0.5, 5e-5, 0.12, 0.85));
        let p = HyperParams::sacd();
        assert_eq!((p.batch_size, p.update_start, p.gamma, p.lr), (64, 4000, 0.995, 5e-5));
        assert_eq!((p.target_entropy_scale, p.tau), (0.98, 0.001));
        let p = HyperParams::masacd();
        assert_eq!((p.batch_size, p.update_start, p.gamma, p.lr), (16, 3000, 0.998, 2e-4));
        assert_eq!((p.target_entropy_scale, p.tau), (0.98, 0.002));
        for p in [HyperParams::ppo(), HyperParams::mappo(), HyperParams::sacd(), HyperParams::masacd()] {
            p.validate().unwrap();
        }
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        assert!(HyperParams { gamma: 1.0, ..HyperParams::masacd() }.validate().is_err());
        assert!(HyperParams { gae_lambda: 1.5, ..HyperParams::mappo() }.validate().is_err());
        assert!(HyperParams { clip_eps: 0.0, ..HyperParams::mappo() }.validate().is_err());
    }
}
