//! Training reward and the rescaled evaluation score.

use super::EnvError;

/// Rescaled ratio of served load to generation:
/// `clamp((served/generation - r_min) / (1 - r_min), 0, 1)`.
pub fn efficiency_reward(served_mw: f64, generation_mw: f64, r_min: f64) -> Result<f64, EnvError> {
    if !(generation_mw > 0.0) {
        return Err(EnvError::UndefinedRatio);
    }
    let ratio = served_mw / generation_mw;
    Ok(((ratio - r_min) / (1.0 - r_min)).clamp(0.0, 1.0))
}

/// Guard for a zero baseline cost in the cost-saving ratio.
pub const COST_EPSILON: f64 = 1e-9;

/// Piecewise-linear evaluation score in `[-100, 100]`.
///
/// - dying before the do-nothing baseline: `-100 (1 - t_a / t_dn)`
/// - outliving the baseline without finishing: `80 (t_a - t_dn) / (T - t_dn)`
/// - finishing: `80 + 20 clamp(saving, 0, 1)` where `saving` is the relative
///   reduction of cumulative cost against the baseline.
pub fn l2rpn_score(
    agent_steps: usize,
    baseline_steps: usize,
    episode_len: usize,
    agent_cost: f64,
    baseline_cost: f64,
) -> f64 {
    let (ta, tdn, t) = (agent_steps.min(episode_len), baseline_steps.min(episode_len), episode_len);
    if ta == t {
        let saving = (baseline_cost - agent_cost) / baseline_cost.max(COST_EPSILON);
        return 80.0 + 20.0 * saving.clamp(0.0, 1.0);
    }
    if ta < tdn {
        return -100.0 * (1.0 - ta as f64 / tdn as f64);
    }
    if tdn == 0 && ta == 0 {
        return -100.0;
    }
    80.0 * (ta - tdn) as f64 / (t - tdn) as f64
}
