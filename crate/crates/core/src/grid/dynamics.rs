use serde::{Deserialize, Serialize};

use super::{ElectricalGraph, PowerFlowResult, Topology};

/// Protection settings for overloaded lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverloadParams {
    /// Loading at or above which a line trips immediately.
    pub hard_overflow: f64,
    /// A line above 1.0 trips once its overload counter exceeds this.
    pub soft_overflow_steps: u32,
    /// Steps a tripped line stays out before automatic reconnection.
    pub reconnect_delay: u32,
}

impl Default for OverloadParams {
    fn default() -> Self {
        OverloadParams { hard_overflow: 2.0, soft_overflow_steps: 3, reconnect_delay: 12 }
    }
}

/// Advances line protection by one step.
///
/// Out-of-service lines count their cooldown down and are restored when it
/// reaches zero. In-service lines trip at `hard_overflow`, or after more than
/// `soft_overflow_steps` consecutive steps above 1.0.
pub fn apply_overload_dynamics(result: &PowerFlowResult, topo: &Topology, params: &OverloadParams) -> Topology {
    let mut next = topo.clone();
    for l in 0..topo.line_in_service.len() {
        if !topo.line_in_service[l] {
            next.cooldown[l] = topo.cooldown[l].saturating_sub(1);
            if next.cooldown[l] == 0 {
                next.line_in_service[l] = true;
                next.overload_steps[l] = 0;
            }
            continue;
        }
        let rho = result.rho[l];
        let trip = if rho >= params.hard_overflow {
            true
        } else if rho > 1.0 {
            next.overload_steps[l] += 1;
            next.overload_steps[l] > params.soft_overflow_steps
        } else {
            next.overload_steps[l] = 0;
            false
        };
        if trip {
            next.line_in_service[l] = false;
            next.cooldown[l] = params.reconnect_delay;
            next.overload_steps[l] = 0;
        }
    }
    next
}

/// Why an episode ended early.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureCause {
    IsolatedLoad,
    IsolatedGenerator,
    NetworkSplit,
    InfeasibleFlow,
}

impl std::fmt::Display for FailureCause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FailureCause::IsolatedLoad => "isolated-load",
            FailureCause::IsolatedGenerator => "isolated-generator",
            FailureCause::NetworkSplit => "network-split",
            FailureCause::InfeasibleFlow => "infeasible-flow",
        };
        f.write_str(s)
    }
}

/// Returns the failure cause, if any.
///
/// Only active nodes (with a load, a generator or an in-service line) take
/// part. Any component with a load but no generator, or a generator but no
/// load, is an isolation; more than one viable component is a network split.
pub fn check_game_over(g: &ElectricalGraph, result: &PowerFlowResult) -> Option<FailureCause> {
    let (labels, n_comp) = g.components();
    let mut has_load = vec![false; n_comp];
    let mut has_gen = vec![false; n_comp];
    let mut active = vec![false; n_comp];
    for i in 0..g.n_nodes() {
        if !g.is_active(i) {
            continue;
        }
        let c = labels[i];
        active[c] = true;
        has_load[c] |= g.node_n_loads[i] > 0;
        has_gen[c] |= g.node_n_gens[i] > 0;
    }
    if (0..n_comp).any(|c| has_load[c] && !has_gen[c]) {
        return Some(FailureCause::IsolatedLoad);
    }
    if (0..n_comp).any(|c| has_gen[c] && !has_load[c]) {
        return Some(FailureCause::IsolatedGenerator);
    }
    if active.iter().filter(|&&a| a).count() > 1 {
        return Some(FailureCause::NetworkSplit);
    }
    if !result.feasible {
        return Some(FailureCause::InfeasibleFlow);
    }
    None
}
