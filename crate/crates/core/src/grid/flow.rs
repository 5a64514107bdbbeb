//! DC power flow over an [`ElectricalGraph`].
//!
//! Each connected component is solved separately. Generation inside a
//! component is scaled proportionally to match the component load (a
//! distributed slack), then `B θ = P` is solved on the reduced system with the
//! first node of the component as angle reference.

use super::ElectricalGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowResult {
    /// Signed flow per line, positive from origin to extremity. Zero for
    /// lines out of service.
    pub flow_mw: Vec<f64>,
    /// `|flow| / limit` per line, unclipped.
    pub rho: Vec<f64>,
    pub feasible: bool,
    /// Balanced net injection per node.
    pub node_injection_mw: Vec<f64>,
    /// Load supplied by a component that holds generation.
    pub served_load_mw: f64,
    /// Generation after balancing.
    pub generation_mw: f64,
}

impl PowerFlowResult {
    pub fn max_rho(&self) -> f64 {
        self.rho.iter().copied().fold(0.0, f64::max)
    }
}

/// Solves the DC power flow. Never fails: isolated load and degenerate
/// systems clear the `feasible` flag.
pub fn solve_dc_power_flow(g: &ElectricalGraph) -> PowerFlowResult {
    let n = g.n_nodes();
    let mut flow_mw = vec![0.0; g.n_lines];
    let mut node_injection_mw = vec![0.0; n];
    let mut feasible = true;
    let mut served = 0.0;
    let mut generation = 0.0;

    let (labels, n_comp) = g.components();
    for c in 0..n_comp {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        let gen: f64 = members.iter().map(|&i| g.node_gen_mw[i]).sum();
        let load: f64 = members.iter().map(|&i| g.node_load_mw[i]).sum();
        if load > 0.0 && gen <= 0.0 {
            feasible = false;
            continue;
        }
        let scale = if gen > 0.0 { load / gen } else { 0.0 };
        for &i in &members {
            node_injection_mw[i] = g.node_gen_mw[i] * scale - g.node_load_mw[i];
        }
        served += load;
        generation += gen * scale;
        if members.len() == 1 {
            continue;
        }

        // Local indexing; member 0 is the reference.
        let local = |node: usize| members.binary_search(&node).ok();
        let m = members.len() - 1;
        let mut b = vec![0.0; m * m];
        let mut p: Vec<f64> = members[1..].iter().map(|&i| node_injection_mw[i]).collect();
        for e in g.edges.iter().filter(|e| labels[e.from] == c) {
            if e.from == e.to {
                continue;
            }
            let y = 1.0 / e.reactance;
            let (a, z) = (local(e.from).unwrap(), local(e.to).unwrap());
            if a > 0 {
                b[(a - 1) * m + (a - 1)] += y;
            }
            if z > 0 {
                b[(z - 1) * m + (z - 1)] += y;
            }
            if a > 0 && z > 0 {
                b[(a - 1) * m + (z - 1)] -= y;
                b[(z - 1) * m + (a - 1)] -= y;
            }
        }
        if !solve_in_place(&mut b, &mut p, m) {
            feasible = false;
            continue;
        }
        let theta = |node: usize| match local(node).unwrap() {
            0 => 0.0,
            k => p[k - 1],
        };
        for e in g.edges.iter().filter(|e| labels[e.from] == c) {
            flow_mw[e.line] = if e.from == e.to { 0.0 } else { (theta(e.from) - theta(e.to)) / e.reactance };
        }
    }

    let mut rho = vec![0.0; g.n_lines];
    for e in &g.edges {
        rho[e.line] = flow_mw[e.line].abs() / e.limit_mw;
    }
    if flow_mw.iter().any(|f| !f.is_finite()) {
        feasible = false;
    }
    PowerFlowResult { flow_mw, rho, feasible, node_injection_mw, served_load_mw: served, generation_mw: generation }
}

/// Gaussian elimination with partial pivoting on a row-major `m x m` system.
/// The solution overwrites `rhs`. Returns false on a (numerically) singular
/// matrix.
fn solve_in_place(a: &mut [f64], rhs: &mut [f64], m: usize) -> bool {
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
    for col in 0..m {
        let pivot = (col..m).max_by(|&i, &j| a[i * m + col].abs().total_cmp(&a[j * m + col].abs())).unwrap();
        if a[pivot * m + col].abs() <= 1e-12 * scale {
            return false;
        }
        if pivot != col {
            for k in 0..m {
                a.swap(pivot * m + k, col * m + k);
            }
            rhs.swap(pivot, col);
        }
        let d = a[col * m + col];
        for row in col + 1..m {
            let f = a[row * m + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..m {
                a[row * m + k] -= f * a[col * m + k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    for row in (0..m).rev() {
        let mut s = rhs[row];
        for k in row + 1..m {
            s -= a[row * m + k] * rhs[k];
        }
        rhs[row] = s / a[row * m + row];
    }
    true
}
