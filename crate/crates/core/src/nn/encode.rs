//! Observation → graph encoding.
//!
//! One row per electrical node, in node order of the electrical graph:
//!
//! | column          | content                                          |
//! |-----------------|--------------------------------------------------|
//! | 0               | net injection / total generator capacity         |
//! | 1               | max ρ over incident in-service lines (0 if none) |
//! | 2               | mean ρ over incident in-service lines            |
//! | 3, 4            | bus one-hot                                      |
//! | 5 ..            | substation one-hot                               |
//!
//! Edges run both ways along every in-service line.

use ndarray::Array2;

use super::{GraphBatch, NnError};
use crate::env::Observation;
use crate::grid::{build_electrical_graph, Bus, GridSpec, Injections};

pub const ENCODING_VERSION: u32 = 1;

pub fn feature_width(spec: &GridSpec) -> usize {
    5 + spec.n_substations()
}

pub fn encode_observation(spec: &GridSpec, obs: &Observation) -> Result<GraphBatch, NnError> {
    let inj = Injections { load_mw: obs.load_mw.clone(), gen_mw: obs.gen_mw.clone() };
    let g = build_electrical_graph(spec, &obs.topology, &inj);
    let n = g.n_nodes();
    let width = feature_width(spec);
    let scale = spec.total_p_max().max(f64::MIN_POSITIVE);
    let mut x = Array2::zeros((n, width));
    let mut rho_max = vec![0.0f64; n];
    let mut rho_sum = vec![0.0; n];
    let mut degree = vec![0usize; n];
    let mut edges = Vec::with_capacity(2 * g.edges.len());
    for e in &g.edges {
        let r = obs.rho[e.line];
        for v in [e.from, e.to] {
            rho_max[v] = rho_max[v].max(r);
            rho_sum[v] += r;
            degree[v] += 1;
        }
        edges.push((e.from, e.to));
        edges.push((e.to, e.from));
    }
    for (i, key) in g.nodes.iter().enumerate() {
        x[[i, 0]] = g.net_injection(i) / scale;
        x[[i, 1]] = rho_max[i];
        x[[i, 2]] = if degree[i] > 0 { rho_sum[i] / degree[i] as f64 } else { 0.0 };
        x[[i, if key.bus == Bus::One { 3 } else { 4 }]] = 1.0;
        x[[i, 5 + key.substation]] = 1.0;
    }
    GraphBatch::new(x, &edges)
}
