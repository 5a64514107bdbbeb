//! Graph batches, the attention message-passing block and dense layers.

use std::rc::Rc;

use ndarray::{concatenate, Array2, Axis};
use rand::Rng;

use super::{orthogonal, Bound, NnError, ParameterSet, Tape, Var};

/// Leaky-relu slope used by every layer.
pub const LEAKY_SLOPE: f64 = 0.01;

/// One or more graphs stacked block-diagonally.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBatch {
    /// `n_nodes × width`.
    pub features: Array2<f64>,
    /// Directed edges `src[k] → dst[k]`, both directions per line.
    pub src: Rc<[usize]>,
    pub dst: Rc<[usize]>,
    pub graph_of_node: Rc<[usize]>,
    pub n_graphs: usize,
}

impl GraphBatch {
    /// A single graph.
    pub fn new(features: Array2<f64>, edges: &[(usize, usize)]) -> Result<Self, NnError> {
        let n = features.nrows();
        if n == 0 {
            return Err(NnError::Empty("graph"));
        }
        if edges.iter().any(|&(a, b)| a >= n || b >= n) {
            return Err(NnError::Index { op: "graph edges", shape: features.dim() });
        }
        Ok(GraphBatch {
            features,
            src: edges.iter().map(|e| e.0).collect(),
            dst: edges.iter().map(|e| e.1).collect(),
            graph_of_node: vec![0; n].into(),
            n_graphs: 1,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_edges(&self) -> usize {
        self.src.len()
    }

    pub fn width(&self) -> usize {
        self.features.ncols()
    }

    /// Block-diagonal union; graph `k` of the result is `parts[k]` when every
    /// part holds one graph.
    pub fn concat(parts: &[&GraphBatch]) -> Result<Self, NnError> {
        let first = parts.first().ok_or(NnError::Empty("graph batch"))?;
        let width = first.width();
        if let Some(p) = parts.iter().find(|p| p.width() != width) {
            return Err(NnError::Shape { op: "concat", left: first.features.dim(), right: p.features.dim() });
        }
        let views: Vec<_> = parts.iter().map(|p| p.features.view()).collect();
        let features = concatenate(Axis(0), &views).expect("widths checked");
        let (mut src, mut dst, mut gid) = (Vec::new(), Vec::new(), Vec::new());
        let (mut node_off, mut graph_off) = (0, 0);
        for p in parts {
            src.extend(p.src.iter().map(|&s| s + node_off));
            dst.extend(p.dst.iter().map(|&d| d + node_off));
            gid.extend(p.graph_of_node.iter().map(|&g| g + graph_off));
            node_off += p.n_nodes();
            graph_off += p.n_graphs;
        }
        Ok(GraphBatch { features, src: src.into(), dst: dst.into(), graph_of_node: gid.into(), n_graphs: graph_off })
    }
}

pub fn init_dense<R: Rng>(
    ps: &mut ParameterSet,
    prefix: &str,
    fan_in: usize,
    fan_out: usize,
    gain: f64,
    rng: &mut R,
) -> Result<(), NnError> {
    ps.insert(format!("{prefix}.w"), orthogonal(rng, fan_in, fan_out, gain))?;
    ps.insert(format!("{prefix}.b"), Array2::zeros((1, fan_out)))
}

/// `x·W + b`.
pub fn dense(tape: &mut Tape, p: &Bound, prefix: &str, x: Var) -> Result<Var, NnError> {
    let y = tape.matmul(x, p.get(&format!("{prefix}.w"))?)?;
    tape.add_row(y, p.get(&format!("{prefix}.b"))?)
}

pub fn init_gnn_block<R: Rng>(
    ps: &mut ParameterSet,
    prefix: &str,
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Result<(), NnError> {
    ps.insert(format!("{prefix}.w_self"), orthogonal(rng, fan_in, fan_out, 1.0))?;
    ps.insert(format!("{prefix}.w_msg"), orthogonal(rng, fan_in, fan_out, 1.0))?;
    ps.insert(format!("{prefix}.a_self"), orthogonal(rng, fan_out, 1, 1.0))?;
    ps.insert(format!("{prefix}.a_msg"), orthogonal(rng, fan_out, 1, 1.0))?;
    ps.insert(format!("{prefix}.b"), Array2::zeros((1, fan_out)))
}

/// One attention message-passing block over `g`'s edges:
///
/// ```text
/// S = H·W_self, M = H·W_msg
/// e_ij = leaky(S_i·a_self + M_j·a_msg)      for each edge j → i
/// α_ij = softmax of e_ij over the in-edges of i
/// H'_i = leaky(S_i + Σ_j α_ij·M_j + b) (+ H_i when widths match)
/// ```
pub fn gnn_block(tape: &mut Tape, p: &Bound, prefix: &str, h: Var, g: &GraphBatch) -> Result<Var, NnError> {
    let n = tape.value(h).nrows();
    if n == 0 {
        return Err(NnError::Empty("graph"));
    }
    let s = tape.matmul(h, p.get(&format!("{prefix}.w_self"))?)?;
    let m = tape.matmul(h, p.get(&format!("{prefix}.w_msg"))?)?;
    let mut pre = s;
    if g.n_edges() > 0 {
        let s_score = tape.matmul(s, p.get(&format!("{prefix}.a_self"))?)?;
        let m_score = tape.matmul(m, p.get(&format!("{prefix}.a_msg"))?)?;
        let e_dst = tape.gather_rows(s_score, &g.dst)?;
        let e_src = tape.gather_rows(m_score, &g.src)?;
        let e = tape.add(e_dst, e_src)?;
        let e = tape.leaky_relu(e, LEAKY_SLOPE);
        let alpha = tape.segment_softmax(e, &g.dst, n)?;
        let msg = tape.gather_rows(m, &g.src)?;
        let msg = tape.mul_col(msg, alpha)?;
        let agg = tape.scatter_add_rows(msg, &g.dst, n)?;
        pre = tape.add(pre, agg)?;
    }
    let pre = tape.add_row(pre, p.get(&format!("{prefix}.b"))?)?;
    let out = tape.leaky_relu(pre, LEAKY_SLOPE);
    if tape.value(out).ncols() == tape.value(h).ncols() {
        tape.add(out, h)
    } else {
        Ok(out)
    }
}

/// Mean of node rows per graph: `n_graphs × width`.
pub fn mean_pool(tape: &mut Tape, h: Var, g: &GraphBatch) -> Result<Var, NnError> {
    tape.segment_mean(h, &g.graph_of_node, g.n_graphs)
}
