//! Minimal differentiable-computation kernel: a tape-based reverse-mode
//! autodiff over 2-D arrays, graph attention blocks, Adam and checkpoints.

mod adam;
mod checkpoint;
mod encode;
mod gnn;
pub mod gradcheck;
mod params;
mod tape;

pub use adam::{soft_update_target, Adam};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC};
pub use encode::{encode_observation, feature_width, ENCODING_VERSION};
pub use gnn::{dense, gnn_block, init_dense, init_gnn_block, mean_pool, GraphBatch, LEAKY_SLOPE};
pub use params::{orthogonal, ParameterSet, Role};
pub use tape::{Bound, Gradients, Tape, Var};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape { op: &'static str, left: (usize, usize), right: (usize, usize) },
    #[error("{op}: index out of range for shape {shape:?}")]
    Index { op: &'static str, shape: (usize, usize) },
    #[error("{0}: empty input")]
    Empty(&'static str),
    #[error("backward called on a value that is not on this tape")]
    NoTrace,
    #[error("no gradient for parameter `{0}`")]
    MissingGradient(String),
    #[error("parameter structure: {0}")]
    Structure(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

#[cfg(test)]
mod tests {
    use super::gradcheck::check_gradients;
    use super::*;
    use crate::rng::{indexed_stream, Stream};
    use ndarray::Array2;
    use rand::Rng;

    #[test]
    fn random_three_layer_gnn_passes_finite_differences() {
        for seed in 0..10 {
            let mut rng = indexed_stream(seed, Stream::Init, 0);
            let mut ps = ParameterSet::new(Role::Shared);
            init_gnn_block(&mut ps, "g0", 3, 4, &mut rng).unwrap();
            init_gnn_block(&mut ps, "g1", 4, 4, &mut rng).unwrap();
            init_dense(&mut ps, "out", 4, 2, 1.0, &mut rng).unwrap();
            for (_, t) in ps.iter_mut() {
                t.mapv_inplace(|v| v + 0.1 * rng.gen_range(-1.0..1.0));
            }
            let x = Array2::from_shape_fn((4, 3), |_| rng.gen_range(-1.0..1.0));
            let a = GraphBatch::new(x.clone(), &[(0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)]).unwrap();
            let b = GraphBatch::new(x.slice(ndarray::s![..2, ..]).to_owned(), &[(0, 1), (1, 0)]).unwrap();
            let g = GraphBatch::concat(&[&a, &b]).unwrap();
            let check = check_gradients(&ps, 1e-5, |t, p| {
                let h = t.leaf(g.features.clone());
                let h = gnn_block(t, p, "g0", h, &g)?;
                let h = gnn_block(t, p, "g1", h, &g)?;
                let pooled = mean_pool(t, h, &g)?;
                let logits = dense(t, p, "out", pooled)?;
                let lp = t.log_softmax(logits);
                let picked = t.gather_cols(lp, &[1, 0])?;
                t.mean(picked)
            })
            .unwrap();
            assert!(check.max_rel_error < 1e-4, "seed {seed}: {check:?}");
        }
    }
}
