//! Reverse-mode automatic differentiation over 2-D `f64` arrays.
//!
//! Every value lives on a [`Tape`] as a node holding its forward result and
//! the operation that produced it. [`Tape::backward`] walks the nodes in
//! reverse and returns the gradient of a scalar with respect to every node.

use std::collections::BTreeMap;
use std::rc::Rc;

use ndarray::{Array2, Axis, Zip};

use super::{NnError, ParameterSet};

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulCol(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    LeakyRelu(Var, f64),
    Exp(Var),
    Log(Var),
    LogSoftmax(Var),
    Sum(Var),
    Mean(Var),
    RowSum(Var),
    GatherCols(Var, Rc<[usize]>),
    GatherRows(Var, Rc<[usize]>),
    ScatterAddRows(Var, Rc<[usize]>),
    SegmentSoftmax(Var, Rc<[usize]>),
    SegmentMean(Var, Rc<[usize]>, Rc<[f64]>),
    Minimum(Var, Var),
    Clamp(Var, f64, f64),
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
}

/// Parameters of a [`ParameterSet`] placed on a tape, by name.
#[derive(Debug, Clone, Default)]
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    pub fn get(&self, name: &str) -> Result<Var, NnError> {
        self.vars.get(name).copied().ok_or_else(|| NnError::Structure(format!("parameter `{name}` is not bound")))
    }

    /// Gradients of the bound parameters, zero where the loss does not depend
    /// on them.
    pub fn gradients(&self, grads: &Gradients) -> BTreeMap<String, Array2<f64>> {
        self.vars
            .iter()
            .map(|(name, &v)| {
                let g = grads.get(v).cloned().unwrap_or_else(|| Array2::zeros(grads.shape_of(v)));
                (name.clone(), g)
            })
            .collect()
    }
}

/// Gradients of one scalar with respect to every node of a tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    fn shape_of(&self, v: Var) -> (usize, usize) {
        self.shapes[v.0]
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape(a: &Array2<f64>) -> (usize, usize) {
    a.dim()
}

fn mismatch(op: &'static str, a: &Array2<f64>, b: &Array2<f64>) -> NnError {
    NnError::Shape { op, left: shape(a), right: shape(b) }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Scalar value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    /// A constant or input. Gradients reach it but go no further.
    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// A leaf holding a copy of `v`'s value, cutting the gradient path.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.leaf(value)
    }

    /// Places every tensor of `params` on the tape as a leaf.
    pub fn bind(&mut self, params: &ParameterSet) -> Bound {
        let vars = params.iter().map(|(name, t)| (name.to_string(), self.leaf(t.clone()))).collect();
        Bound { vars }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.ncols() != y.nrows() {
            return Err(mismatch("matmul", x, y));
        }
        let v = x.dot(y);
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.dim() != y.dim() {
            return Err(mismatch("add", x, y));
        }
        let v = x + y;
        Ok(self.push(v, Op::Add(a, b)))
    }

    /// Adds a 1×n row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, NnError> {
        let (x, r) = (self.value(a), self.value(row));
        if r.nrows() != 1 || r.ncols() != x.ncols() {
            return Err(mismatch("add_row", x, r));
        }
        let v = x + r;
        Ok(self.push(v, Op::AddRow(a, row)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.dim() != y.dim() {
            return Err(mismatch("sub", x, y));
        }
        let v = x - y;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.dim() != y.dim() {
            return Err(mismatch("mul", x, y));
        }
        let v = x * y;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    /// Multiplies row `i` of `a` by `col[i]` (an n×1 column).
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var, NnError> {
        let (x, c) = (self.value(a), self.value(col));
        if c.ncols() != 1 || c.nrows() != x.nrows() {
            return Err(mismatch("mul_col", x, c));
        }
        let v = x * c;
        Ok(self.push(v, Op::MulCol(a, col)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.push(v, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) + c;
        self.push(v, Op::AddScalar(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let v = self.value(a).mapv(|x| if x > 0.0 { x } else { slope * x });
        self.push(v, Op::LeakyRelu(a, slope))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::ln);
        self.push(v, Op::Log(a))
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for mut row in v.rows_mut() {
            let m = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            let lse = m + row.iter().map(|&x| (x - m).exp()).sum::<f64>().ln();
            row.mapv_inplace(|x| x - lse);
        }
        self.push(v, Op::LogSoftmax(a))
    }

    /// Row-wise softmax, as the exponential of [`Tape::log_softmax`].
    pub fn softmax(&mut self, a: Var) -> Var {
        let l = self.log_softmax(a);
        self.exp(l)
    }

    /// Sum of all entries, as 1×1.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Array2::from_elem((1, 1), s), Op::Sum(a))
    }

    /// Mean of all entries, as 1×1.
    pub fn mean(&mut self, a: Var) -> Result<Var, NnError> {
        let x = self.value(a);
        if x.is_empty() {
            return Err(NnError::Empty("mean"));
        }
        let m = x.sum() / x.len() as f64;
        Ok(self.push(Array2::from_elem((1, 1), m), Op::Mean(a)))
    }

    /// Row sums, as an n×1 column.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let v = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(v, Op::RowSum(a))
    }

    /// Picks `a[i, idx[i]]` for every row, as an n×1 column.
    pub fn gather_cols(&mut self, a: Var, idx: &[usize]) -> Result<Var, NnError> {
        let x = self.value(a);
        if idx.len() != x.nrows() || idx.iter().any(|&j| j >= x.ncols()) {
            return Err(NnError::Index { op: "gather_cols", shape: shape(x) });
        }
        let v = Array2::from_shape_fn((idx.len(), 1), |(i, _)| x[[i, idx[i]]]);
        Ok(self.push(v, Op::GatherCols(a, idx.into())))
    }

    /// Stacks rows `a[idx[k]]`.
    pub fn gather_rows(&mut self, a: Var, idx: &Rc<[usize]>) -> Result<Var, NnError> {
        let x = self.value(a);
        if idx.iter().any(|&i| i >= x.nrows()) {
            return Err(NnError::Index { op: "gather_rows", shape: shape(x) });
        }
        let v = x.select(Axis(0), idx);
        Ok(self.push(v, Op::GatherRows(a, idx.clone())))
    }

    /// `out[idx[k]] += a[k]` into `n_out` zero rows.
    pub fn scatter_add_rows(&mut self, a: Var, idx: &Rc<[usize]>, n_out: usize) -> Result<Var, NnError> {
        let x = self.value(a);
        if idx.len() != x.nrows() || idx.iter().any(|&i| i >= n_out) {
            return Err(NnError::Index { op: "scatter_add_rows", shape: shape(x) });
        }
        let mut v = Array2::zeros((n_out, x.ncols()));
        for (k, &i) in idx.iter().enumerate() {
            let mut row = v.row_mut(i);
            row += &x.row(k);
        }
        Ok(self.push(v, Op::ScatterAddRows(a, idx.clone())))
    }

    /// Softmax of an m×1 column within groups of entries sharing a segment id.
    pub fn segment_softmax(&mut self, a: Var, seg: &Rc<[usize]>, n_seg: usize) -> Result<Var, NnError> {
        let x = self.value(a);
        if x.ncols() != 1 || seg.len() != x.nrows() || seg.iter().any(|&s| s >= n_seg) {
            return Err(NnError::Index { op: "segment_softmax", shape: shape(x) });
        }
        let mut max = vec![f64::NEG_INFINITY; n_seg];
        for (k, &s) in seg.iter().enumerate() {
            max[s] = max[s].max(x[[k, 0]]);
        }
        let mut v = Array2::zeros(x.dim());
        let mut total = vec![0.0; n_seg];
        for (k, &s) in seg.iter().enumerate() {
            let e = (x[[k, 0]] - max[s]).exp();
            v[[k, 0]] = e;
            total[s] += e;
        }
        for (k, &s) in seg.iter().enumerate() {
            v[[k, 0]] /= total[s];
        }
        Ok(self.push(v, Op::SegmentSoftmax(a, seg.clone())))
    }

    /// Mean of the rows of `a` sharing a segment id; every segment must be
    /// nonempty.
    pub fn segment_mean(&mut self, a: Var, seg: &Rc<[usize]>, n_seg: usize) -> Result<Var, NnError> {
        let x = self.value(a);
        if seg.len() != x.nrows() || seg.iter().any(|&s| s >= n_seg) {
            return Err(NnError::Index { op: "segment_mean", shape: shape(x) });
        }
        let mut count = vec![0usize; n_seg];
        for &s in seg.iter() {
            count[s] += 1;
        }
        if count.contains(&0) {
            return Err(NnError::Empty("segment_mean"));
        }
        let inv: Rc<[f64]> = count.iter().map(|&c| 1.0 / c as f64).collect();
        let mut v = Array2::zeros((n_seg, x.ncols()));
        for (k, &s) in seg.iter().enumerate() {
            let mut row = v.row_mut(s);
            row.scaled_add(inv[s], &x.row(k));
        }
        Ok(self.push(v, Op::SegmentMean(a, seg.clone(), inv)))
    }

    /// Elementwise minimum; ties route the gradient to `a`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.dim() != y.dim() {
            return Err(mismatch("minimum", x, y));
        }
        let v = Zip::from(x).and(y).map_collect(|&p, &q| p.min(q));
        Ok(self.push(v, Op::Minimum(a, b)))
    }

    /// Clamps into `[lo, hi]`; the gradient is zero outside the open
    /// interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let v = self.value(a).mapv(|x| x.clamp(lo, hi));
        self.push(v, Op::Clamp(a, lo, hi))
    }

    /// Gradients of the 1×1 node `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NnError> {
        let root = self.nodes.get(loss.0).ok_or(NnError::NoTrace)?;
        if root.value.dim() != (1, 1) {
            return Err(NnError::Shape { op: "backward", left: root.value.dim(), right: (1, 1) });
        }
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array2::ones((1, 1)));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let y = &node.value;
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g.clone());
                }
                Op::AddRow(a, r) => {
                    acc(&mut grads, *r, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *a, g.clone());
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, -&g);
                    acc(&mut grads, *a, g.clone());
                }
                Op::Mul(a, b) => {
                    acc(&mut grads, *a, &g * self.value(*b));
                    acc(&mut grads, *b, &g * self.value(*a));
                }
                Op::MulCol(a, c) => {
                    let gc = (&g * self.value(*a)).sum_axis(Axis(1)).insert_axis(Axis(1));
                    acc(&mut grads, *a, &g * self.value(*c));
                    acc(&mut grads, *c, gc);
                }
                Op::Scale(a, c) => acc(&mut grads, *a, &g * *c),
                Op::AddScalar(a) => acc(&mut grads, *a, g.clone()),
                Op::LeakyRelu(a, slope) => {
                    let x = self.value(*a);
                    let ga = Zip::from(&g).and(x).map_collect(|&g, &x| if x > 0.0 { g } else { slope * g });
                    acc(&mut grads, *a, ga);
                }
                Op::Exp(a) => acc(&mut grads, *a, &g * y),
                Op::Log(a) => acc(&mut grads, *a, &g / self.value(*a)),
                Op::LogSoftmax(a) => {
                    let gsum = g.sum_axis(Axis(1)).insert_axis(Axis(1));
                    let ga = &g - &(y.mapv(f64::exp) * &gsum);
                    acc(&mut grads, *a, ga);
                }
                Op::Sum(a) => {
                    let d = self.value(*a).dim();
                    acc(&mut grads, *a, Array2::from_elem(d, g[[0, 0]]));
                }
                Op::Mean(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, Array2::from_elem(x.dim(), g[[0, 0]] / x.len() as f64));
                }
                Op::RowSum(a) => {
                    let d = self.value(*a).dim();
                    let ga = Array2::from_shape_fn(d, |(r, _)| g[[r, 0]]);
                    acc(&mut grads, *a, ga);
                }
                Op::GatherCols(a, idx) => {
                    let mut ga = Array2::zeros(self.value(*a).dim());
                    for (r, &c) in idx.iter().enumerate() {
                        ga[[r, c]] = g[[r, 0]];
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::GatherRows(a, idx) => {
                    let mut ga = Array2::zeros(self.value(*a).dim());
                    for (k, &r) in idx.iter().enumerate() {
                        let mut row = ga.row_mut(r);
                        row += &g.row(k);
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::ScatterAddRows(a, idx) => {
                    let ga = g.select(Axis(0), idx);
                    acc(&mut grads, *a, ga);
                }
                Op::SegmentSoftmax(a, seg) => {
                    let n_seg = seg.iter().copied().max().map_or(0, |m| m + 1);
                    let mut dot = vec![0.0; n_seg];
                    for (k, &s) in seg.iter().enumerate() {
                        dot[s] += y[[k, 0]] * g[[k, 0]];
                    }
                    let ga = Array2::from_shape_fn(y.dim(), |(k, _)| y[[k, 0]] * (g[[k, 0]] - dot[seg[k]]));
                    acc(&mut grads, *a, ga);
                }
                Op::SegmentMean(a, seg, inv) => {
                    let mut ga = g.select(Axis(0), seg);
                    for (k, &s) in seg.iter().enumerate() {
                        ga.row_mut(k).mapv_inplace(|v| v * inv[s]);
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Minimum(a, b) => {
                    let (x, z) = (self.value(*a), self.value(*b));
                    let ga = Zip::from(&g).and(x).and(z).map_collect(|&g, &x, &z| if x <= z { g } else { 0.0 });
                    let gb = Zip::from(&g).and(x).and(z).map_collect(|&g, &x, &z| if x <= z { 0.0 } else { g });
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Clamp(a, lo, hi) => {
                    let x = self.value(*a);
                    let ga = Zip::from(&g).and(x).map_collect(|&g, &x| if x > *lo && x < *hi { g } else { 0.0 });
                    acc(&mut grads, *a, ga);
                }
            }
            // Leaves keep their gradient for the caller.
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
            }
        }
        let shapes = self.nodes.iter().map(|n| n.value.dim()).collect();
        Ok(Gradients { grads, shapes })
    }
}

fn acc(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
    match &mut grads[v.0] {
        Some(existing) => *existing += &g,
        slot @ None => *slot = Some(g),
    }
}
