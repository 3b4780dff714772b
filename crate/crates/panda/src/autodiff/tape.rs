//! Recording tape for reverse-mode differentiation.
//!
//! A [`Tape`] is rebuilt for every forward pass: operations append nodes
//! holding the forward value plus whatever the backward rule needs, and
//! [`Tape::backward`] walks the records in reverse. Handles ([`Value`])
//! are plain indices into the tape.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::tensor::Tensor;

#[derive(Debug, Error)]
pub enum TapeError {
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    Shape { op: &'static str, lhs: (usize, usize), rhs: (usize, usize) },
    #[error("{op}: {msg}")]
    Size { op: &'static str, msg: String },
    #[error("{op}: index {index} out of range for {bound} rows/cols")]
    Index { op: &'static str, index: usize, bound: usize },
    #[error("backward root must be a scalar, got {0}x{1}")]
    NonScalarRoot(usize, usize),
    #[error("non-finite value encountered in {op}")]
    NonFinite { op: &'static str },
}

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Value(usize);

/// Softmax orientation: `Rows` normalises within each row, `Cols` within
/// each column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

enum Op {
    Leaf,
    MatMul(Value, Value),
    Add(Value, Value),
    /// Broadcast a 1xC bias over every row.
    AddBias(Value, Value),
    Scale(Value, f64),
    /// Multiply by a 1x1 tape value (broadcast).
    MulScalar(Value, Value),
    /// Multiply row i by the constant `coeffs[i]` (not differentiated
    /// w.r.t. the coefficients).
    RowScale(Value, Vec<f64>),
    ConcatCols(Value, Value),
    ConcatRows(Value, Value),
    RowGather(Value, Vec<usize>),
    RowScatterAdd(Value, Vec<usize>),
    /// Per-row column gather: `out[i][j] = a[i][idx[i * out_cols + j]]`.
    GatherCols(Value, Vec<usize>),
    Relu(Value),
    Sigmoid(Value),
    Tanh(Value),
    Softmax(Value, Axis),
    MeanRows(Value),
    SumRows(Value),
    /// Mask entries are 0 or 1/keep (inverted dropout).
    Dropout(Value, Vec<f64>),
    CrossEntropyLogits(Value, Vec<usize>),
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Gradients produced by a backward pass, indexed by [`Value`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient for `v`; zeros if nothing flowed into it.
    pub fn get(&self, v: Value) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Tensor::zeros(r, c)
            }
        }
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Forward value of a node.
    pub fn value(&self, v: Value) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Insert a leaf. Gradients are tracked through it iff `requires_grad`.
    pub fn leaf(&mut self, t: Tensor, requires_grad: bool) -> Value {
        self.push(t, Op::Leaf, requires_grad)
    }

    /// Leaf with gradient tracking (model parameters, probed inputs).
    pub fn param(&mut self, t: Tensor) -> Value {
        self.leaf(t, true)
    }

    /// Leaf without gradient tracking.
    pub fn constant(&mut self, t: Tensor) -> Value {
        self.leaf(t, false)
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Value {
        self.nodes.push(Node { value, op, needs_grad });
        Value(self.nodes.len() - 1)
    }

    fn needs(&self, v: Value) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn matmul(&mut self, a: Value, b: Value) -> Result<Value, TapeError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.rows() {
            return Err(TapeError::Shape { op: "matmul", lhs: ta.shape(), rhs: tb.shape() });
        }
        let out = ta.matmul(tb);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::MatMul(a, b), needs))
    }

    pub fn add(&mut self, a: Value, b: Value) -> Result<Value, TapeError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(TapeError::Shape { op: "add", lhs: ta.shape(), rhs: tb.shape() });
        }
        let mut out = ta.clone();
        out.add_scaled(tb, 1.0);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Add(a, b), needs))
    }

    /// `a + bias` with `bias` a 1xC row broadcast over all rows of `a`.
    pub fn add_bias(&mut self, a: Value, bias: Value) -> Result<Value, TapeError> {
        let (ta, tb) = (self.value(a), self.value(bias));
        if tb.rows() != 1 || ta.cols() != tb.cols() {
            return Err(TapeError::Shape { op: "add_bias", lhs: ta.shape(), rhs: tb.shape() });
        }
        let mut out = ta.clone();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            for (o, &b) in row.iter_mut().zip(tb.data()) {
                *o += b;
            }
        }
        let needs = self.needs(a) || self.needs(bias);
        Ok(self.push(out, Op::AddBias(a, bias), needs))
    }

    pub fn scale(&mut self, a: Value, factor: f64) -> Value {
        let mut out = self.value(a).clone();
        out.scale_in_place(factor);
        let needs = self.needs(a);
        self.push(out, Op::Scale(a, factor), needs)
    }

    /// Broadcast-multiply `a` by the scalar tape value `s` (1x1).
    pub fn mul_scalar(&mut self, a: Value, s: Value) -> Result<Value, TapeError> {
        let ts = self.value(s);
        if !ts.is_scalar() {
            return Err(TapeError::Shape { op: "mul_scalar", lhs: self.value(a).shape(), rhs: ts.shape() });
        }
        let sv = ts.scalar_value();
        let mut out = self.value(a).clone();
        out.scale_in_place(sv);
        let needs = self.needs(a) || self.needs(s);
        Ok(self.push(out, Op::MulScalar(a, s), needs))
    }

    /// Scale row `i` of `a` by `coeffs[i]`. The coefficients are treated
    /// as constants.
    pub fn row_scale(&mut self, a: Value, coeffs: Vec<f64>) -> Result<Value, TapeError> {
        let ta = self.value(a);
        if coeffs.len() != ta.rows() {
            return Err(TapeError::Size {
                op: "row_scale",
                msg: format!("{} coefficients for {} rows", coeffs.len(), ta.rows()),
            });
        }
        let mut out = ta.clone();
        for (r, &c) in coeffs.iter().enumerate() {
            for v in out.row_mut(r) {
                *v *= c;
            }
        }
        let needs = self.needs(a);
        Ok(self.push(out, Op::RowScale(a, coeffs), needs))
    }

    pub fn concat_cols(&mut self, a: Value, b: Value) -> Result<Value, TapeError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rows() != tb.rows() {
            return Err(TapeError::Shape { op: "concat_cols", lhs: ta.shape(), rhs: tb.shape() });
        }
        let (rows, ca, cb) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = Tensor::zeros(rows, ca + cb);
        for r in 0..rows {
            out.row_mut(r)[..ca].copy_from_slice(ta.row(r));
            out.row_mut(r)[ca..].copy_from_slice(tb.row(r));
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::ConcatCols(a, b), needs))
    }

    pub fn concat_rows(&mut self, a: Value, b: Value) -> Result<Value, TapeError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.cols() {
            return Err(TapeError::Shape { op: "concat_rows", lhs: ta.shape(), rhs: tb.shape() });
        }
        let mut data = ta.data().to_vec();
        data.extend_from_slice(tb.data());
        let out = Tensor::from_vec(ta.rows() + tb.rows(), ta.cols(), data);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::ConcatRows(a, b), needs))
    }

    /// `out[i] = a[indices[i]]`.
    pub fn row_gather(&mut self, a: Value, indices: Vec<usize>) -> Result<Value, TapeError> {
        let ta = self.value(a);
        let mut out = Tensor::zeros(indices.len(), ta.cols());
        for (i, &src) in indices.iter().enumerate() {
            if src >= ta.rows() {
                return Err(TapeError::Index { op: "row_gather", index: src, bound: ta.rows() });
            }
            out.row_mut(i).copy_from_slice(ta.row(src));
        }
        let needs = self.needs(a);
        Ok(self.push(out, Op::RowGather(a, indices), needs))
    }

    /// `out[indices[i]] += a[i]` into a fresh zero tensor with `rows`
    /// rows. Exact adjoint of [`Tape::row_gather`].
    pub fn row_scatter_add(
        &mut self,
        a: Value,
        indices: Vec<usize>,
        rows: usize,
    ) -> Result<Value, TapeError> {
        let ta = self.value(a);
        if indices.len() != ta.rows() {
            return Err(TapeError::Size {
                op: "row_scatter_add",
                msg: format!("{} indices for {} rows", indices.len(), ta.rows()),
            });
        }
        let mut out = Tensor::zeros(rows, ta.cols());
        for (i, &dst) in indices.iter().enumerate() {
            if dst >= rows {
                return Err(TapeError::Index { op: "row_scatter_add", index: dst, bound: rows });
            }
            let src = ta.row(i);
            let drow = out.row_mut(dst);
            for (d, &s) in drow.iter_mut().zip(src) {
                *d += s;
            }
        }
        let needs = self.needs(a);
        Ok(self.push(out, Op::RowScatterAdd(a, indices), needs))
    }

    /// Per-row column selection: `out[i][j] = a[i][idx[i * out_cols + j]]`.
    pub fn gather_cols(
        &mut self,
        a: Value,
        indices: Vec<usize>,
        out_cols: usize,
    ) -> Result<Value, TapeError> {
        let ta = self.value(a);
        if indices.len() != ta.rows() * out_cols {
            return Err(TapeError::Size {
                op: "gather_cols",
                msg: format!(
                    "{} indices for {} rows x {} cols",
                    indices.len(),
                    ta.rows(),
                    out_cols
                ),
            });
        }
        let mut out = Tensor::zeros(ta.rows(), out_cols);
        for i in 0..ta.rows() {
            for j in 0..out_cols {
                let src = indices[i * out_cols + j];
                if src >= ta.cols() {
                    return Err(TapeError::Index { op: "gather_cols", index: src, bound: ta.cols() });
                }
                out.set(i, j, ta.get(i, src));
            }
        }
        let needs = self.needs(a);
        Ok(self.push(out, Op::GatherCols(a, indices), needs))
    }

    pub fn relu(&mut self, a: Value) -> Value {
        let mut out = self.value(a).clone();
        for v in out.data_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let needs = self.needs(a);
        self.push(out, Op::Relu(a), needs)
    }

    pub fn sigmoid(&mut self, a: Value) -> Value {
        let mut out = self.value(a).clone();
        for v in out.data_mut() {
            *v = 1.0 / (1.0 + (-*v).exp());
        }
        let needs = self.needs(a);
        self.push(out, Op::Sigmoid(a), needs)
    }

    pub fn tanh(&mut self, a: Value) -> Value {
        let mut out = self.value(a).clone();
        for v in out.data_mut() {
            *v = v.tanh();
        }
        let needs = self.needs(a);
        self.push(out, Op::Tanh(a), needs)
    }

    pub fn softmax(&mut self, a: Value, axis: Axis) -> Result<Value, TapeError> {
        let ta = self.value(a);
        let empty = match axis {
            Axis::Rows => ta.cols() == 0,
            Axis::Cols => ta.rows() == 0,
        };
        if empty {
            return Err(TapeError::Size { op: "softmax", msg: "empty axis".into() });
        }
        let out = match axis {
            Axis::Rows => {
                let mut out = ta.clone();
                for r in 0..out.rows() {
                    softmax_slice(out.row_mut(r));
                }
                out
            }
            Axis::Cols => {
                let mut t = ta.transpose();
                for r in 0..t.rows() {
                    softmax_slice(t.row_mut(r));
                }
                t.transpose()
            }
        };
        let needs = self.needs(a);
        Ok(self.push(out, Op::Softmax(a, axis), needs))
    }

    /// Column means over all rows: RxC -> 1xC.
    pub fn mean_rows(&mut self, a: Value) -> Result<Value, TapeError> {
        let ta = self.value(a);
        if ta.rows() == 0 {
            return Err(TapeError::Size { op: "mean_rows", msg: "no rows".into() });
        }
        let mut out = Tensor::zeros(1, ta.cols());
        for r in 0..ta.rows() {
            out.row_mut(0).iter_mut().zip(ta.row(r)).for_each(|(o, &v)| *o += v);
        }
        out.scale_in_place(1.0 / ta.rows() as f64);
        let needs = self.needs(a);
        Ok(self.push(out, Op::MeanRows(a), needs))
    }

    /// Column sums over all rows: RxC -> 1xC.
    pub fn sum_rows(&mut self, a: Value) -> Result<Value, TapeError> {
        let ta = self.value(a);
        if ta.rows() == 0 {
            return Err(TapeError::Size { op: "sum_rows", msg: "no rows".into() });
        }
        let mut out = Tensor::zeros(1, ta.cols());
        for r in 0..ta.rows() {
            out.row_mut(0).iter_mut().zip(ta.row(r)).for_each(|(o, &v)| *o += v);
        }
        let needs = self.needs(a);
        Ok(self.push(out, Op::SumRows(a), needs))
    }

    /// Inverted dropout: with `rate` = 0 this is the identity; a fixed
    /// seed gives a fixed mask.
    pub fn dropout(&mut self, a: Value, rate: f64, seed: u64) -> Result<Value, TapeError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TapeError::Size { op: "dropout", msg: format!("rate {rate} not in [0, 1)") });
        }
        let ta = self.value(a);
        let mask: Vec<f64> = if rate == 0.0 {
            vec![1.0; ta.len()]
        } else {
            let keep = 1.0 - rate;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..ta.len())
                .map(|_| if rng.random_range(0.0..1.0) < rate { 0.0 } else { 1.0 / keep })
                .collect()
        };
        let mut out = ta.clone();
        for (v, &m) in out.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        let needs = self.needs(a);
        Ok(self.push(out, Op::Dropout(a, mask), needs))
    }

    /// Mean cross-entropy of row-wise logits against integer labels.
    pub fn cross_entropy_logits(
        &mut self,
        logits: Value,
        labels: &[usize],
    ) -> Result<Value, TapeError> {
        let ta = self.value(logits);
        if labels.len() != ta.rows() {
            return Err(TapeError::Size {
                op: "cross_entropy_logits",
                msg: format!("{} labels for {} rows", labels.len(), ta.rows()),
            });
        }
        if ta.cols() == 0 {
            return Err(TapeError::Size { op: "cross_entropy_logits", msg: "no classes".into() });
        }
        let mut total = 0.0;
        for (r, &label) in labels.iter().enumerate() {
            if label >= ta.cols() {
                return Err(TapeError::Index {
                    op: "cross_entropy_logits",
                    index: label,
                    bound: ta.cols(),
                });
            }
            let row = ta.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[label];
        }
        let out = Tensor::scalar(total / labels.len() as f64);
        if !out.all_finite() {
            return Err(TapeError::NonFinite { op: "cross_entropy_logits" });
        }
        let needs = self.needs(logits);
        Ok(self.push(out, Op::CrossEntropyLogits(logits, labels.to_vec()), needs))
    }

    /// Backward pass from a scalar root with seed 1.
    pub fn backward(&self, root: Value) -> Result<Gradients, TapeError> {
        let t = self.value(root);
        if !t.is_scalar() {
            return Err(TapeError::NonScalarRoot(t.rows(), t.cols()));
        }
        self.backward_seeded(root, Tensor::scalar(1.0))
    }

    /// Backward pass with an explicit upstream seed (shape must match the
    /// root value). Used to extract one Jacobian row at a time.
    pub fn backward_seeded(&self, root: Value, seed: Tensor) -> Result<Gradients, TapeError> {
        if seed.shape() != self.value(root).shape() {
            return Err(TapeError::Shape {
                op: "backward_seeded",
                lhs: seed.shape(),
                rhs: self.value(root).shape(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(seed);
        for i in (0..=root.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(go) = grads[i].take() else { continue };
            self.propagate(i, &go, &mut grads);
            grads[i] = Some(go);
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Value, update: Tensor) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(g) => g.add_scaled(&update, 1.0),
            slot @ None => *slot = Some(update),
        }
    }

    fn propagate(&self, i: usize, go: &Tensor, grads: &mut [Option<Tensor>]) {
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.needs(*a) {
                    let da = go.matmul(&self.value(*b).transpose());
                    self.accumulate(grads, *a, da);
                }
                if self.needs(*b) {
                    let db = self.value(*a).transpose().matmul(go);
                    self.accumulate(grads, *b, db);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, go.clone());
                self.accumulate(grads, *b, go.clone());
            }
            Op::AddBias(a, bias) => {
                self.accumulate(grads, *a, go.clone());
                if self.needs(*bias) {
                    let mut db = Tensor::zeros(1, go.cols());
                    for r in 0..go.rows() {
                        db.row_mut(0).iter_mut().zip(go.row(r)).for_each(|(d, &g)| *d += g);
                    }
                    self.accumulate(grads, *bias, db);
                }
            }
            Op::Scale(a, f) => {
                let mut da = go.clone();
                da.scale_in_place(*f);
                self.accumulate(grads, *a, da);
            }
            Op::MulScalar(a, s) => {
                if self.needs(*a) {
                    let mut da = go.clone();
                    da.scale_in_place(self.value(*s).scalar_value());
                    self.accumulate(grads, *a, da);
                }
                if self.needs(*s) {
                    let ta = self.value(*a);
                    let ds: f64 = go.data().iter().zip(ta.data()).map(|(g, v)| g * v).sum();
                    self.accumulate(grads, *s, Tensor::scalar(ds));
                }
            }
            Op::RowScale(a, coeffs) => {
                let mut da = go.clone();
                for (r, &c) in coeffs.iter().enumerate() {
                    for v in da.row_mut(r) {
                        *v *= c;
                    }
                }
                self.accumulate(grads, *a, da);
            }
            Op::ConcatCols(a, b) => {
                let ca = self.value(*a).cols();
                if self.needs(*a) {
                    let mut da = Tensor::zeros(go.rows(), ca);
                    for r in 0..go.rows() {
                        da.row_mut(r).copy_from_slice(&go.row(r)[..ca]);
                    }
                    self.accumulate(grads, *a, da);
                }
                if self.needs(*b) {
                    let cb = go.cols() - ca;
                    let mut db = Tensor::zeros(go.rows(), cb);
                    for r in 0..go.rows() {
                        db.row_mut(r).copy_from_slice(&go.row(r)[ca..]);
                    }
                    self.accumulate(grads, *b, db);
                }
            }
            Op::ConcatRows(a, b) => {
                let ra = self.value(*a).rows();
                if self.needs(*a) {
                    let da = Tensor::from_vec(ra, go.cols(), go.data()[..ra * go.cols()].to_vec());
                    self.accumulate(grads, *a, da);
                }
                if self.needs(*b) {
                    let rb = go.rows() - ra;
                    let db =
                        Tensor::from_vec(rb, go.cols(), go.data()[ra * go.cols()..].to_vec());
                    self.accumulate(grads, *b, db);
                }
            }
            Op::RowGather(a, indices) => {
                if self.needs(*a) {
                    let ta = self.value(*a);
                    let mut da = Tensor::zeros(ta.rows(), ta.cols());
                    for (i, &src) in indices.iter().enumerate() {
                        let drow = da.row_mut(src);
                        for (d, &g) in drow.iter_mut().zip(go.row(i)) {
                            *d += g;
                        }
                    }
                    self.accumulate(grads, *a, da);
                }
            }
            Op::RowScatterAdd(a, indices) => {
                if self.needs(*a) {
                    let ta = self.value(*a);
                    let mut da = Tensor::zeros(ta.rows(), ta.cols());
                    for (i, &dst) in indices.iter().enumerate() {
                        da.row_mut(i).copy_from_slice(go.row(dst));
                    }
                    self.accumulate(grads, *a, da);
                }
            }
            Op::GatherCols(a, indices) => {
                if self.needs(*a) {
                    let ta = self.value(*a);
                    let out_cols = go.cols();
                    let mut da = Tensor::zeros(ta.rows(), ta.cols());
                    for i in 0..go.rows() {
                        for j in 0..out_cols {
                            let src = indices[i * out_cols + j];
                            da.set(i, src, da.get(i, src) + go.get(i, j));
                        }
                    }
                    self.accumulate(grads, *a, da);
                }
            }
            Op::Relu(a) => {
                let out = &self.nodes[i].value;
                let mut da = go.clone();
                for (d, &o) in da.data_mut().iter_mut().zip(out.data()) {
                    if o <= 0.0 {
                        *d = 0.0;
                    }
                }
                self.accumulate(grads, *a, da);
            }
            Op::Sigmoid(a) => {
                let out = &self.nodes[i].value;
                let mut da = go.clone();
                for (d, &o) in da.data_mut().iter_mut().zip(out.data()) {
                    *d *= o * (1.0 - o);
                }
                self.accumulate(grads, *a, da);
            }
            Op::Tanh(a) => {
                let out = &self.nodes[i].value;
                let mut da = go.clone();
                for (d, &o) in da.data_mut().iter_mut().zip(out.data()) {
                    *d *= 1.0 - o * o;
                }
                self.accumulate(grads, *a, da);
            }
            Op::Softmax(a, axis) => {
                if self.needs(*a) {
                    let y = &self.nodes[i].value;
                    let da = match axis {
                        Axis::Rows => softmax_backward_rows(y, go),
                        Axis::Cols => softmax_backward_rows(&y.transpose(), &go.transpose())
                            .transpose(),
                    };
                    self.accumulate(grads, *a, da);
                }
            }
            Op::MeanRows(a) => {
                if self.needs(*a) {
                    let ta = self.value(*a);
                    let inv = 1.0 / ta.rows() as f64;
                    let mut da = Tensor::zeros(ta.rows(), ta.cols());
                    for r in 0..ta.rows() {
                        for (d, &g) in da.row_mut(r).iter_mut().zip(go.row(0)) {
                            *d = g * inv;
                        }
                    }
                    self.accumulate(grads, *a, da);
                }
            }
            Op::SumRows(a) => {
                if self.needs(*a) {
                    let ta = self.value(*a);
                    let mut da = Tensor::zeros(ta.rows(), ta.cols());
                    for r in 0..ta.rows() {
                        da.row_mut(r).copy_from_slice(go.row(0));
                    }
                    self.accumulate(grads, *a, da);
                }
            }
            Op::Dropout(a, mask) => {
                let mut da = go.clone();
                for (d, &m) in da.data_mut().iter_mut().zip(mask) {
                    *d *= m;
                }
                self.accumulate(grads, *a, da);
            }
            Op::CrossEntropyLogits(a, labels) => {
                if self.needs(*a) {
                    let ta = self.value(*a);
                    let g = go.scalar_value() / labels.len() as f64;
                    let mut da = Tensor::zeros(ta.rows(), ta.cols());
                    for (r, &label) in labels.iter().enumerate() {
                        let row = ta.row(r);
                        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let denom: f64 = row.iter().map(|v| (v - max).exp()).sum();
                        for (c, &v) in row.iter().enumerate() {
                            let p = (v - max).exp() / denom;
                            let onehot = if c == label { 1.0 } else { 0.0 };
                            da.set(r, c, g * (p - onehot));
                        }
                    }
                    self.accumulate(grads, *a, da);
                }
            }
        }
    }
}

fn softmax_slice(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

fn softmax_backward_rows(y: &Tensor, go: &Tensor) -> Tensor {
    let mut da = Tensor::zeros(y.rows(), y.cols());
    for r in 0..y.rows() {
        let dot: f64 = go.row(r).iter().zip(y.row(r)).map(|(g, v)| g * v).sum();
        for c in 0..y.cols() {
            da.set(r, c, y.get(r, c) * (go.get(r, c) - dot));
        }
    }
    da
}
