//! Tape-based reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records each tensor operation during the forward pass. Calling
//! [`Tape::backward`] replays the record in reverse and accumulates gradients
//! for every node, returned as a [`Gradients`] table. Ops are tensor-level
//! (matmul, broadcast add, masked softmax, sparse aggregation, losses) so the
//! tape stays short even for full-corpus forward passes.
//!
//! All arithmetic is f64 and evaluation order is fixed, so identical inputs
//! produce bitwise-identical values and gradients.

use crate::tensor::Tensor;
use std::cell::RefCell;
use std::rc::Rc;

/// Compressed sparse rows with constant (non-differentiated) coefficients.
///
/// Used for neighborhood averaging: `out = P . H` where `P` holds the
/// normalized edge weights of a frozen graph.
#[derive(Clone, Debug)]
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Build from per-row (column, value) lists.
    pub fn from_rows(cols: usize, rows: &[Vec<(usize, f64)>]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for &(c, v) in row {
                assert!(c < cols, "csr column out of range");
                col_idx.push(c);
                vals.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Csr {
            rows: rows.len(),
            cols,
            row_ptr,
            col_idx,
            vals,
        }
    }

    /// Dense product P . H.
    pub fn matmul_dense(&self, h: &Tensor) -> Tensor {
        assert_eq!(self.cols, h.rows(), "csr matmul shape mismatch");
        let n = h.cols();
        let mut out = Tensor::zeros(self.rows, n);
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let w = self.vals[k];
                let hrow = h.row(c);
                let orow = out.row_mut(r);
                for j in 0..n {
                    orow[j] += w * hrow[j];
                }
            }
        }
        out
    }
}

enum Op {
    Leaf,
    /// C = A . B
    MatMul(usize, usize),
    /// C = A . B^T
    MatMulNt(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    /// Matrix plus a broadcast 1xN row vector.
    AddRow(usize, usize),
    Scale(usize, f64),
    Tanh(usize),
    Sigmoid(usize),
    /// Softmax over all entries, restricted to unmasked positions; masked
    /// entries are exactly zero in the output.
    MaskedSoftmax(usize, Rc<Vec<bool>>),
    /// Row-wise L2 normalization; rows with zero norm pass through.
    L2NormRows(usize),
    /// Horizontal concatenation of two matrices with equal row counts.
    ConcatCols(usize, usize),
    /// Vertical stack; the usize per part is its row count.
    ConcatRows(Vec<(usize, usize)>),
    /// Row gather: out[i] = input[idx[i]].
    GatherRows(usize, Rc<Vec<usize>>),
    /// out = P . H with constant P.
    SpMm(Rc<Csr>, usize),
    /// Squared reconstruction error against a constant target, either summed
    /// or averaged over all entries. Produces a 1x1 tensor.
    SqErr {
        target: Rc<Tensor>,
        pred: usize,
        mean: bool,
    },
    /// Sum over idx of -ln(max(x[i], floor)). Produces 1x1.
    NegLogGather {
        input: usize,
        idx: Rc<Vec<usize>>,
        floor: f64,
    },
    /// Numerically stable binary cross entropy on logits, summed over all
    /// entries; targets are 1 at `positives`, 0 elsewhere. Produces 1x1.
    BceWithLogits {
        logits: usize,
        positives: Rc<Vec<usize>>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Records a forward computation for reverse-mode differentiation.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

/// Gradient table produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `v`, if any path from the root reached it.
    pub fn get(&self, v: Var<'_>) -> Option<&Tensor> {
        self.grads[v.id].as_ref()
    }

    /// Gradient for `v`, materializing zeros for untouched nodes.
    pub fn get_or_zeros(&self, v: Var<'_>) -> Tensor {
        match &self.grads[v.id] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = v.shape();
                Tensor::zeros(r, c)
            }
        }
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len();
        nodes.push(Node { value, op });
        Var { tape: self, id }
    }

    /// A differentiable input node.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf)
    }

    /// A non-trainable input; mechanically identical to a leaf, the caller
    /// simply never reads its gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.leaf(value)
    }

    fn value_ref<R>(&self, id: usize, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.nodes.borrow()[id].value)
    }

    /// Reverse pass from `root`, which must be 1x1.
    pub fn backward(&self, root: Var<'_>) -> Gradients {
        let nodes = self.nodes.borrow();
        assert_eq!(
            nodes[root.id].value.shape(),
            (1, 1),
            "backward root must be scalar"
        );
        let mut grads: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        grads[root.id] = Some(Tensor::from_vec(1, 1, vec![1.0]));

        for id in (0..=root.id).rev() {
            let go = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &nodes[id];
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(go);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let da = go.matmul_nt(&nodes[*b].value);
                    let db = nodes[*a].value.matmul_tn(&go);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::MatMulNt(a, b) => {
                    // C = A . B^T: dA = dC . B, dB = dC^T . A
                    let da = go.matmul(&nodes[*b].value);
                    let db = go.matmul_tn(&nodes[*a].value);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, go.clone());
                    accumulate(&mut grads, *b, go);
                }
                Op::Sub(a, b) => {
                    let mut neg = go.clone();
                    for v in neg.data_mut() {
                        *v = -*v;
                    }
                    accumulate(&mut grads, *a, go);
                    accumulate(&mut grads, *b, neg);
                }
                Op::AddRow(a, row) => {
                    let cols = go.cols();
                    let mut drow = Tensor::zeros(1, cols);
                    for r in 0..go.rows() {
                        for c in 0..cols {
                            drow.data_mut()[c] += go.get(r, c);
                        }
                    }
                    accumulate(&mut grads, *a, go);
                    accumulate(&mut grads, *row, drow);
                }
                Op::Scale(a, factor) => {
                    let mut da = go;
                    for v in da.data_mut() {
                        *v *= factor;
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::Tanh(a) => {
                    let mut da = go;
                    for (g, y) in da.data_mut().iter_mut().zip(node.value.data()) {
                        *g *= 1.0 - y * y;
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::Sigmoid(a) => {
                    let mut da = go;
                    for (g, y) in da.data_mut().iter_mut().zip(node.value.data()) {
                        *g *= y * (1.0 - y);
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::MaskedSoftmax(a, mask) => {
                    let y = node.value.data();
                    let mut s = 0.0;
                    for i in 0..y.len() {
                        if mask[i] {
                            s += go.data()[i] * y[i];
                        }
                    }
                    let mut da = Tensor::zeros(node.value.rows(), node.value.cols());
                    for i in 0..y.len() {
                        if mask[i] {
                            da.data_mut()[i] = y[i] * (go.data()[i] - s);
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::L2NormRows(a) => {
                    // y = x / |x|; dx = (dy - y (y . dy)) / |x|
                    let x = &nodes[*a].value;
                    let y = &node.value;
                    let mut da = Tensor::zeros(x.rows(), x.cols());
                    for r in 0..x.rows() {
                        let n = crate::tensor::norm(x.row(r));
                        if n == 0.0 {
                            da.row_mut(r).copy_from_slice(go.row(r));
                            continue;
                        }
                        let ydg = crate::tensor::dot(y.row(r), go.row(r));
                        for c in 0..x.cols() {
                            da.set(r, c, (go.get(r, c) - y.get(r, c) * ydg) / n);
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::ConcatCols(a, b) => {
                    let ca = nodes[*a].value.cols();
                    let cb = nodes[*b].value.cols();
                    let rows = go.rows();
                    let mut da = Tensor::zeros(rows, ca);
                    let mut db = Tensor::zeros(rows, cb);
                    for r in 0..rows {
                        da.row_mut(r).copy_from_slice(&go.row(r)[..ca]);
                        db.row_mut(r).copy_from_slice(&go.row(r)[ca..]);
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &(part, nrows) in parts.iter() {
                        let cols = go.cols();
                        let mut dp = Tensor::zeros(nrows, cols);
                        for r in 0..nrows {
                            dp.row_mut(r).copy_from_slice(go.row(offset + r));
                        }
                        accumulate(&mut grads, part, dp);
                        offset += nrows;
                    }
                }
                Op::GatherRows(a, idx) => {
                    let src = &nodes[*a].value;
                    let mut da = Tensor::zeros(src.rows(), src.cols());
                    for (r, &i) in idx.iter().enumerate() {
                        let grow = go.row(r);
                        let drow = da.row_mut(i);
                        for c in 0..src.cols() {
                            drow[c] += grow[c];
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::SpMm(p, h) => {
                    // dH = P^T . dG
                    let src = &nodes[*h].value;
                    let mut dh = Tensor::zeros(src.rows(), src.cols());
                    for r in 0..p.rows {
                        let grow = go.row(r);
                        for k in p.row_ptr[r]..p.row_ptr[r + 1] {
                            let c = p.col_idx[k];
                            let w = p.vals[k];
                            let drow = dh.row_mut(c);
                            for j in 0..src.cols() {
                                drow[j] += w * grow[j];
                            }
                        }
                    }
                    accumulate(&mut grads, *h, dh);
                }
                Op::SqErr { target, pred, mean } => {
                    let g = go.scalar();
                    let p = &nodes[*pred].value;
                    let scale = if *mean {
                        2.0 / p.len() as f64
                    } else {
                        2.0
                    };
                    let mut dp = Tensor::zeros(p.rows(), p.cols());
                    for (d, (pv, tv)) in dp
                        .data_mut()
                        .iter_mut()
                        .zip(p.data().iter().zip(target.data()))
                    {
                        *d = g * scale * (pv - tv);
                    }
                    accumulate(&mut grads, *pred, dp);
                }
                Op::NegLogGather { input, idx, floor } => {
                    let g = go.scalar();
                    let x = &nodes[*input].value;
                    let mut dx = Tensor::zeros(x.rows(), x.cols());
                    for &i in idx.iter() {
                        let v = x.data()[i];
                        if v > *floor {
                            dx.data_mut()[i] -= g / v;
                        }
                    }
                    accumulate(&mut grads, *input, dx);
                }
                Op::BceWithLogits { logits, positives } => {
                    let g = go.scalar();
                    let x = &nodes[*logits].value;
                    let mut dx = Tensor::zeros(x.rows(), x.cols());
                    for (i, (d, &v)) in dx.data_mut().iter_mut().zip(x.data()).enumerate() {
                        let t = if positives.contains(&i) { 1.0 } else { 0.0 };
                        let s = 1.0 / (1.0 + (-v).exp());
                        *d = g * (s - t);
                    }
                    accumulate(&mut grads, *logits, dx);
                }
            }
        }

        Gradients { grads }
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: usize, delta: Tensor) {
    match &mut grads[id] {
        Some(g) => g.add_assign_scaled(&delta, 1.0),
        slot @ None => *slot = Some(delta),
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Tensor {
        self.tape.value_ref(self.id, |t| t.clone())
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.value_ref(self.id, |t| t.shape())
    }

    /// Scalar content of a 1x1 node.
    pub fn scalar(&self) -> f64 {
        self.tape.value_ref(self.id, |t| t.scalar())
    }

    pub fn matmul(self, rhs: Var<'t>) -> Var<'t> {
        let v = self
            .tape
            .value_ref(self.id, |a| self.tape.value_ref(rhs.id, |b| a.matmul(b)));
        self.tape.push(v, Op::MatMul(self.id, rhs.id))
    }

    /// self . rhs^T
    pub fn matmul_nt(self, rhs: Var<'t>) -> Var<'t> {
        let v = self
            .tape
            .value_ref(self.id, |a| self.tape.value_ref(rhs.id, |b| a.matmul_nt(b)));
        self.tape.push(v, Op::MatMulNt(self.id, rhs.id))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, rhs: Var<'t>) -> Var<'t> {
        let v = self.tape.value_ref(self.id, |a| {
            self.tape.value_ref(rhs.id, |b| {
                assert_eq!(a.shape(), b.shape(), "add shape mismatch");
                let mut out = a.clone();
                out.add_assign_scaled(b, 1.0);
                out
            })
        });
        self.tape.push(v, Op::Add(self.id, rhs.id))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, rhs: Var<'t>) -> Var<'t> {
        let v = self.tape.value_ref(self.id, |a| {
            self.tape.value_ref(rhs.id, |b| {
                assert_eq!(a.shape(), b.shape(), "sub shape mismatch");
                let mut out = a.clone();
                out.add_assign_scaled(b, -1.0);
                out
            })
        });
        self.tape.push(v, Op::Sub(self.id, rhs.id))
    }

    /// Broadcast-add a 1xN row vector to every row.
    pub fn add_row(self, row: Var<'t>) -> Var<'t> {
        let v = self.tape.value_ref(self.id, |a| {
            self.tape.value_ref(row.id, |r| {
                assert_eq!(r.rows(), 1, "add_row rhs must be a row vector");
                assert_eq!(a.cols(), r.cols(), "add_row width mismatch");
                let mut out = a.clone();
                for i in 0..out.rows() {
                    for c in 0..out.cols() {
                        let v = out.get(i, c) + r.get(0, c);
                        out.set(i, c, v);
                    }
                }
                out
            })
        });
        self.tape.push(v, Op::AddRow(self.id, row.id))
    }

    pub fn scale(self, factor: f64) -> Var<'t> {
        let v = self.tape.value_ref(self.id, |a| a.map(|x| x * factor));
        self.tape.push(v, Op::Scale(self.id, factor))
    }

    pub fn tanh(self) -> Var<'t> {
        let v = self.tape.value_ref(self.id, |a| a.map(f64::tanh));
        self.tape.push(v, Op::Tanh(self.id))
    }

    pub fn sigmoid(self) -> Var<'t> {
        let v = self
            .tape
            .value_ref(self.id, |a| a.map(|x| 1.0 / (1.0 + (-x).exp())));
        self.tape.push(v, Op::Sigmoid(self.id))
    }

    /// Softmax over all entries with `mask[i] == true`; masked entries are 0.
    pub fn masked_softmax(self, mask: Rc<Vec<bool>>) -> Var<'t> {
        let v = self.tape.value_ref(self.id, |a| {
            assert_eq!(a.len(), mask.len(), "mask length mismatch");
            assert!(mask.iter().any(|&m| m), "softmax over fully masked input");
            let mut mx = f64::NEG_INFINITY;
            for (i, &x) in a.data().iter().enumerate() {
                if mask[i] && x > mx {
                    mx = x;
                }
            }
            let mut out = Tensor::zeros(a.rows(), a.cols());
            let mut sum = 0.0;
            for (i, &x) in a.data().iter().enumerate() {
                if mask[i] {
                    let e = (x - mx).exp();
                    out.data_mut()[i] = e;
                    sum += e;
                }
            }
            for v in out.data_mut() {
                *v /= sum;
            }
            out
        });
        self.tape.push(v, Op::MaskedSoftmax(self.id, mask))
    }

    /// Softmax over all entries.
    pub fn softmax(self) -> Var<'t> {
        let n = self.tape.value_ref(self.id, |a| a.len());
        self.masked_softmax(Rc::new(vec![true; n]))
    }

    pub fn l2_normalize_rows(self) -> Var<'t> {
        let v = self.tape.value_ref(self.id, |a| {
            let mut out = a.clone();
            for r in 0..out.rows() {
                let n = crate::tensor::norm(out.row(r));
                if n > 0.0 {
                    for v in out.row_mut(r) {
                        *v /= n;
                    }
                }
            }
            out
        });
        self.tape.push(v, Op::L2NormRows(self.id))
    }

    pub fn concat_cols(self, rhs: Var<'t>) -> Var<'t> {
        let v = self.tape.value_ref(self.id, |a| {
            self.tape.value_ref(rhs.id, |b| {
                assert_eq!(a.rows(), b.rows(), "concat_cols row mismatch");
                let mut out = Tensor::zeros(a.rows(), a.cols() + b.cols());
                for r in 0..a.rows() {
                    out.row_mut(r)[..a.cols()].copy_from_slice(a.row(r));
                    out.row_mut(r)[a.cols()..].copy_from_slice(b.row(r));
                }
                out
            })
        });
        self.tape.push(v, Op::ConcatCols(self.id, rhs.id))
    }

    pub fn gather_rows(self, idx: Rc<Vec<usize>>) -> Var<'t> {
        let v = self.tape.value_ref(self.id, |a| {
            let mut out = Tensor::zeros(idx.len(), a.cols());
            for (r, &i) in idx.iter().enumerate() {
                out.row_mut(r).copy_from_slice(a.row(i));
            }
            out
        });
        self.tape.push(v, Op::GatherRows(self.id, idx))
    }

    /// P . self with constant coefficients.
    pub fn spmm(self, p: Rc<Csr>) -> Var<'t> {
        let v = self.tape.value_ref(self.id, |h| p.matmul_dense(h));
        self.tape.push(v, Op::SpMm(p, self.id))
    }

    /// Squared error against a constant target; mean or sum over entries.
    pub fn sq_err(self, target: Rc<Tensor>, mean: bool) -> Var<'t> {
        let v = self.tape.value_ref(self.id, |p| {
            assert_eq!(p.shape(), target.shape(), "sq_err shape mismatch");
            let mut acc = 0.0;
            for (pv, tv) in p.data().iter().zip(target.data()) {
                let d = pv - tv;
                acc += d * d;
            }
            if mean {
                acc /= p.len() as f64;
            }
            Tensor::from_vec(1, 1, vec![acc])
        });
        self.tape.push(
            v,
            Op::SqErr {
                target,
                pred: self.id,
                mean,
            },
        )
    }

    /// Sum over `idx` of -ln(max(self[i], floor)).
    pub fn neg_log_gather(self, idx: Rc<Vec<usize>>, floor: f64) -> Var<'t> {
        let v = self.tape.value_ref(self.id, |x| {
            let mut acc = 0.0;
            for &i in idx.iter() {
                acc -= x.data()[i].max(floor).ln();
            }
            Tensor::from_vec(1, 1, vec![acc])
        });
        self.tape.push(
            v,
            Op::NegLogGather {
                input: self.id,
                idx,
                floor,
            },
        )
    }

    /// Binary cross entropy on logits summed over entries; target 1 at
    /// `positives`, 0 elsewhere. Stable form: max(x,0) - x t + ln(1+e^-|x|).
    pub fn bce_with_logits(self, positives: Rc<Vec<usize>>) -> Var<'t> {
        let v = self.tape.value_ref(self.id, |x| {
            let mut acc = 0.0;
            for (i, &v) in x.data().iter().enumerate() {
                let t = if positives.contains(&i) { 1.0 } else { 0.0 };
                acc += v.max(0.0) - v * t + (1.0 + (-v.abs()).exp()).ln();
            }
            Tensor::from_vec(1, 1, vec![acc])
        });
        self.tape.push(
            v,
            Op::BceWithLogits {
                logits: self.id,
                positives,
            },
        )
    }
}

/// Vertical stack of matrices with equal column counts.
pub fn concat_rows<'t>(tape: &'t Tape, parts: &[Var<'t>]) -> Var<'t> {
    assert!(!parts.is_empty(), "concat_rows on empty list");
    let values: Vec<Tensor> = parts.iter().map(|p| p.value()).collect();
    let cols = values[0].cols();
    let total: usize = values.iter().map(|v| v.rows()).sum();
    let mut out = Tensor::zeros(total, cols);
    let mut offset = 0;
    let mut spans = Vec::with_capacity(parts.len());
    for (part, v) in parts.iter().zip(&values) {
        assert_eq!(v.cols(), cols, "concat_rows width mismatch");
        for r in 0..v.rows() {
            out.row_mut(offset + r).copy_from_slice(v.row(r));
        }
        spans.push((part.id, v.rows()));
        offset += v.rows();
    }
    tape.push(out, Op::ConcatRows(spans))
}
