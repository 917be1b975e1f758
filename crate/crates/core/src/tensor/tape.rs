//! Define-by-run differentiation tape.
//!
//! A [`Tape`] owns every intermediate value of one forward pass. Recording
//! an operation evaluates it eagerly, checks the output for NaN/Inf, and
//! stores the backward rule. [`Tape::backward`] consumes the tape (it is
//! rebuilt per forward pass), visits nodes once in reverse order, and
//! returns a [`Gradients`] map; a tensor feeding several nodes receives the
//! sum of all contributions.
//!
//! Tapes are single-threaded by construction; independent tapes may run
//! concurrently with no shared state.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::kernels;
use super::Tensor;
use crate::error::{Error, Result};
use crate::math;

/// Abstract matrix applied as a constant linear operator on the tape, so
/// the engine stays agnostic of how callers store structured matrices
/// (dense, CSR, ...). `apply_transpose` is used by the backward pass.
pub trait MatrixOp: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// out[rows x c] = M * x[cols x c]
    fn apply(&self, x: &[f64], c: usize, out: &mut [f64]);
    /// out[cols x c] = M^T * g[rows x c]
    fn apply_transpose(&self, g: &[f64], c: usize, out: &mut [f64]);
}

/// Reference into the tape that produced it. Using it with another tape is
/// a [`Error::Tape`] error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    idx: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryKind {
    /// sign(x) with the convention sign(0) = +1; gradient 0 everywhere.
    Sign,
    /// |x|; gradient is the strict sign, 0 at x = 0.
    Abs,
    Exp,
    Tanh,
    Relu,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryKind {
    Add,
    Sub,
    Mul,
}

enum Op {
    Leaf,
    Matmul { a: usize, b: usize },
    Transpose { a: usize },
    Unary { kind: UnaryKind, a: usize },
    Scale { a: usize, c: f64 },
    Binary { kind: BinaryKind, a: usize, b: usize },
    AddRow { a: usize, row: usize },
    SoftmaxRows { a: usize },
    StandardizeRows { x: usize, gamma: usize, beta: usize, eps: f64 },
    ConcatCols { parts: Vec<usize> },
    MeanRows { a: usize },
    SumAll { a: usize },
    CrossEntropy { logits: usize, labels: Vec<usize>, mask: Vec<usize> },
    ApplyMatrix { op: Arc<dyn MatrixOp>, x: usize },
}

struct Node {
    shape: Vec<usize>,
    data: Vec<f64>,
    op: Op,
    needs_grad: bool,
}

impl Node {
    fn rows(&self) -> usize {
        self.shape[0]
    }
    fn cols(&self) -> usize {
        self.shape[1]
    }
}

#[cfg(feature = "std")]
fn next_tape_id() -> u64 {
    use core::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(1);
    COUNTER.fetch_add(1, Ordering::Relaxed)
}

#[cfg(not(feature = "std"))]
fn next_tape_id() -> u64 {
    use core::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(1);
    COUNTER.fetch_add(1, Ordering::Relaxed)
}

/// Recorded forward pass. Nodes are stored in topological order: every
/// node's inputs precede it.
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: next_tape_id(),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn var(&self, idx: usize) -> Var {
        Var { tape: self.id, idx }
    }

    fn resolve(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.idx >= self.nodes.len() {
            return Err(Error::Tape(String::from(
                "variable does not belong to this tape",
            )));
        }
        Ok(v.idx)
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, needs_grad: bool) -> Result<Var> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{} output", op_name(&op))));
        }
        self.nodes.push(Node {
            shape,
            data,
            op,
            needs_grad,
        });
        Ok(self.var(self.nodes.len() - 1))
    }

    fn require_2d(&self, i: usize, what: &str) -> Result<()> {
        if self.nodes[i].shape.len() != 2 {
            return Err(Error::InvalidShape(format!(
                "{what} needs a 2-D operand, got {:?}",
                self.nodes[i].shape
            )));
        }
        Ok(())
    }

    /// Shape of a recorded value.
    pub fn shape(&self, v: Var) -> Result<&[usize]> {
        Ok(&self.nodes[self.resolve(v)?].shape)
    }

    /// Raw data of a recorded value.
    pub fn data(&self, v: Var) -> Result<&[f64]> {
        Ok(&self.nodes[self.resolve(v)?].data)
    }

    /// Copy a recorded value out as a tensor.
    pub fn value(&self, v: Var) -> Result<Tensor> {
        let i = self.resolve(v)?;
        Tensor::from_vec(&self.nodes[i].shape, self.nodes[i].data.clone())
    }

    /// Place a tensor on the tape as a differentiable leaf.
    pub fn leaf(&mut self, t: &Tensor) -> Result<Var> {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf, true)
    }

    /// Place a tensor on the tape as a constant (no gradient computed).
    pub fn constant(&mut self, t: &Tensor) -> Result<Var> {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf, false)
    }

    /// Constant from raw parts.
    pub fn constant_from(&mut self, shape: &[usize], data: Vec<f64>) -> Result<Var> {
        let t = Tensor::from_vec(shape, data)?;
        self.constant(&t)
    }

    // ── Operations ──────────────────────────────────────────────────────

    /// Standard matrix product; backward is dA = G B^T, dB = A^T G.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.resolve(a)?, self.resolve(b)?);
        self.require_2d(ai, "matmul")?;
        self.require_2d(bi, "matmul")?;
        let (m, k) = (self.nodes[ai].rows(), self.nodes[ai].cols());
        let (k2, n) = (self.nodes[bi].rows(), self.nodes[bi].cols());
        if k != k2 {
            return Err(Error::ShapeMismatch(format!(
                "matmul inner dims {k} vs {k2}"
            )));
        }
        let mut out = vec![0.0; m * n];
        kernels::mm_nn(&self.nodes[ai].data, &self.nodes[bi].data, m, k, n, &mut out);
        let needs = self.nodes[ai].needs_grad || self.nodes[bi].needs_grad;
        self.push(vec![m, n], out, Op::Matmul { a: ai, b: bi }, needs)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let ai = self.resolve(a)?;
        self.require_2d(ai, "transpose")?;
        let (m, n) = (self.nodes[ai].rows(), self.nodes[ai].cols());
        let mut out = vec![0.0; m * n];
        kernels::transpose(&self.nodes[ai].data, m, n, &mut out);
        let needs = self.nodes[ai].needs_grad;
        self.push(vec![n, m], out, Op::Transpose { a: ai }, needs)
    }

    fn unary(&mut self, kind: UnaryKind, a: Var) -> Result<Var> {
        let ai = self.resolve(a)?;
        let f = |x: f64| -> f64 {
            match kind {
                UnaryKind::Sign => {
                    if x < 0.0 {
                        -1.0
                    } else {
                        1.0
                    }
                }
                UnaryKind::Abs => math::abs(x),
                UnaryKind::Exp => math::exp(x),
                UnaryKind::Tanh => math::tanh(x),
                UnaryKind::Relu => {
                    if x > 0.0 {
                        x
                    } else {
                        0.0
                    }
                }
                UnaryKind::Neg => -x,
            }
        };
        let out: Vec<f64> = self.nodes[ai].data.iter().map(|&x| f(x)).collect();
        let shape = self.nodes[ai].shape.clone();
        // sign has zero derivative everywhere, so its output never carries
        // gradient back to the input.
        let needs = self.nodes[ai].needs_grad && kind != UnaryKind::Sign;
        self.push(shape, out, Op::Unary { kind, a: ai }, needs)
    }

    pub fn sign(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Sign, a)
    }
    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Abs, a)
    }
    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Exp, a)
    }
    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Tanh, a)
    }
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Relu, a)
    }
    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryKind::Neg, a)
    }

    /// Multiply by a finite scalar constant.
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        if !c.is_finite() {
            return Err(Error::NonFinite(String::from("scale factor")));
        }
        let ai = self.resolve(a)?;
        let out: Vec<f64> = self.nodes[ai].data.iter().map(|&x| c * x).collect();
        let shape = self.nodes[ai].shape.clone();
        let needs = self.nodes[ai].needs_grad;
        self.push(shape, out, Op::Scale { a: ai, c }, needs)
    }

    fn binary(&mut self, kind: BinaryKind, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.resolve(a)?, self.resolve(b)?);
        if self.nodes[ai].shape != self.nodes[bi].shape {
            return Err(Error::ShapeMismatch(format!(
                "elementwise operands {:?} vs {:?}",
                self.nodes[ai].shape, self.nodes[bi].shape
            )));
        }
        let f = |x: f64, y: f64| -> f64 {
            match kind {
                BinaryKind::Add => x + y,
                BinaryKind::Sub => x - y,
                BinaryKind::Mul => x * y,
            }
        };
        let out: Vec<f64> = self.nodes[ai]
            .data
            .iter()
            .zip(&self.nodes[bi].data)
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.nodes[ai].shape.clone();
        let needs = self.nodes[ai].needs_grad || self.nodes[bi].needs_grad;
        self.push(shape, out, Op::Binary { kind, a: ai, b: bi }, needs)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Add, a, b)
    }
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Sub, a, b)
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Mul, a, b)
    }

    /// a[n x m] + row[1 x m], the row broadcast over all rows (bias add).
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (ai, ri) = (self.resolve(a)?, self.resolve(row)?);
        self.require_2d(ai, "add_row")?;
        self.require_2d(ri, "add_row")?;
        let (n, m) = (self.nodes[ai].rows(), self.nodes[ai].cols());
        if self.nodes[ri].rows() != 1 || self.nodes[ri].cols() != m {
            return Err(Error::ShapeMismatch(format!(
                "add_row wants [1 x {m}], got {:?}",
                self.nodes[ri].shape
            )));
        }
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                out[i * m + j] = self.nodes[ai].data[i * m + j] + self.nodes[ri].data[j];
            }
        }
        let needs = self.nodes[ai].needs_grad || self.nodes[ri].needs_grad;
        self.push(vec![n, m], out, Op::AddRow { a: ai, row: ri }, needs)
    }

    /// Row-wise softmax with row-max subtraction for stability. Rows sum to
    /// one; every entry lies in (0, 1].
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let ai = self.resolve(a)?;
        self.require_2d(ai, "softmax_rows")?;
        let (n, m) = (self.nodes[ai].rows(), self.nodes[ai].cols());
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let row = &self.nodes[ai].data[i * m..(i + 1) * m];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                return Err(Error::NonFinite(String::from("softmax_rows input")));
            }
            let orow = &mut out[i * m..(i + 1) * m];
            let mut sum = 0.0;
            for (o, &x) in orow.iter_mut().zip(row) {
                *o = math::exp(x - max);
                sum += *o;
            }
            for o in orow.iter_mut() {
                *o /= sum;
            }
        }
        let needs = self.nodes[ai].needs_grad;
        self.push(vec![n, m], out, Op::SoftmaxRows { a: ai }, needs)
    }

    /// Per-row standardization with learned scale and shift:
    /// (x - mean) / sqrt(var + eps) * gamma + beta, statistics taken over
    /// the feature axis of each row.
    pub fn standardize_rows(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (xi, gi, bi) = (self.resolve(x)?, self.resolve(gamma)?, self.resolve(beta)?);
        self.require_2d(xi, "standardize_rows")?;
        let (n, d) = (self.nodes[xi].rows(), self.nodes[xi].cols());
        for (i, name) in [(gi, "gamma"), (bi, "beta")] {
            if self.nodes[i].shape != [1, d] {
                return Err(Error::ShapeMismatch(format!(
                    "standardize_rows {name} wants [1 x {d}], got {:?}",
                    self.nodes[i].shape
                )));
            }
        }
        let mut out = vec![0.0; n * d];
        for i in 0..n {
            let row = &self.nodes[xi].data[i * d..(i + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv_std = 1.0 / math::sqrt(var + eps);
            for j in 0..d {
                let xhat = (row[j] - mean) * inv_std;
                out[i * d + j] = xhat * self.nodes[gi].data[j] + self.nodes[bi].data[j];
            }
        }
        let needs = self.nodes[xi].needs_grad
            || self.nodes[gi].needs_grad
            || self.nodes[bi].needs_grad;
        self.push(
            vec![n, d],
            out,
            Op::StandardizeRows {
                x: xi,
                gamma: gi,
                beta: bi,
                eps,
            },
            needs,
        )
    }

    /// Concatenate 2-D values along the feature axis.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::InvalidInput(String::from("concat of nothing")));
        }
        let idxs: Vec<usize> = parts
            .iter()
            .map(|&v| self.resolve(v))
            .collect::<Result<_>>()?;
        for &i in &idxs {
            self.require_2d(i, "concat_cols")?;
        }
        let n = self.nodes[idxs[0]].rows();
        if idxs.iter().any(|&i| self.nodes[i].rows() != n) {
            return Err(Error::ShapeMismatch(String::from(
                "concat_cols parts disagree on row count",
            )));
        }
        let total: usize = idxs.iter().map(|&i| self.nodes[i].cols()).sum();
        let mut out = vec![0.0; n * total];
        let mut offset = 0;
        for &i in &idxs {
            let c = self.nodes[i].cols();
            for r in 0..n {
                out[r * total + offset..r * total + offset + c]
                    .copy_from_slice(&self.nodes[i].data[r * c..(r + 1) * c]);
            }
            offset += c;
        }
        let needs = idxs.iter().any(|&i| self.nodes[i].needs_grad);
        self.push(vec![n, total], out, Op::ConcatCols { parts: idxs }, needs)
    }

    /// Column-wise mean over rows: [n x d] -> [1 x d].
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let ai = self.resolve(a)?;
        self.require_2d(ai, "mean_rows")?;
        let (n, d) = (self.nodes[ai].rows(), self.nodes[ai].cols());
        if n == 0 {
            return Err(Error::InvalidInput(String::from("mean over zero rows")));
        }
        let mut out = vec![0.0; d];
        for i in 0..n {
            for j in 0..d {
                out[j] += self.nodes[ai].data[i * d + j];
            }
        }
        for o in out.iter_mut() {
            *o /= n as f64;
        }
        let needs = self.nodes[ai].needs_grad;
        self.push(vec![1, d], out, Op::MeanRows { a: ai }, needs)
    }

    /// Sum of all entries as a [1 x 1] scalar.
    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let ai = self.resolve(a)?;
        let s: f64 = self.nodes[ai].data.iter().sum();
        let needs = self.nodes[ai].needs_grad;
        self.push(vec![1, 1], vec![s], Op::SumAll { a: ai }, needs)
    }

    /// Mean over the masked rows of -log softmax(logits)[label], computed
    /// with log-sum-exp for stability.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize], mask: &[usize]) -> Result<Var> {
        let li = self.resolve(logits)?;
        self.require_2d(li, "cross_entropy")?;
        let (n, c) = (self.nodes[li].rows(), self.nodes[li].cols());
        if mask.is_empty() {
            return Err(Error::InvalidInput(String::from("empty loss mask")));
        }
        if labels.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} labels for {n} rows",
                labels.len()
            )));
        }
        let mut total = 0.0;
        for &r in mask {
            if r >= n {
                return Err(Error::InvalidInput(format!("mask row {r} out of range")));
            }
            let y = labels[r];
            if y >= c {
                return Err(Error::InvalidInput(format!("label {y} out of range")));
            }
            let row = &self.nodes[li].data[r * c..(r + 1) * c];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = math::ln(row.iter().map(|&x| math::exp(x - max)).sum::<f64>()) + max;
            total += lse - row[y];
        }
        let loss = total / mask.len() as f64;
        let needs = self.nodes[li].needs_grad;
        self.push(
            vec![1, 1],
            vec![loss],
            Op::CrossEntropy {
                logits: li,
                labels: labels.to_vec(),
                mask: mask.to_vec(),
            },
            needs,
        )
    }

    /// Apply a constant linear operator: out = op * x.
    pub fn apply_matrix(&mut self, op: Arc<dyn MatrixOp>, x: Var) -> Result<Var> {
        let xi = self.resolve(x)?;
        self.require_2d(xi, "apply_matrix")?;
        let (n, d) = (self.nodes[xi].rows(), self.nodes[xi].cols());
        if op.cols() != n {
            return Err(Error::ShapeMismatch(format!(
                "operator is {}x{}, input has {n} rows",
                op.rows(),
                op.cols()
            )));
        }
        let mut out = vec![0.0; op.rows() * d];
        op.apply(&self.nodes[xi].data, d, &mut out);
        let rows = op.rows();
        let needs = self.nodes[xi].needs_grad;
        self.push(vec![rows, d], out, Op::ApplyMatrix { op, x: xi }, needs)
    }

    // ── Backward ────────────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss. Consumes the tape (it is rebuilt
    /// on the next forward pass) and returns gradients for every node that
    /// needed them; a value used k times receives k accumulated terms.
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        let li = self.resolve(loss).map_err(|_| {
            Error::Tape(String::from("loss is detached from this tape"))
        })?;
        if self.nodes[li].data.len() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "loss must be scalar, got {:?}",
                self.nodes[li].shape
            )));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[li] = Some(vec![1.0]);

        for i in (0..=li).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let g = match grads[i].as_ref() {
                Some(g) => g.clone(),
                None => continue, // not on any path to the loss
            };
            self.propagate(i, &g, &mut grads)?;
        }

        Ok(Gradients {
            tape: self.id,
            grads,
        })
    }

    fn accumulate(grads: &mut [Option<Vec<f64>>], idx: usize, len: usize) -> &mut Vec<f64> {
        grads[idx].get_or_insert_with(|| vec![0.0; len])
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) -> Result<()> {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}

            Op::Matmul { a, b } => {
                let (m, k) = (self.nodes[*a].rows(), self.nodes[*a].cols());
                let n = self.nodes[*b].cols();
                if self.nodes[*a].needs_grad {
                    // dA = G * B^T
                    let mut da = vec![0.0; m * k];
                    kernels::mm_nt(g, &self.nodes[*b].data, m, n, k, &mut da);
                    let acc = Self::accumulate(grads, *a, m * k);
                    for (x, y) in acc.iter_mut().zip(&da) {
                        *x += y;
                    }
                }
                if self.nodes[*b].needs_grad {
                    // dB = A^T * G
                    let mut db = vec![0.0; k * n];
                    kernels::mm_tn(&self.nodes[*a].data, g, m, k, n, &mut db);
                    let acc = Self::accumulate(grads, *b, k * n);
                    for (x, y) in acc.iter_mut().zip(&db) {
                        *x += y;
                    }
                }
            }

            Op::Transpose { a } => {
                if self.nodes[*a].needs_grad {
                    let (m, n) = (self.nodes[*a].rows(), self.nodes[*a].cols());
                    let mut da = vec![0.0; m * n];
                    kernels::transpose(g, n, m, &mut da);
                    let acc = Self::accumulate(grads, *a, m * n);
                    for (x, y) in acc.iter_mut().zip(&da) {
                        *x += y;
                    }
                }
            }

            Op::Unary { kind, a } => {
                if !self.nodes[*a].needs_grad {
                    return Ok(());
                }
                let xin = &self.nodes[*a].data;
                let out = &node.data;
                let len = xin.len();
                let acc = Self::accumulate(grads, *a, len);
                match kind {
                    UnaryKind::Sign => {} // derivative 0 everywhere
                    UnaryKind::Abs => {
                        // Subgradient choice: 0 at the kink.
                        for j in 0..len {
                            let s = if xin[j] > 0.0 {
                                1.0
                            } else if xin[j] < 0.0 {
                                -1.0
                            } else {
                                0.0
                            };
                            acc[j] += g[j] * s;
                        }
                    }
                    UnaryKind::Exp => {
                        for j in 0..len {
                            acc[j] += g[j] * out[j];
                        }
                    }
                    UnaryKind::Tanh => {
                        for j in 0..len {
                            acc[j] += g[j] * (1.0 - out[j] * out[j]);
                        }
                    }
                    UnaryKind::Relu => {
                        for j in 0..len {
                            if xin[j] > 0.0 {
                                acc[j] += g[j];
                            }
                        }
                    }
                    UnaryKind::Neg => {
                        for j in 0..len {
                            acc[j] -= g[j];
                        }
                    }
                }
            }

            Op::Scale { a, c } => {
                if self.nodes[*a].needs_grad {
                    let acc = Self::accumulate(grads, *a, g.len());
                    for (x, y) in acc.iter_mut().zip(g) {
                        *x += c * y;
                    }
                }
            }

            Op::Binary { kind, a, b } => {
                let len = g.len();
                match kind {
                    BinaryKind::Add => {
                        if self.nodes[*a].needs_grad {
                            let acc = Self::accumulate(grads, *a, len);
                            for (x, y) in acc.iter_mut().zip(g) {
                                *x += y;
                            }
                        }
                        if self.nodes[*b].needs_grad {
                            let acc = Self::accumulate(grads, *b, len);
                            for (x, y) in acc.iter_mut().zip(g) {
                                *x += y;
                            }
                        }
                    }
                    BinaryKind::Sub => {
                        if self.nodes[*a].needs_grad {
                            let acc = Self::accumulate(grads, *a, len);
                            for (x, y) in acc.iter_mut().zip(g) {
                                *x += y;
                            }
                        }
                        if self.nodes[*b].needs_grad {
                            let acc = Self::accumulate(grads, *b, len);
                            for (x, y) in acc.iter_mut().zip(g) {
                                *x -= y;
                            }
                        }
                    }
                    BinaryKind::Mul => {
                        if self.nodes[*a].needs_grad {
                            let bv = &self.nodes[*b].data;
                            let acc = Self::accumulate(grads, *a, len);
                            for j in 0..len {
                                acc[j] += g[j] * bv[j];
                            }
                        }
                        if self.nodes[*b].needs_grad {
                            let av = &self.nodes[*a].data;
                            let acc = Self::accumulate(grads, *b, len);
                            for j in 0..len {
                                acc[j] += g[j] * av[j];
                            }
                        }
                    }
                }
            }

            Op::AddRow { a, row } => {
                let (n, m) = (node.rows(), node.cols());
                if self.nodes[*a].needs_grad {
                    let acc = Self::accumulate(grads, *a, n * m);
                    for (x, y) in acc.iter_mut().zip(g) {
                        *x += y;
                    }
                }
                if self.nodes[*row].needs_grad {
                    let acc = Self::accumulate(grads, *row, m);
                    for i in 0..n {
                        for j in 0..m {
                            acc[j] += g[i * m + j];
                        }
                    }
                }
            }

            Op::SoftmaxRows { a } => {
                if self.nodes[*a].needs_grad {
                    let (n, m) = (node.rows(), node.cols());
                    let p = &node.data;
                    let acc = Self::accumulate(grads, *a, n * m);
                    for i in 0..n {
                        let base = i * m;
                        let mut dot = 0.0;
                        for j in 0..m {
                            dot += g[base + j] * p[base + j];
                        }
                        for j in 0..m {
                            acc[base + j] += p[base + j] * (g[base + j] - dot);
                        }
                    }
                }
            }

            Op::StandardizeRows { x, gamma, beta, eps } => {
                let (n, d) = (node.rows(), node.cols());
                let xd = &self.nodes[*x].data;
                let gd = &self.nodes[*gamma].data;
                let d_f = d as f64;
                // Recompute per-row statistics; cheaper than caching for
                // desk-scale widths.
                let mut dgamma = vec![0.0; d];
                let mut dbeta = vec![0.0; d];
                let mut dx = vec![0.0; n * d];
                for i in 0..n {
                    let row = &xd[i * d..(i + 1) * d];
                    let grow = &g[i * d..(i + 1) * d];
                    let mean = row.iter().sum::<f64>() / d_f;
                    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / d_f;
                    let inv_std = 1.0 / math::sqrt(var + eps);
                    let mut dxhat_sum = 0.0;
                    let mut dxhat_xhat_sum = 0.0;
                    for j in 0..d {
                        let xhat = (row[j] - mean) * inv_std;
                        let dxhat = grow[j] * gd[j];
                        dgamma[j] += grow[j] * xhat;
                        dbeta[j] += grow[j];
                        dxhat_sum += dxhat;
                        dxhat_xhat_sum += dxhat * xhat;
                    }
                    for j in 0..d {
                        let xhat = (row[j] - mean) * inv_std;
                        let dxhat = grow[j] * gd[j];
                        dx[i * d + j] =
                            inv_std / d_f * (d_f * dxhat - dxhat_sum - xhat * dxhat_xhat_sum);
                    }
                }
                if self.nodes[*x].needs_grad {
                    let acc = Self::accumulate(grads, *x, n * d);
                    for (a, b) in acc.iter_mut().zip(&dx) {
                        *a += b;
                    }
                }
                if self.nodes[*gamma].needs_grad {
                    let acc = Self::accumulate(grads, *gamma, d);
                    for (a, b) in acc.iter_mut().zip(&dgamma) {
                        *a += b;
                    }
                }
                if self.nodes[*beta].needs_grad {
                    let acc = Self::accumulate(grads, *beta, d);
                    for (a, b) in acc.iter_mut().zip(&dbeta) {
                        *a += b;
                    }
                }
            }

            Op::ConcatCols { parts } => {
                let n = node.rows();
                let total = node.cols();
                let mut offset = 0;
                for &p in parts {
                    let c = self.nodes[p].cols();
                    if self.nodes[p].needs_grad {
                        let acc = Self::accumulate(grads, p, n * c);
                        for r in 0..n {
                            for j in 0..c {
                                acc[r * c + j] += g[r * total + offset + j];
                            }
                        }
                    }
                    offset += c;
                }
            }

            Op::MeanRows { a } => {
                if self.nodes[*a].needs_grad {
                    let (n, d) = (self.nodes[*a].rows(), self.nodes[*a].cols());
                    let inv = 1.0 / n as f64;
                    let acc = Self::accumulate(grads, *a, n * d);
                    for i in 0..n {
                        for j in 0..d {
                            acc[i * d + j] += g[j] * inv;
                        }
                    }
                }
            }

            Op::SumAll { a } => {
                if self.nodes[*a].needs_grad {
                    let len = self.nodes[*a].data.len();
                    let acc = Self::accumulate(grads, *a, len);
                    for x in acc.iter_mut() {
                        *x += g[0];
                    }
                }
            }

            Op::CrossEntropy { logits, labels, mask } => {
                if self.nodes[*logits].needs_grad {
                    let (n, c) = (self.nodes[*logits].rows(), self.nodes[*logits].cols());
                    let ld = &self.nodes[*logits].data;
                    let scale = g[0] / mask.len() as f64;
                    let acc = Self::accumulate(grads, *logits, n * c);
                    for &r in mask {
                        let row = &ld[r * c..(r + 1) * c];
                        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let mut exps: Vec<f64> =
                            row.iter().map(|&x| math::exp(x - max)).collect();
                        let sum: f64 = exps.iter().sum();
                        for e in exps.iter_mut() {
                            *e /= sum;
                        }
                        for j in 0..c {
                            let target = if j == labels[r] { 1.0 } else { 0.0 };
                            acc[r * c + j] += scale * (exps[j] - target);
                        }
                    }
                }
            }

            Op::ApplyMatrix { op, x } => {
                if self.nodes[*x].needs_grad {
                    let d = node.cols();
                    let mut dx = vec![0.0; op.cols() * d];
                    op.apply_transpose(g, d, &mut dx);
                    let acc = Self::accumulate(grads, *x, dx.len());
                    for (a, b) in acc.iter_mut().zip(&dx) {
                        *a += b;
                    }
                }
            }
        }
        Ok(())
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::Matmul { .. } => "matmul",
        Op::Transpose { .. } => "transpose",
        Op::Unary { kind, .. } => match kind {
            UnaryKind::Sign => "sign",
            UnaryKind::Abs => "abs",
            UnaryKind::Exp => "exp",
            UnaryKind::Tanh => "tanh",
            UnaryKind::Relu => "relu",
            UnaryKind::Neg => "neg",
        },
        Op::Scale { .. } => "scale",
        Op::Binary { kind, .. } => match kind {
            BinaryKind::Add => "add",
            BinaryKind::Sub => "sub",
            BinaryKind::Mul => "mul",
        },
        Op::AddRow { .. } => "add_row",
        Op::SoftmaxRows { .. } => "softmax_rows",
        Op::StandardizeRows { .. } => "standardize_rows",
        Op::ConcatCols { .. } => "concat_cols",
        Op::MeanRows { .. } => "mean_rows",
        Op::SumAll { .. } => "sum_all",
        Op::CrossEntropy { .. } => "cross_entropy",
        Op::ApplyMatrix { .. } => "apply_matrix",
    }
}

/// Gradient map produced by [`Tape::backward`].
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient recorded for a variable, if it was on a path to the loss.
    pub fn grad(&self, v: Var) -> Result<Option<&[f64]>> {
        if v.tape != self.tape || v.idx >= self.grads.len() {
            return Err(Error::Tape(String::from(
                "variable does not belong to this gradient map",
            )));
        }
        Ok(self.grads[v.idx].as_deref())
    }

    /// Accumulate the gradient of `v` into a tensor's grad buffer.
    pub fn accumulate_into(&self, v: Var, t: &mut Tensor) -> Result<()> {
        if let Some(g) = self.grad(v)? {
            t.accumulate_grad(g)?;
        }
        Ok(())
    }
}
