//! Symmetric normalization, adjacency powers, and the k-hop structural
//! bias they induce.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::{CsrMatrix, Graph};
use crate::error::Result;
use crate::math;
use crate::rng::SplitMix64;
use crate::tensor::{kernels, MatrixOp, Tensor};

/// Above this node count, powers are kept in CSR instead of dense: k-hop
/// powers densify quickly and the dense cut-off bounds memory near 128 MB.
pub const DENSE_LIMIT: usize = 4096;

/// Symmetrically normalized self-loop-augmented adjacency: with A the
/// adjacency and I the identity, entry (i, j) of the result is
/// (A + I)_ij / sqrt(deg~_i * deg~_j) where deg~ counts the self-loop.
/// Symmetric by construction (exactly, bit for bit); eigenvalues lie in
/// [-1, 1]. Isolated nodes get degree 1 from the self-loop.
pub fn normalize_adjacency(g: &Graph) -> CsrMatrix {
    let n = g.num_nodes();
    let deg: Vec<f64> = (0..n).map(|v| (g.degree(v) + 1) as f64).collect();
    // 1 / sqrt(d_i * d_j) keeps the matrix bit-symmetric and exact for
    // perfect-square degree products.
    let entry = |i: usize, j: usize| 1.0 / math::sqrt(deg[i] * deg[j]);
    let adj = g.adjacency();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for i in 0..n {
        let (cols, _) = adj.row(i);
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(cols.len() + 1);
        let mut self_inserted = false;
        for &j in cols {
            if !self_inserted && j > i {
                row.push((i, entry(i, i)));
                self_inserted = true;
            }
            row.push((j, entry(i, j)));
        }
        if !self_inserted {
            row.push((i, entry(i, i)));
        }
        rows.push(row);
    }
    CsrMatrix::from_rows(n, rows)
}

/// Storage for a precomputed propagation matrix.
#[derive(Clone, Debug)]
pub enum BiasMatrix {
    Dense(Tensor),
    Sparse(CsrMatrix),
}

impl BiasMatrix {
    pub fn n(&self) -> usize {
        match self {
            BiasMatrix::Dense(t) => t.rows(),
            BiasMatrix::Sparse(m) => m.n(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            BiasMatrix::Dense(t) => t.get(i, j),
            BiasMatrix::Sparse(m) => m.get(i, j),
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        match self {
            BiasMatrix::Dense(t) => {
                let n = t.rows();
                kernels::mm_nn(t.data(), x, n, n, 1, y);
            }
            BiasMatrix::Sparse(m) => m.matvec(x, y),
        }
    }
}

// The bias is symmetric, so transpose application reuses the forward path.
impl MatrixOp for BiasMatrix {
    fn rows(&self) -> usize {
        self.n()
    }
    fn cols(&self) -> usize {
        self.n()
    }
    fn apply(&self, x: &[f64], c: usize, out: &mut [f64]) {
        match self {
            BiasMatrix::Dense(t) => {
                let n = t.rows();
                kernels::mm_nn(t.data(), x, n, n, c, out);
            }
            BiasMatrix::Sparse(m) => m.spmm_dense(x, c, out),
        }
    }
    fn apply_transpose(&self, g: &[f64], c: usize, out: &mut [f64]) {
        self.apply(g, c, out);
    }
}

/// Precomputed k-hop propagation matrix: the k-th power of the normalized
/// adjacency, with the per-row nonzero column sets that define each node's
/// k-hop neighborhood. Computed once and reused across epochs.
#[derive(Clone, Debug)]
pub struct StructuralBias {
    k: usize,
    matrix: Arc<BiasMatrix>,
    neighborhoods: Vec<Vec<u32>>,
}

impl StructuralBias {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn matrix(&self) -> &BiasMatrix {
        &self.matrix
    }

    /// The bias as a tape operator (cheap clone of the shared matrix).
    pub fn as_matrix_op(&self) -> Arc<dyn MatrixOp> {
        self.matrix.clone()
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    /// Node j is in set(i) iff entry (i, j) of the power is nonzero; the
    /// sets are symmetric and include the node itself for k >= 1 (and only
    /// the node itself for k = 0).
    pub fn neighborhoods(&self) -> &[Vec<u32>] {
        &self.neighborhoods
    }

    /// Power-iteration estimate of the operator 2-norm (the matrix is
    /// symmetric, so the dominant |eigenvalue| is the 2-norm); max over
    /// several random starts, each run a fixed number of steps.
    pub fn estimate_operator_norm(&self, steps: usize, starts: usize, seed: u64) -> f64 {
        estimate_operator_norm(self.matrix.as_ref(), steps, starts, seed)
    }
}

/// Exact k-th power of the normalized adjacency (no thresholding), stored
/// dense up to [`DENSE_LIMIT`] nodes and CSR above. k = 0 yields the
/// identity. Unsigned k makes negative hop counts unrepresentable.
pub fn adjacency_power(a_hat: &CsrMatrix, k: usize) -> Result<StructuralBias> {
    adjacency_power_with_limit(a_hat, k, DENSE_LIMIT)
}

/// [`adjacency_power`] with an explicit dense/CSR cut-over, so both layouts
/// are testable on small graphs.
pub fn adjacency_power_with_limit(
    a_hat: &CsrMatrix,
    k: usize,
    dense_limit: usize,
) -> Result<StructuralBias> {
    let n = a_hat.n();
    let matrix = if n <= dense_limit {
        let mut cur = CsrMatrix::identity(n).to_dense();
        let mut next = vec![0.0; n * n];
        for _ in 0..k {
            a_hat.spmm_dense(cur.data(), n, &mut next);
            cur.data_mut().copy_from_slice(&next);
        }
        // Pairwise symmetrization: the power is symmetric in exact
        // arithmetic; this removes the last-bit asymmetry of the sweep.
        let data = cur.data_mut();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (data[i * n + j] + data[j * n + i]);
                data[i * n + j] = avg;
                data[j * n + i] = avg;
            }
        }
        BiasMatrix::Dense(cur)
    } else {
        let mut acc = CsrMatrix::identity(n);
        for _ in 0..k {
            acc = a_hat.spgemm(&acc);
        }
        BiasMatrix::Sparse(acc.symmetrized())
    };

    let neighborhoods = (0..n)
        .map(|i| match &matrix {
            BiasMatrix::Dense(t) => (0..n)
                .filter(|&j| t.get(i, j) > 0.0)
                .map(|j| j as u32)
                .collect(),
            BiasMatrix::Sparse(m) => {
                let (cols, vals) = m.row(i);
                cols.iter()
                    .zip(vals)
                    .filter(|&(_, &v)| v > 0.0)
                    .map(|(&c, _)| c as u32)
                    .collect()
            }
        })
        .collect();

    Ok(StructuralBias {
        k,
        matrix: Arc::new(matrix),
        neighborhoods,
    })
}

/// Per-node k-hop neighbor index sets of a structural bias.
pub fn khop_mask(bias: &StructuralBias) -> &[Vec<u32>] {
    bias.neighborhoods()
}

/// Power-iteration estimate of the operator 2-norm of a symmetric operator.
pub fn estimate_operator_norm(m: &dyn MatrixOp, steps: usize, starts: usize, seed: u64) -> f64 {
    let n = m.cols();
    let mut rng = SplitMix64::derive(seed, 0x0b5e);
    let mut best = 0.0f64;
    for _ in 0..starts {
        let mut v: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let mut w = vec![0.0; n];
        normalize(&mut v);
        let mut estimate = 0.0;
        for _ in 0..steps {
            m.apply(&v, 1, &mut w);
            estimate = norm2(&w);
            if estimate == 0.0 {
                break;
            }
            for (a, b) in v.iter_mut().zip(&w) {
                *a = b / estimate;
            }
        }
        best = best.max(estimate);
    }
    best
}

fn norm2(v: &[f64]) -> f64 {
    math::sqrt(v.iter().map(|x| x * x).sum())
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}
