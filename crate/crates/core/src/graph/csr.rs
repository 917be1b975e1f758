//! Compressed sparse row matrices for adjacency math.

use alloc::vec;
use alloc::vec::Vec;

use crate::tensor::Tensor;

/// Square CSR matrix with sorted column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Symmetric 0/`weight` matrix from undirected edges (both directions
    /// stored, zero diagonal).
    pub fn symmetric_from_edges(n: usize, edges: &[(usize, usize)], weight: f64) -> Self {
        let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(u, v) in edges {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for nb in neighbors.iter_mut() {
            nb.sort_unstable();
            nb.dedup();
            col_idx.extend_from_slice(nb);
            row_ptr.push(col_idx.len());
        }
        let values = vec![weight; col_idx.len()];
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Build from per-row (column, value) pairs; columns must be sorted.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        debug_assert_eq!(rows.len(), n);
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
            for (c, v) in row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Column indices and values of one row.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    /// y = M x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut s = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                s += v * x[c];
            }
            y[i] = s;
        }
    }

    /// out[n x d] = M * x[n x d] for dense row-major x.
    pub fn spmm_dense(&self, x: &[f64], d: usize, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n * d);
        debug_assert_eq!(out.len(), self.n * d);
        out.fill(0.0);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let orow = &mut out[i * d..(i + 1) * d];
            for (&c, &v) in cols.iter().zip(vals) {
                let xrow = &x[c * d..(c + 1) * d];
                for (o, &xv) in orow.iter_mut().zip(xrow) {
                    *o += v * xv;
                }
            }
        }
    }

    /// Exact sparse product self * other, via a dense accumulator row.
    pub fn spgemm(&self, other: &CsrMatrix) -> CsrMatrix {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut acc = vec![0.0f64; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        for i in 0..n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let (ocols, ovals) = other.row(c);
                for (&oc, &ov) in ocols.iter().zip(ovals) {
                    if acc[oc] == 0.0 {
                        touched.push(oc);
                    }
                    acc[oc] += v * ov;
                }
            }
            touched.sort_unstable();
            let mut row = Vec::with_capacity(touched.len());
            for &c in &touched {
                if acc[c] != 0.0 {
                    row.push((c, acc[c]));
                }
                acc[c] = 0.0;
            }
            touched.clear();
            rows.push(row);
        }
        CsrMatrix::from_rows(n, rows)
    }

    /// Force exact symmetry by pairwise averaging mirrored entries. The
    /// pattern must already be structurally symmetric (true for powers of
    /// a symmetric matrix).
    pub fn symmetrized(&self) -> CsrMatrix {
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let row = cols
                .iter()
                .zip(vals)
                .map(|(&j, &v)| (j, 0.5 * (v + self.get(j, i))))
                .collect();
            rows.push(row);
        }
        CsrMatrix::from_rows(self.n, rows)
    }

    pub fn to_dense(&self) -> Tensor {
        let mut data = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                data[i * self.n + c] = v;
            }
        }
        Tensor::from_vec(&[self.n, self.n], data).expect("csr values are finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_graph_layout() {
        let m = CsrMatrix::symmetric_from_edges(3, &[(0, 1), (1, 2)], 1.0);
        assert_eq!(m.nnz(), 4);
        assert_eq!(m.row(1).0, &[0, 2]);
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(0, 2), 0.0);
    }

    #[test]
    fn matvec_matches_dense() {
        let m = CsrMatrix::symmetric_from_edges(3, &[(0, 1), (1, 2)], 2.0);
        let x = [1.0, 10.0, 100.0];
        let mut y = [0.0; 3];
        m.matvec(&x, &mut y);
        assert_eq!(y, [20.0, 202.0, 20.0]);
    }

    #[test]
    fn spgemm_equals_dense_product() {
        let m = CsrMatrix::symmetric_from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3)], 0.5);
        let sq = m.spgemm(&m);
        let dense = m.to_dense();
        // Dense square by hand.
        let n = 4;
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += dense.get(i, k) * dense.get(k, j);
                }
                assert!((sq.get(i, j) - s).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identity_is_identity() {
        let i = CsrMatrix::identity(3);
        let x = [3.0, -1.0, 2.0];
        let mut y = [0.0; 3];
        i.matvec(&x, &mut y);
        assert_eq!(y, x);
    }
}
