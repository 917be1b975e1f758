//! Graph representation and non-learnable graph math.

mod csr;
mod metrics;
mod spectral;
mod split;

pub use csr::CsrMatrix;
pub use metrics::homophily;
pub use spectral::{
    adjacency_power, adjacency_power_with_limit, estimate_operator_norm, khop_mask,
    normalize_adjacency, BiasMatrix, StructuralBias, DENSE_LIMIT,
};
pub use split::{stratified_split, Split};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Undirected attributed graph. The adjacency matrix is symmetric with a
/// zero diagonal (self-loops enter only during normalization); edges are
/// stored once as (lo, hi) pairs.
#[derive(Clone, Debug)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: CsrMatrix,
    features: Tensor,
    labels: Option<Vec<usize>>,
}

impl Graph {
    /// Build a graph from node features [n x d], an undirected edge list,
    /// and optional per-node class ids. Edges are deduplicated; direction
    /// is ignored. Self-loops and out-of-range endpoints are rejected.
    pub fn new(
        features: Tensor,
        edges: &[(usize, usize)],
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        if !features.is_2d() {
            return Err(Error::InvalidShape(format!(
                "features must be [n x d], got {:?}",
                features.shape()
            )));
        }
        let n = features.rows();
        if let Some(ref l) = labels {
            if l.len() != n {
                return Err(Error::InvalidInput(format!(
                    "{} labels for {n} nodes",
                    l.len()
                )));
            }
        }
        let mut undirected: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            if u == v {
                return Err(Error::InvalidInput(format!("self-loop at node {u}")));
            }
            undirected.push((u.min(v), u.max(v)));
        }
        undirected.sort_unstable();
        undirected.dedup();
        let adjacency = CsrMatrix::symmetric_from_edges(n, &undirected, 1.0);
        Ok(Graph {
            n,
            edges: undirected,
            adjacency,
            features,
            labels,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// Unique undirected edges.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of classes implied by the labels (max id + 1).
    pub fn num_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }

    /// Degree of a node (self-loops excluded).
    pub fn degree(&self, v: usize) -> usize {
        self.adjacency.row(v).0.len()
    }

    pub fn require_labels(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::InvalidInput(String::from("graph has no labels")))
    }

    /// FNV-1a over the node count and edge list; used to key caches of
    /// derived matrices.
    pub fn structure_fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |x: u64| {
            h ^= x;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        };
        mix(self.n as u64);
        for &(u, v) in &self.edges {
            mix(u as u64);
            mix(v as u64);
        }
        h
    }

    /// Relabel nodes by a permutation: node i becomes perm[i]. Features,
    /// labels and edges move together; used by equivariance checks.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(Error::InvalidInput(String::from("permutation length")));
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || seen[p] {
                return Err(Error::InvalidInput(String::from("not a permutation")));
            }
            seen[p] = true;
        }
        let d = self.feature_dim();
        let mut feat = vec![0.0; self.n * d];
        for i in 0..self.n {
            feat[perm[i] * d..(perm[i] + 1) * d]
                .copy_from_slice(&self.features.data()[i * d..(i + 1) * d]);
        }
        let features = Tensor::from_vec(&[self.n, d], feat)?;
        let labels = self.labels.as_ref().map(|l| {
            let mut out = vec![0usize; self.n];
            for i in 0..self.n {
                out[perm[i]] = l[i];
            }
            out
        });
        let edges: Vec<(usize, usize)> =
            self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        Graph::new(features, &edges, labels)
    }
}
