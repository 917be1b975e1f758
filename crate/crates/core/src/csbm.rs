//! Contextual stochastic block model: synthetic node-classification graphs
//! with controllable homophily.
//!
//! Classes are assigned round-robin (balanced); each intra-class pair is
//! connected with probability `p_in` and each inter-class pair with
//! `p_out`, so for balanced classes the expected homophily is roughly
//! p_in / (p_in + (num_classes - 1) * p_out). Features are a per-class
//! Gaussian mean scaled by `feat_signal` plus unit Gaussian noise.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::NodeDataset;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct CsbmParams {
    pub n: usize,
    pub num_classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feat_dim: usize,
    pub feat_signal: f64,
    pub seed: u64,
}

/// Deterministic per seed: class means are drawn first, then edges in
/// lexicographic pair order, then feature noise node by node.
pub fn generate_csbm(p: &CsbmParams) -> Result<NodeDataset> {
    if !(0.0..=1.0).contains(&p.p_in) || !(0.0..=1.0).contains(&p.p_out) {
        return Err(Error::InvalidParameter(format!(
            "edge probabilities must lie in [0, 1], got p_in={} p_out={}",
            p.p_in, p.p_out
        )));
    }
    if p.num_classes == 0 {
        return Err(Error::InvalidParameter(String::from("num_classes must be >= 1")));
    }
    if p.n < 3 * p.num_classes {
        return Err(Error::InvalidParameter(format!(
            "n={} too small for {} classes (need >= 3 per class)",
            p.n, p.num_classes
        )));
    }
    if p.feat_dim == 0 {
        return Err(Error::InvalidParameter(String::from("feat_dim must be >= 1")));
    }
    if !p.feat_signal.is_finite() || p.feat_signal < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "feat_signal must be finite and >= 0, got {}",
            p.feat_signal
        )));
    }

    let labels: Vec<usize> = (0..p.n).map(|i| i % p.num_classes).collect();

    let mut mean_rng = SplitMix64::derive(p.seed, 0x01);
    let means: Vec<Vec<f64>> = (0..p.num_classes)
        .map(|_| (0..p.feat_dim).map(|_| mean_rng.normal() * p.feat_signal).collect())
        .collect();

    let mut edge_rng = SplitMix64::derive(p.seed, 0x02);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for i in 0..p.n {
        for j in (i + 1)..p.n {
            let prob = if labels[i] == labels[j] { p.p_in } else { p.p_out };
            if edge_rng.next_f64() < prob {
                edges.push((i, j));
            }
        }
    }

    let mut feat_rng = SplitMix64::derive(p.seed, 0x03);
    let mut data = Vec::with_capacity(p.n * p.feat_dim);
    for &label in &labels {
        for f in 0..p.feat_dim {
            data.push(means[label][f] + feat_rng.normal());
        }
    }
    let features = Tensor::from_vec(&[p.n, p.feat_dim], data)?;
    let graph = Graph::new(features, &edges, Some(labels))?;
    let name = format!(
        "csbm-n{}-c{}-pin{}-pout{}-s{}",
        p.n, p.num_classes, p.p_in, p.p_out, p.seed
    );
    NodeDataset::new(name, graph, SplitMix64::derive(p.seed, 0x04).next_u64())
}
