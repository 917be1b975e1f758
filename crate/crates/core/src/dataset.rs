//! Dataset containers shared by training and the IO layer.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{stratified_split, Graph, Split};

/// Node-classification protocol: 60% of each label for training, 20% for
/// validation, the rest for testing.
pub const NODE_SPLIT_RATIOS: (f64, f64, f64) = (0.6, 0.2, 0.2);
/// Graph-classification protocol: 8:1:1.
pub const GRAPH_SPLIT_RATIOS: (f64, f64, f64) = (0.8, 0.1, 0.1);

/// One labeled graph plus a node-level split.
#[derive(Clone, Debug)]
pub struct NodeDataset {
    pub name: String,
    pub graph: Graph,
    pub split: Split,
}

impl NodeDataset {
    /// Wrap a labeled graph with a stratified split at the standard ratios.
    pub fn new(name: String, graph: Graph, seed: u64) -> Result<Self> {
        let labels = graph.require_labels()?;
        let split = stratified_split(labels, NODE_SPLIT_RATIOS, seed)?;
        Ok(NodeDataset { name, graph, split })
    }

    /// Wrap a graph with an explicit (possibly empty placeholder) split.
    pub fn with_split(name: String, graph: Graph, split: Split) -> Result<Self> {
        graph.require_labels()?;
        Ok(NodeDataset { name, graph, split })
    }

    /// Same graph, new split seed.
    pub fn resplit(&self, seed: u64) -> Result<Self> {
        NodeDataset::new(self.name.clone(), self.graph.clone(), seed)
    }

    pub fn num_classes(&self) -> usize {
        self.graph.num_classes().unwrap_or(0)
    }
}

/// A collection of graphs with one label each, and a split over graph
/// indices.
#[derive(Clone, Debug)]
pub struct GraphDataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub labels: Vec<usize>,
    pub split: Split,
}

impl GraphDataset {
    pub fn new(name: String, graphs: Vec<Graph>, labels: Vec<usize>, seed: u64) -> Result<Self> {
        let split = stratified_split(&labels, GRAPH_SPLIT_RATIOS, seed)?;
        GraphDataset::with_split(name, graphs, labels, split)
    }

    /// Build with an explicit (possibly empty placeholder) split.
    pub fn with_split(
        name: String,
        graphs: Vec<Graph>,
        labels: Vec<usize>,
        split: Split,
    ) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::InvalidInput(String::from("no graphs")));
        }
        if graphs.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} graphs",
                labels.len(),
                graphs.len()
            )));
        }
        Ok(GraphDataset {
            name,
            graphs,
            labels,
            split,
        })
    }

    pub fn resplit(&self, seed: u64) -> Result<Self> {
        GraphDataset::new(
            self.name.clone(),
            self.graphs.clone(),
            self.labels.clone(),
            seed,
        )
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| m + 1)
    }

    /// All graphs must agree on the feature dimension.
    pub fn feature_dim(&self) -> Result<usize> {
        let d = self.graphs[0].feature_dim();
        if self.graphs.iter().any(|g| g.feature_dim() != d) {
            return Err(Error::InvalidInput(String::from(
                "graphs disagree on feature dimension",
            )));
        }
        Ok(d)
    }
}

/// Either task's dataset, as consumed by the training loop.
#[derive(Clone, Debug)]
pub enum Dataset {
    Node(NodeDataset),
    Graph(GraphDataset),
}

impl Dataset {
    pub fn name(&self) -> &str {
        match self {
            Dataset::Node(d) => &d.name,
            Dataset::Graph(d) => &d.name,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Dataset::Node(d) => d.num_classes(),
            Dataset::Graph(d) => d.num_classes(),
        }
    }

    pub fn feature_dim(&self) -> Result<usize> {
        match self {
            Dataset::Node(d) => Ok(d.graph.feature_dim()),
            Dataset::Graph(d) => d.feature_dim(),
        }
    }

    pub fn split(&self) -> &Split {
        match self {
            Dataset::Node(d) => &d.split,
            Dataset::Graph(d) => &d.split,
        }
    }

    pub fn resplit(&self, seed: u64) -> Result<Dataset> {
        Ok(match self {
            Dataset::Node(d) => Dataset::Node(d.resplit(seed)?),
            Dataset::Graph(d) => Dataset::Graph(d.resplit(seed)?),
        })
    }
}
