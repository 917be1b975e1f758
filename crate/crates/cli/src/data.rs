//! Plain-text dataset directory formats.
//!
//! Node dataset directory:
//!   edges.txt     one undirected edge per line, "src dst", 0-based integers
//!   features.txt  one node per line, whitespace-separated decimal floats
//!   labels.txt    one 0-based class id per line, node order
//!
//! Graph dataset directory: one subdirectory per graph (lexicographic
//! order), each holding edges.txt and features.txt, plus graph_labels.txt
//! at the top level with one class id per graph.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use signgt_core::dataset::{GraphDataset, NodeDataset};
use signgt_core::graph::{Graph, Split};
use signgt_core::tensor::Tensor;

use crate::error::CliError;

fn format_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Format(format!("{}:{}: {}", path.display(), line, msg))
}

fn read_lines(path: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    Ok(text.lines().map(|l| l.to_string()).collect())
}

fn parse_edges(path: &Path) -> Result<Vec<(usize, usize)>, CliError> {
    let mut edges = Vec::new();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut warned = false;
    for (i, line) in read_lines(path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(format_err(path, i + 1, "expected \"src dst\""));
        }
        let u: usize = tokens[0]
            .parse()
            .map_err(|e| format_err(path, i + 1, e))?;
        let v: usize = tokens[1]
            .parse()
            .map_err(|e| format_err(path, i + 1, e))?;
        if u != v && seen.contains(&(v, u)) && !warned {
            eprintln!(
                "warning: {} lists both ({u}, {v}) and ({v}, {u}); treating edges as undirected",
                path.display()
            );
            warned = true;
        }
        seen.insert((u, v));
        edges.push((u, v));
    }
    Ok(edges)
}

fn parse_features(path: &Path) -> Result<Tensor, CliError> {
    let lines = read_lines(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format_err(path, i + 1, e))?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(format_err(
                    path,
                    i + 1,
                    format!("ragged row: {} values, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Format(format!("{}: no feature rows", path.display())));
    }
    let n = rows.len();
    let d = rows[0].len();
    if d == 0 {
        return Err(CliError::Format(format!("{}: empty feature rows", path.display())));
    }
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    Tensor::from_vec(&[n, d], data).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

fn parse_labels(path: &Path) -> Result<Vec<usize>, CliError> {
    let mut labels = Vec::new();
    for (i, line) in read_lines(path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        labels.push(
            line.trim()
                .parse::<usize>()
                .map_err(|e| format_err(path, i + 1, e))?,
        );
    }
    Ok(labels)
}

fn build_graph(
    dir: &Path,
    features: Tensor,
    edges: &[(usize, usize)],
    labels: Option<Vec<usize>>,
) -> Result<Graph, CliError> {
    Graph::new(features, edges, labels)
        .map_err(|e| CliError::Format(format!("{}: {e}", dir.display())))
}

/// Parse, symmetrize, and validate a node dataset; row i of features.txt
/// is node i. The split uses the standard ratios with seed 0 (runs
/// re-split per seed).
pub fn load_node_dataset(dir: &Path) -> Result<NodeDataset, CliError> {
    let features = parse_features(&dir.join("features.txt"))?;
    let n = features.rows();
    let labels = parse_labels(&dir.join("labels.txt"))?;
    if labels.len() != n {
        return Err(CliError::Format(format!(
            "{}: {} labels for {} feature rows",
            dir.display(),
            labels.len(),
            n
        )));
    }
    let edges = parse_edges(&dir.join("edges.txt"))?;
    let graph = build_graph(dir, features, &edges, Some(labels))?;
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    // Splits are produced per run seed; a freshly loaded dataset carries a
    // placeholder.
    NodeDataset::with_split(name, graph, Split::empty(0)).map_err(CliError::from)
}

/// Load a graph-classification dataset: subdirectories in lexicographic
/// order, one label per graph in graph_labels.txt.
pub fn load_graph_dataset(dir: &Path) -> Result<GraphDataset, CliError> {
    let mut subdirs: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.path())
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(CliError::Format(format!(
            "{}: no graph subdirectories",
            dir.display()
        )));
    }
    let labels = parse_labels(&dir.join("graph_labels.txt"))?;
    if labels.len() != subdirs.len() {
        return Err(CliError::Format(format!(
            "{}: {} labels for {} graphs",
            dir.display(),
            labels.len(),
            subdirs.len()
        )));
    }
    let mut graphs = Vec::with_capacity(subdirs.len());
    for sub in &subdirs {
        let features = parse_features(&sub.join("features.txt"))?;
        let edges = parse_edges(&sub.join("edges.txt"))?;
        graphs.push(build_graph(sub, features, &edges, None)?);
    }
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    GraphDataset::with_split(name, graphs, labels, Split::empty(0)).map_err(CliError::from)
}

/// Write a labeled graph in the node dataset directory format. Floats are
/// printed in shortest round-trip form, so a reload is bit-exact.
pub fn write_node_dataset(dir: &Path, g: &Graph) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut edges = String::new();
    for &(u, v) in g.edges() {
        edges.push_str(&format!("{u} {v}\n"));
    }
    crate::export::atomic_write(&dir.join("edges.txt"), edges.as_bytes())?;

    let d = g.feature_dim();
    let mut features = String::new();
    for i in 0..g.num_nodes() {
        let row = &g.features().data()[i * d..(i + 1) * d];
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        features.push_str(&line.join(" "));
        features.push('\n');
    }
    crate::export::atomic_write(&dir.join("features.txt"), features.as_bytes())?;

    if let Some(labels) = g.labels() {
        let mut text = String::new();
        for &l in labels {
            text.push_str(&format!("{l}\n"));
        }
        crate::export::atomic_write(&dir.join("labels.txt"), text.as_bytes())?;
    }
    Ok(())
}
