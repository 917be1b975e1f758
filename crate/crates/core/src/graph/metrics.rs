//! Edge homophily.

use alloc::string::String;

use super::Graph;
use crate::error::{Error, Result};

/// Fraction of edges whose endpoints share a label, each undirected edge
/// counted once. Self-loops never enter the edge set, so they cannot
/// influence the ratio. Low values indicate heterophily.
pub fn homophily(g: &Graph) -> Result<f64> {
    let labels = g
        .labels()
        .ok_or_else(|| Error::InvalidInput(String::from("homophily needs labels")))?;
    if g.num_edges() == 0 {
        return Err(Error::UndefinedMetric(String::from(
            "homophily of an edgeless graph",
        )));
    }
    let same = g
        .edges()
        .iter()
        .filter(|&&(u, v)| labels[u] == labels[v])
        .count();
    Ok(same as f64 / g.num_edges() as f64)
}
