//! Run artifacts: metrics.json, TSV dumps, summary.json.
//!
//! All files are whole-file writes through a temp-and-rename, and TSVs are
//! tab-separated with a header row and LF endings.

use std::path::Path;

use serde::{Deserialize, Serialize};
use signgt_core::tensor::Tensor;
use signgt_core::train::RunHistory;

use crate::error::CliError;

/// Write via a temporary file in the same directory plus a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::Config(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(".tmp-{}", file_name.to_string_lossy()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    pub seconds: f64,
}

pub fn metrics_records(history: &RunHistory) -> Vec<EpochRecord> {
    (0..history.epochs())
        .map(|e| EpochRecord {
            epoch: e,
            train_loss: history.train_loss[e],
            train_acc: history.train_acc[e],
            val_acc: history.val_acc[e],
            test_acc: history.test_acc[e],
            seconds: history.epoch_seconds[e],
        })
        .collect()
}

/// metrics.json: a JSON array with one record per epoch.
pub fn write_metrics(path: &Path, history: &RunHistory) -> Result<(), CliError> {
    let records = metrics_records(history);
    atomic_write(path, &serde_json::to_vec_pretty(&records)?)
}

/// attention_node_<id>.tsv: for the chosen node, one row per (head,
/// target node) with the signed attention value from the final layer.
pub fn write_attention_tsv(
    path: &Path,
    per_head_rows: &[Vec<f64>],
) -> Result<(), CliError> {
    let mut text = String::from("head\ttarget_node_id\tattention_value\n");
    for (head, row) in per_head_rows.iter().enumerate() {
        for (target, value) in row.iter().enumerate() {
            text.push_str(&format!("{head}\t{target}\t{value}\n"));
        }
    }
    atomic_write(path, text.as_bytes())
}

/// representations.tsv: one node per row, final-layer representation.
pub fn write_representations_tsv(path: &Path, repr: &Tensor) -> Result<(), CliError> {
    let d = repr.cols();
    let mut text = String::from("node_id");
    for j in 0..d {
        text.push_str(&format!("\tdim_{j}"));
    }
    text.push('\n');
    for i in 0..repr.rows() {
        text.push_str(&format!("{i}"));
        for j in 0..d {
            text.push_str(&format!("\t{}", repr.get(i, j)));
        }
        text.push('\n');
    }
    atomic_write(path, text.as_bytes())
}

/// Write the artifacts of one completed run into a directory: metrics.json
/// always; the attention dump and representations when provided.
pub fn export_run(
    out_dir: &Path,
    history: &RunHistory,
    attention: Option<(usize, &[Vec<f64>])>,
    representations: Option<&Tensor>,
) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)?;
    write_metrics(&out_dir.join("metrics.json"), history)?;
    if let Some((node, rows)) = attention {
        write_attention_tsv(&out_dir.join(format!("attention_node_{node}.tsv")), rows)?;
    }
    if let Some(repr) = representations {
        write_representations_tsv(&out_dir.join("representations.tsv"), repr)?;
    }
    Ok(())
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_stdev(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub seed_test_acc: Vec<f64>,
    pub mean_test_acc: f64,
    pub stdev_test_acc: f64,
}

impl VariantSummary {
    pub fn new(variant: &str, accs: Vec<f64>) -> Self {
        let (mean, stdev) = mean_stdev(&accs);
        VariantSummary {
            variant: variant.to_string(),
            seed_test_acc: accs,
            mean_test_acc: mean,
            stdev_test_acc: stdev,
        }
    }
}

/// summary.json: the same schema for train and ablate (train has one
/// results entry and a null gain).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    pub dataset: String,
    pub task: String,
    pub seeds: Vec<u64>,
    pub results: Vec<VariantSummary>,
    pub gain: Option<f64>,
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<(), CliError> {
    atomic_write(path, &serde_json::to_vec_pretty(summary)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_stdev_basics() {
        let (m, s) = mean_stdev(&[0.6, 0.8]);
        assert!((m - 0.7).abs() < 1e-12);
        assert!((s - (2.0f64 * 0.01 / 1.0).sqrt()).abs() < 1e-12);
        let (m, s) = mean_stdev(&[0.5]);
        assert_eq!((m, s), (0.5, 0.0));
    }

    #[test]
    fn attention_tsv_layout() {
        let dir = std::env::temp_dir().join(format!("signgt-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("attention_node_0.tsv");
        write_attention_tsv(&path, &[vec![0.5, -0.5], vec![0.1, 0.9]]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "head\ttarget_node_id\tattention_value");
        assert_eq!(lines.len(), 5);
        assert!(lines[2].starts_with("0\t1\t-0.5"));
        std::fs::remove_dir_all(&dir).ok();
    }
}
