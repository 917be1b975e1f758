//! File-format, command, and exit-code tests (fixtures plus the real
//! binary).

use std::path::{Path, PathBuf};
use std::process::Command;

use signgt_cli::commands::{ablate_table, cmd_ablate, cmd_gen, cmd_homophily, cmd_train};
use signgt_cli::config::{CsbmSpec, DatasetSpec, RunSpec};
use signgt_cli::data::{load_graph_dataset, load_node_dataset, write_node_dataset};
use signgt_cli::CliError;
use signgt_core::csbm::{generate_csbm, CsbmParams};
use signgt_core::graph::homophily;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn signgt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_signgt"))
}

fn tiny_csbm_spec(out: Option<PathBuf>) -> RunSpec {
    let mut spec = RunSpec::default();
    spec.dataset = Some(DatasetSpec::Csbm {
        csbm: CsbmSpec {
            n: 60,
            num_classes: 2,
            p_in: 0.3,
            p_out: 0.05,
            feat_dim: 4,
            feat_signal: 2.0,
            seed: 5,
        },
    });
    spec.seeds = vec![1, 2];
    spec.model.d_model = 8;
    spec.model.heads = 2;
    spec.model.k = 1;
    spec.model.dropout = 0.0;
    spec.train.max_epochs = 30;
    spec.train.patience = 30;
    spec.out = out;
    spec
}

// ── Loaders ─────────────────────────────────────────────────────────────

#[test]
fn triangle_fixture_roundtrip() {
    let ds = load_node_dataset(&fixture("triangle")).unwrap();
    assert_eq!(ds.graph.num_nodes(), 3);
    assert_eq!(ds.graph.edges(), &[(0, 1), (0, 2), (1, 2)]);
    assert_eq!(ds.graph.labels().unwrap(), &[0, 0, 1]);
    assert!((homophily(&ds.graph).unwrap() - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn edge_out_of_range_is_format_error() {
    let dir = tmp_dir("edge_oob");
    std::fs::write(dir.join("edges.txt"), "5 1\n").unwrap();
    std::fs::write(dir.join("features.txt"), "1.0\n2.0\n3.0\n").unwrap();
    std::fs::write(dir.join("labels.txt"), "0\n0\n1\n").unwrap();
    match load_node_dataset(&dir) {
        Err(CliError::Format(_)) => {}
        other => panic!("expected format error, got {other:?}"),
    }
}

#[test]
fn duplicate_edges_deduplicate() {
    let dir = tmp_dir("dup_edges");
    std::fs::write(dir.join("edges.txt"), "0 1\n1 0\n0 1\n1 2\n").unwrap();
    std::fs::write(dir.join("features.txt"), "1.0\n2.0\n3.0\n").unwrap();
    std::fs::write(dir.join("labels.txt"), "0\n0\n1\n").unwrap();
    let ds = load_node_dataset(&dir).unwrap();
    assert_eq!(ds.graph.num_edges(), 2);
}

#[test]
fn ragged_features_are_format_error() {
    let dir = tmp_dir("ragged");
    std::fs::write(dir.join("edges.txt"), "0 1\n").unwrap();
    std::fs::write(dir.join("features.txt"), "1.0 2.0\n3.0\n").unwrap();
    std::fs::write(dir.join("labels.txt"), "0\n1\n").unwrap();
    assert!(matches!(load_node_dataset(&dir), Err(CliError::Format(_))));
}

#[test]
fn label_count_mismatch_is_format_error() {
    let dir = tmp_dir("label_count");
    std::fs::write(dir.join("edges.txt"), "0 1\n").unwrap();
    std::fs::write(dir.join("features.txt"), "1.0\n2.0\n3.0\n").unwrap();
    std::fs::write(dir.join("labels.txt"), "0\n1\n").unwrap();
    assert!(matches!(load_node_dataset(&dir), Err(CliError::Format(_))));
}

#[test]
fn missing_file_is_io_error() {
    let dir = tmp_dir("missing_files");
    assert!(matches!(load_node_dataset(&dir), Err(CliError::Io(_))));
}

// ── Graph datasets ──────────────────────────────────────────────────────

#[test]
fn graph_fixture_loads_four_graphs() {
    let ds = load_graph_dataset(&fixture("graph_toy")).unwrap();
    assert_eq!(ds.graphs.len(), 4);
    assert!(ds.graphs.iter().all(|g| g.num_nodes() == 2));
    assert_eq!(ds.labels, vec![0, 0, 0, 0]);
}

#[test]
fn empty_graph_subdir_is_format_error() {
    let dir = tmp_dir("graph_empty_sub");
    std::fs::create_dir_all(dir.join("g0")).unwrap();
    std::fs::write(dir.join("graph_labels.txt"), "0\n").unwrap();
    match load_graph_dataset(&dir) {
        Err(CliError::Io(_)) | Err(CliError::Format(_)) => {}
        other => panic!("expected load failure, got {other:?}"),
    }
}

#[test]
fn graph_label_count_mismatch_is_format_error() {
    let dir = tmp_dir("graph_label_count");
    for i in 0..4 {
        let sub = dir.join(format!("g{i}"));
        std::fs::create_dir_all(&sub).unwrap();
        std::fs::write(sub.join("edges.txt"), "0 1\n").unwrap();
        std::fs::write(sub.join("features.txt"), "1.0\n2.0\n").unwrap();
    }
    std::fs::write(dir.join("graph_labels.txt"), "0\n0\n0\n").unwrap();
    assert!(matches!(load_graph_dataset(&dir), Err(CliError::Format(_))));
}

// ── Round trips ─────────────────────────────────────────────────────────

#[test]
fn write_then_load_is_bit_exact() {
    let dataset = generate_csbm(&CsbmParams {
        n: 40,
        num_classes: 2,
        p_in: 0.2,
        p_out: 0.05,
        feat_dim: 3,
        feat_signal: 1.0,
        seed: 9,
    })
    .unwrap();
    let dir = tmp_dir("roundtrip");
    write_node_dataset(&dir, &dataset.graph).unwrap();
    let loaded = load_node_dataset(&dir).unwrap();
    assert_eq!(loaded.graph.edges(), dataset.graph.edges());
    assert_eq!(loaded.graph.labels(), dataset.graph.labels());
    // Bit-exact features through the decimal round trip.
    let a = dataset.graph.features().data();
    let b = loaded.graph.features().data();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn gen_reports_pure_homophily_without_inter_class_edges() {
    let dir = tmp_dir("gen_pure");
    let csbm = CsbmSpec {
        n: 30,
        num_classes: 2,
        p_in: 0.4,
        p_out: 0.0,
        feat_dim: 2,
        feat_signal: 1.0,
        seed: 3,
    };
    let h = cmd_gen(&csbm, &dir).unwrap();
    assert_eq!(h, 1.0);
    assert_eq!(cmd_homophily(&dir).unwrap(), 1.0);
}

// ── Commands and artifacts ──────────────────────────────────────────────

#[test]
fn train_writes_summary_metrics_and_dumps() {
    let out = tmp_dir("train_artifacts");
    let spec = tiny_csbm_spec(Some(out.clone()));
    let summary = cmd_train(&spec).unwrap();
    assert_eq!(summary.results[0].seed_test_acc.len(), 2);

    let summary_text = std::fs::read_to_string(out.join("summary.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&summary_text).unwrap();
    assert_eq!(parsed["command"], "train");
    assert!(parsed["results"][0]["mean_test_acc"].is_number());
    assert!(parsed["results"][0]["stdev_test_acc"].is_number());

    // Per-seed artifacts.
    for seed in [1u64, 2] {
        let dir = out.join(format!("seed_{seed}"));
        let metrics: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("metrics.json")).unwrap())
                .unwrap();
        let records = metrics.as_array().unwrap();
        assert!(!records.is_empty());
        for key in ["epoch", "train_loss", "val_acc"] {
            assert!(records[0].get(key).is_some(), "missing {key}");
        }
        // Attention dump: n rows per head plus the header.
        let attn = std::fs::read_to_string(dir.join("attention_node_0.tsv")).unwrap();
        let lines: Vec<&str> = attn.lines().collect();
        assert_eq!(lines[0], "head\ttarget_node_id\tattention_value");
        assert_eq!(lines.len(), 1 + 2 * 60);
        let repr = std::fs::read_to_string(dir.join("representations.tsv")).unwrap();
        assert_eq!(repr.lines().count(), 1 + 60);
    }
}

#[test]
fn ablate_table_has_all_rows_and_is_deterministic() {
    let spec = tiny_csbm_spec(None);
    let a = cmd_ablate(&spec).unwrap();
    let table = ablate_table(&a);
    for row in ["signed", "original", "tanh", "gain"] {
        assert!(table.contains(row), "missing {row} in:\n{table}");
    }
    let b = cmd_ablate(&spec).unwrap();
    assert_eq!(ablate_table(&a), ablate_table(&b));
    // Same summary schema as train.
    let t = cmd_train(&spec).unwrap();
    let tv = serde_json::to_value(&t).unwrap();
    let av = serde_json::to_value(&a).unwrap();
    let keys = |v: &serde_json::Value| -> Vec<String> {
        v.as_object().unwrap().keys().cloned().collect()
    };
    assert_eq!(keys(&tv), keys(&av));
}

// ── Binary exit codes ───────────────────────────────────────────────────

#[test]
fn homophily_prints_two_decimals() {
    let out = signgt()
        .args(["homophily", fixture("triangle").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0.33");

    let out = signgt()
        .args(["homophily", fixture("all_same").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1.00");
}

#[test]
fn unknown_variant_exits_two() {
    let out = signgt()
        .args([
            "train",
            "--dataset",
            fixture("triangle").to_str().unwrap(),
            "--variant",
            "spicy",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreadable_dataset_exits_two() {
    let out = signgt()
        .args(["homophily", "/nonexistent/dataset"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_exits_two() {
    let dir = tmp_dir("bad_config");
    let path = dir.join("config.json");
    std::fs::write(&path, "{ not json").unwrap();
    let out = signgt()
        .args(["train", "--config", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn attn_dump_node_out_of_range_exits_two() {
    let dir = tmp_dir("attn_oob_out");
    let out = signgt()
        .args([
            "attn-dump",
            "--dataset",
            fixture("triangle").to_str().unwrap(),
            "--node",
            "99",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
