//! Subcommand implementations. Each returns data; `main` handles printing
//! failures and exit codes.

use std::path::Path;

use signgt_core::graph::homophily;
use signgt_core::model::AttentionVariant;

use crate::config::{CsbmSpec, RunSpec, Task, Variant};
use crate::data::{load_node_dataset, write_node_dataset};
use crate::error::CliError;
use crate::export::{
    export_run, write_summary, Summary, VariantSummary,
};
use crate::runner::{build_dataset, node_attention_and_representations, run_seeds, RunOutput};

fn seed_dir(out: &Path, seed: u64) -> std::path::PathBuf {
    out.join(format!("seed_{seed}"))
}

fn export_outputs(
    spec: &RunSpec,
    dataset: &signgt_core::dataset::Dataset,
    outputs: &[RunOutput],
) -> Result<(), CliError> {
    let Some(out) = &spec.out else { return Ok(()) };
    for o in outputs {
        let dir = seed_dir(out, o.seed);
        match spec.task {
            Task::Node => {
                let data = dataset.resplit(o.seed)?;
                let (rows, repr) = node_attention_and_representations(&o.model, &data, 0)?;
                export_run(&dir, &o.history, Some((0, &rows)), Some(&repr))?;
            }
            Task::Graph => export_run(&dir, &o.history, None, None)?,
        }
    }
    Ok(())
}

fn variant_name(v: Variant) -> &'static str {
    AttentionVariant::from(v).name()
}

/// Train over all seeds of the run spec; writes per-seed artifacts and
/// summary.json when an output directory is configured.
pub fn cmd_train(spec: &RunSpec) -> Result<Summary, CliError> {
    let dataset = build_dataset(spec)?;
    let outputs = run_seeds(&dataset, spec, spec.model.variant.into())?;
    export_outputs(spec, &dataset, &outputs)?;
    let accs: Vec<f64> = outputs.iter().map(|o| o.test_acc).collect();
    let summary = Summary {
        command: "train".into(),
        dataset: dataset.name().to_string(),
        task: format!("{:?}", spec.task).to_lowercase(),
        seeds: spec.seeds.clone(),
        results: vec![VariantSummary::new(variant_name(spec.model.variant), accs)],
        gain: None,
    };
    if let Some(out) = &spec.out {
        write_summary(&out.join("summary.json"), &summary)?;
    }
    Ok(summary)
}

/// Run all three attention variants on identical seeds and splits; the
/// gain row is signed minus the better of the two baselines.
pub fn cmd_ablate(spec: &RunSpec) -> Result<Summary, CliError> {
    let dataset = build_dataset(spec)?;
    let mut results = Vec::new();
    for variant in [Variant::Signed, Variant::Original, Variant::Tanh] {
        let outputs = run_seeds(&dataset, spec, variant.into())?;
        let accs: Vec<f64> = outputs.iter().map(|o| o.test_acc).collect();
        results.push(VariantSummary::new(variant_name(variant), accs));
    }
    let gain = results[0].mean_test_acc - results[1].mean_test_acc.max(results[2].mean_test_acc);
    let summary = Summary {
        command: "ablate".into(),
        dataset: dataset.name().to_string(),
        task: format!("{:?}", spec.task).to_lowercase(),
        seeds: spec.seeds.clone(),
        results,
        gain: Some(gain),
    };
    if let Some(out) = &spec.out {
        write_summary(&out.join("summary.json"), &summary)?;
    }
    Ok(summary)
}

/// Render the ablation comparison table.
pub fn ablate_table(summary: &Summary) -> String {
    let mut text = format!("{:<10} {:>10} {:>10}\n", "variant", "mean_acc", "stdev");
    for r in &summary.results {
        text.push_str(&format!(
            "{:<10} {:>10.4} {:>10.4}\n",
            r.variant, r.mean_test_acc, r.stdev_test_acc
        ));
    }
    if let Some(gain) = summary.gain {
        text.push_str(&format!("{:<10} {:>+10.4}\n", "gain", gain));
    }
    text
}

/// Generate a cSBM dataset, write it in the directory format, and report
/// the measured homophily.
pub fn cmd_gen(csbm: &CsbmSpec, out: &Path) -> Result<f64, CliError> {
    let dataset = signgt_core::csbm::generate_csbm(&csbm.to_params())?;
    write_node_dataset(out, &dataset.graph)?;
    let h = homophily(&dataset.graph)?;
    Ok(h)
}

/// Homophily of a node dataset on disk.
pub fn cmd_homophily(path: &Path) -> Result<f64, CliError> {
    let dataset = load_node_dataset(path)?;
    Ok(homophily(&dataset.graph)?)
}

/// Train on the first seed and dump the chosen node's attention row per
/// head (final layer) for external plotting.
pub fn cmd_attn_dump(spec: &RunSpec, node: usize) -> Result<std::path::PathBuf, CliError> {
    let out = spec
        .out
        .clone()
        .ok_or_else(|| CliError::Config("attn-dump needs --out".into()))?;
    let dataset = build_dataset(spec)?;
    // Validate the node id against the graph before spending time training.
    match &dataset {
        signgt_core::dataset::Dataset::Node(ds) => {
            if node >= ds.graph.num_nodes() {
                return Err(CliError::Config(format!(
                    "node {node} out of range for {} nodes",
                    ds.graph.num_nodes()
                )));
            }
        }
        signgt_core::dataset::Dataset::Graph(_) => {
            return Err(CliError::Config(
                "attention dumps are defined for node tasks".into(),
            ))
        }
    }
    let seed = spec.seeds[0];
    let mut one_seed = spec.clone();
    one_seed.seeds = vec![seed];
    let outputs = run_seeds(&dataset, &one_seed, spec.model.variant.into())?;
    let data = dataset.resplit(seed)?;
    let (rows, _) = node_attention_and_representations(&outputs[0].model, &data, node)?;
    std::fs::create_dir_all(&out)?;
    let path = out.join(format!("attention_node_{node}.tsv"));
    crate::export::write_attention_tsv(&path, &rows)?;
    Ok(path)
}

/// Fit per seed and report test accuracies without writing artifacts.
pub fn cmd_eval(spec: &RunSpec) -> Result<Summary, CliError> {
    let dataset = build_dataset(spec)?;
    let outputs = run_seeds(&dataset, spec, spec.model.variant.into())?;
    let accs: Vec<f64> = outputs.iter().map(|o| o.test_acc).collect();
    Ok(Summary {
        command: "eval".into(),
        dataset: dataset.name().to_string(),
        task: format!("{:?}", spec.task).to_lowercase(),
        seeds: spec.seeds.clone(),
        results: vec![VariantSummary::new(variant_name(spec.model.variant), accs)],
        gain: None,
    })
}
