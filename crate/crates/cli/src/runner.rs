//! Run orchestration: dataset construction, single seeded runs, and the
//! seed fan-out across worker threads.

use std::path::Path;

use signgt_core::csbm::generate_csbm;
use signgt_core::dataset::Dataset;
use signgt_core::model::{
    AttentionVariant, Mode, ModelConfig, SignGTModel, TaskKind, Trace,
};
use signgt_core::train::{fit, RunHistory};

use crate::config::{DatasetSpec, RunSpec, Task};
use crate::data::{load_graph_dataset, load_node_dataset};
use crate::error::CliError;

/// One seed's outcome: the trained (best-epoch) model, its curves, and the
/// test accuracy at the selected epoch.
pub struct RunOutput {
    pub seed: u64,
    pub model: SignGTModel,
    pub history: RunHistory,
    pub test_acc: f64,
}

/// Load or generate the dataset named by the run spec; the kind must match
/// the task.
pub fn build_dataset(spec: &RunSpec) -> Result<Dataset, CliError> {
    let ds = spec
        .dataset
        .as_ref()
        .ok_or_else(|| CliError::Config("no dataset configured".into()))?;
    match (ds, spec.task) {
        (DatasetSpec::Path { path }, Task::Node) => {
            Ok(Dataset::Node(load_node_dataset(path)?))
        }
        (DatasetSpec::Path { path }, Task::Graph) => {
            Ok(Dataset::Graph(load_graph_dataset(path)?))
        }
        (DatasetSpec::Csbm { csbm }, Task::Node) => {
            Ok(Dataset::Node(generate_csbm(&csbm.to_params())?))
        }
        (DatasetSpec::Csbm { .. }, Task::Graph) => Err(CliError::Config(
            "the csbm generator produces node datasets; use task = \"node\"".into(),
        )),
    }
}

pub fn model_config(spec: &RunSpec, data: &Dataset) -> Result<ModelConfig, CliError> {
    let task: TaskKind = spec.task.into();
    let variant: AttentionVariant = spec.model.variant.into();
    let mut cfg = ModelConfig::new(
        data.feature_dim()?,
        spec.model.d_model,
        spec.model.heads,
        spec.model.layers,
        data.num_classes(),
        spec.model.k,
        variant,
        task,
    )?;
    cfg.attention.scale_scores = spec.model.scale_scores;
    cfg.attention.dropout_rate = spec.model.dropout;
    cfg.norm = spec.norm_kind();
    Ok(cfg)
}

/// Train one seed: re-split the dataset, initialize, fit, and read the
/// test accuracy of the restored best epoch.
pub fn run_one(
    base: &Dataset,
    spec: &RunSpec,
    variant: AttentionVariant,
    seed: u64,
) -> Result<RunOutput, CliError> {
    let data = base.resplit(seed)?;
    let mut cfg = model_config(spec, &data)?;
    cfg.attention.variant = variant;
    let mut model = SignGTModel::new(cfg, seed)?;
    let history = fit(&mut model, &data, &spec.train_config(seed))?;
    let test_acc = history.final_test_acc();
    Ok(RunOutput {
        seed,
        model,
        history,
        test_acc,
    })
}

/// Worker cap: SIGNGT_THREADS when set, otherwise the logical CPU count.
pub fn thread_cap() -> usize {
    if let Ok(v) = std::env::var("SIGNGT_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Run every seed, fanning out across at most [`thread_cap`] workers.
/// Results come back in seed order regardless of scheduling.
pub fn run_seeds(
    base: &Dataset,
    spec: &RunSpec,
    variant: AttentionVariant,
) -> Result<Vec<RunOutput>, CliError> {
    let cap = thread_cap().max(1);
    let mut outputs: Vec<Option<Result<RunOutput, CliError>>> =
        (0..spec.seeds.len()).map(|_| None).collect();
    for chunk_start in (0..spec.seeds.len()).step_by(cap) {
        let chunk_end = (chunk_start + cap).min(spec.seeds.len());
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for i in chunk_start..chunk_end {
                let seed = spec.seeds[i];
                handles.push((i, scope.spawn(move || run_one(base, spec, variant, seed))));
            }
            for (i, handle) in handles {
                outputs[i] = Some(handle.join().unwrap_or_else(|_| {
                    Err(CliError::Training("worker thread panicked".into()))
                }));
            }
        });
    }
    outputs
        .into_iter()
        .map(|o| o.expect("every slot filled"))
        .collect()
}

/// Attention rows of one node (final layer, one row per head) plus the
/// final node representations, from an eval-mode forward pass.
pub fn node_attention_and_representations(
    model: &SignGTModel,
    data: &Dataset,
    node: usize,
) -> Result<(Vec<Vec<f64>>, signgt_core::tensor::Tensor), CliError> {
    let graph = match data {
        Dataset::Node(ds) => &ds.graph,
        Dataset::Graph(_) => {
            return Err(CliError::Config(
                "attention dumps are defined for node tasks".into(),
            ))
        }
    };
    if node >= graph.num_nodes() {
        return Err(CliError::Config(format!(
            "node {node} out of range for {} nodes",
            graph.num_nodes()
        )));
    }
    let bias = model.bias_for(graph)?;
    let mut trace = Trace::default();
    model.forward(graph, &bias, Mode::Eval, None, Some(&mut trace))?;
    let last = trace
        .attention
        .last()
        .ok_or_else(|| CliError::Training("forward produced no attention".into()))?;
    let n = graph.num_nodes();
    let rows: Vec<Vec<f64>> = last
        .iter()
        .map(|m| m.data()[node * n..(node + 1) * n].to_vec())
        .collect();
    let repr = trace
        .representations
        .ok_or_else(|| CliError::Training("forward produced no representations".into()))?;
    Ok((rows, repr))
}

/// Validated path for `load` given the task (mirrors build_dataset for
/// paths only).
pub fn load_dataset_for_task(path: &Path, task: Task) -> Result<Dataset, CliError> {
    match task {
        Task::Node => Ok(Dataset::Node(load_node_dataset(path)?)),
        Task::Graph => Ok(Dataset::Graph(load_graph_dataset(path)?)),
    }
}
