//! Loss, optimizer, and the training loop with validation-based model
//! selection.

mod loss;
mod optim;

pub use loss::cross_entropy;
pub use optim::{adamw_step, OptimizerState};

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::StructuralBias;
use crate::model::{model_forward, Mode, SignGTModel, TaskKind};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

/// Hyperparameter grids for exhaustive search.
pub mod grid {
    pub const LAYERS: [usize; 3] = [1, 2, 3];
    pub const D_MODEL: [usize; 3] = [128, 256, 512];
    pub const K_HOPS: [usize; 5] = [1, 2, 3, 4, 5];
    pub const LEARNING_RATE: [f64; 3] = [1e-2, 5e-3, 1e-3];
    pub const WEIGHT_DECAY: [f64; 3] = [1e-4, 5e-4, 1e-5];
    pub const DROPOUT: [f64; 3] = [0.1, 0.3, 0.5];
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Applied to the model's attention config for the duration of the fit.
    pub dropout_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            weight_decay: 5e-4,
            dropout_rate: 0.1,
            max_epochs: 500,
            patience: 50,
            seed: 0,
        }
    }
}

/// Per-epoch curves plus the index of the epoch whose parameters the model
/// kept. Wall-clock per epoch is informational; [`RunHistory::numeric_eq`]
/// compares everything except it.
#[derive(Clone, Debug, Default)]
pub struct RunHistory {
    pub train_loss: Vec<f64>,
    pub train_acc: Vec<f64>,
    pub val_acc: Vec<f64>,
    pub test_acc: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub best_epoch: usize,
}

impl RunHistory {
    pub fn epochs(&self) -> usize {
        self.train_loss.len()
    }

    pub fn best_val_acc(&self) -> f64 {
        self.val_acc.get(self.best_epoch).copied().unwrap_or(0.0)
    }

    /// Test accuracy at the best-validation epoch.
    pub fn final_test_acc(&self) -> f64 {
        self.test_acc.get(self.best_epoch).copied().unwrap_or(0.0)
    }

    /// Bit-identical comparison of everything deterministic (wall-clock
    /// excluded).
    pub fn numeric_eq(&self, other: &RunHistory) -> bool {
        self.train_loss == other.train_loss
            && self.train_acc == other.train_acc
            && self.val_acc == other.val_acc
            && self.test_acc == other.test_acc
            && self.best_epoch == other.best_epoch
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitPart {
    Train,
    Val,
    Test,
}

fn part_indices(data: &Dataset, part: SplitPart) -> &[usize] {
    let split = data.split();
    match part {
        SplitPart::Train => &split.train,
        SplitPart::Val => &split.val,
        SplitPart::Test => &split.test,
    }
}

/// Argmax with ties broken by the lowest class index.
pub fn argmax_row(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of the given rows whose argmax matches the label.
pub fn accuracy(logits: &Tensor, labels: &[usize], indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::InvalidInput(String::from("empty evaluation set")));
    }
    let c = logits.cols();
    let correct = indices
        .iter()
        .filter(|&&i| argmax_row(&logits.data()[i * c..(i + 1) * c]) == labels[i])
        .count();
    Ok(correct as f64 / indices.len() as f64)
}

#[cfg(feature = "std")]
fn now() -> Option<std::time::Instant> {
    Some(std::time::Instant::now())
}

#[cfg(not(feature = "std"))]
fn now() -> Option<()> {
    None
}

#[cfg(feature = "std")]
fn elapsed(t: &Option<std::time::Instant>) -> f64 {
    t.map(|t| t.elapsed().as_secs_f64()).unwrap_or(0.0)
}

#[cfg(not(feature = "std"))]
fn elapsed(_t: &Option<()>) -> f64 {
    0.0
}

/// Accuracy of a trained model on one split part; dropout disabled.
pub fn evaluate(model: &SignGTModel, data: &Dataset, part: SplitPart) -> Result<f64> {
    let indices = part_indices(data, part);
    if indices.is_empty() {
        return Err(Error::InvalidInput(String::from("empty split part")));
    }
    match data {
        Dataset::Node(ds) => {
            let labels = ds.graph.require_labels()?;
            let logits = model_forward(model, &ds.graph, Mode::Eval)?;
            accuracy(&logits, labels, indices)
        }
        Dataset::Graph(ds) => {
            let mut correct = 0usize;
            for &gi in indices {
                let logits = model_forward(model, &ds.graphs[gi], Mode::Eval)?;
                if argmax_row(logits.data()) == ds.labels[gi] {
                    correct += 1;
                }
            }
            Ok(correct as f64 / indices.len() as f64)
        }
    }
}

/// Train with full-batch epochs (node task) or a per-graph loop with one
/// optimizer step per epoch (graph task). Tracks validation accuracy,
/// stops after `patience` epochs without improvement, and restores the
/// parameters of the best-validation epoch. Deterministic per seed.
pub fn fit(model: &mut SignGTModel, data: &Dataset, cfg: &TrainConfig) -> Result<RunHistory> {
    if data.split().train.is_empty() || data.split().val.is_empty() || data.split().test.is_empty()
    {
        return Err(Error::InvalidInput(String::from(
            "dataset split has an empty part",
        )));
    }
    match (&model.config.task, data) {
        (TaskKind::Node, Dataset::Node(_)) | (TaskKind::Graph, Dataset::Graph(_)) => {}
        _ => {
            return Err(Error::InvalidInput(String::from(
                "model task does not match dataset kind",
            )))
        }
    }
    model.config.attention.dropout_rate = cfg.dropout_rate;
    model.config.validate()?;

    let mut dropout_rng = SplitMix64::derive(cfg.seed, 0x0d0);
    let mut state = OptimizerState::new(&model.param_tensors());
    let mut history = RunHistory::default();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_snapshot = model.snapshot();
    let mut stale = 0usize;

    // Structural biases are computed once and reused across epochs.
    let node_bias: Option<StructuralBias> = match data {
        Dataset::Node(ds) => {
            model.attach_bias(&ds.graph)?;
            model.bias.as_ref().map(|(_, b)| b.clone())
        }
        Dataset::Graph(_) => None,
    };
    let graph_biases: Vec<StructuralBias> = match data {
        Dataset::Graph(ds) => ds
            .graphs
            .iter()
            .map(|g| model.bias_for(g))
            .collect::<Result<_>>()?,
        Dataset::Node(_) => Vec::new(),
    };

    for epoch in 0..cfg.max_epochs {
        let t0 = now();
        let fail = |e: Error| match e {
            Error::TrainingFailure { .. } => e,
            other => Error::TrainingFailure {
                epoch,
                message: other.to_string(),
            },
        };

        // One optimizer step on the training portion.
        let train_loss = match data {
            Dataset::Node(ds) => {
                let bias = node_bias.as_ref().expect("set above");
                let pass = model
                    .forward(&ds.graph, bias, Mode::Train, Some(&mut dropout_rng), None)
                    .map_err(fail)?;
                let mut tape = pass.tape;
                let labels = ds.graph.require_labels()?;
                let loss = cross_entropy(&mut tape, pass.logits, labels, &ds.split.train)
                    .map_err(fail)?;
                let loss_value = tape.data(loss)?[0];
                let grads = tape.backward(loss).map_err(fail)?;
                let grad_bufs: Vec<Vec<f64>> = pass
                    .param_vars
                    .iter()
                    .zip(model.param_tensors())
                    .map(|(&v, p)| {
                        Ok(grads
                            .grad(v)?
                            .map(|g| g.to_vec())
                            .unwrap_or_else(|| vec![0.0; p.numel()]))
                    })
                    .collect::<Result<_>>()?;
                let grad_refs: Vec<&[f64]> = grad_bufs.iter().map(|g| g.as_slice()).collect();
                adamw_step(
                    &mut model.param_tensors_mut(),
                    &grad_refs,
                    &mut state,
                    cfg.learning_rate,
                    cfg.weight_decay,
                )
                .map_err(fail)?;
                loss_value
            }
            Dataset::Graph(ds) => {
                let sizes: Vec<usize> = model.param_tensors().iter().map(|p| p.numel()).collect();
                let mut grad_acc: Vec<Vec<f64>> = sizes.iter().map(|&s| vec![0.0; s]).collect();
                let mut total = 0.0;
                let scale = 1.0 / ds.split.train.len() as f64;
                for &gi in &ds.split.train {
                    let pass = model
                        .forward(
                            &ds.graphs[gi],
                            &graph_biases[gi],
                            Mode::Train,
                            Some(&mut dropout_rng),
                            None,
                        )
                        .map_err(fail)?;
                    let mut tape = pass.tape;
                    let loss = cross_entropy(&mut tape, pass.logits, &[ds.labels[gi]], &[0])
                        .map_err(fail)?;
                    total += tape.data(loss)?[0] * scale;
                    let grads = tape.backward(loss).map_err(fail)?;
                    for (acc, &v) in grad_acc.iter_mut().zip(&pass.param_vars) {
                        if let Some(g) = grads.grad(v)? {
                            for (a, x) in acc.iter_mut().zip(g) {
                                *a += x * scale;
                            }
                        }
                    }
                }
                let grad_refs: Vec<&[f64]> = grad_acc.iter().map(|g| g.as_slice()).collect();
                adamw_step(
                    &mut model.param_tensors_mut(),
                    &grad_refs,
                    &mut state,
                    cfg.learning_rate,
                    cfg.weight_decay,
                )
                .map_err(fail)?;
                total
            }
        };

        if !train_loss.is_finite() {
            return Err(Error::TrainingFailure {
                epoch,
                message: format!("loss diverged to {train_loss}"),
            });
        }

        history.train_loss.push(train_loss);
        history
            .train_acc
            .push(evaluate(model, data, SplitPart::Train)?);
        history.val_acc.push(evaluate(model, data, SplitPart::Val)?);
        history
            .test_acc
            .push(evaluate(model, data, SplitPart::Test)?);
        history.epoch_seconds.push(elapsed(&t0));

        let val = *history.val_acc.last().unwrap();
        if val > best_val {
            best_val = val;
            history.best_epoch = epoch;
            best_snapshot = model.snapshot();
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    model.restore(&best_snapshot)?;
    Ok(history)
}
