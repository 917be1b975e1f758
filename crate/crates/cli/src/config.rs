//! Run configuration: a JSON file plus flag overrides (flags win).

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use signgt_core::csbm::CsbmParams;
use signgt_core::model::{AttentionVariant, NormKind, TaskKind};
use signgt_core::train::TrainConfig;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Node,
    Graph,
}

impl From<Task> for TaskKind {
    fn from(t: Task) -> TaskKind {
        match t {
            Task::Node => TaskKind::Node,
            Task::Graph => TaskKind::Graph,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Signed,
    Original,
    Tanh,
}

impl From<Variant> for AttentionVariant {
    fn from(v: Variant) -> AttentionVariant {
        match v {
            Variant::Signed => AttentionVariant::Signed,
            Variant::Original => AttentionVariant::Original,
            Variant::Tanh => AttentionVariant::Tanh,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Standardize,
    None,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSpec {
    Path { path: PathBuf },
    Csbm { csbm: CsbmSpec },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsbmSpec {
    pub n: usize,
    pub num_classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    #[serde(default = "default_feat_dim")]
    pub feat_dim: usize,
    #[serde(default = "default_feat_signal")]
    pub feat_signal: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_feat_dim() -> usize {
    16
}
fn default_feat_signal() -> f64 {
    1.0
}

impl CsbmSpec {
    pub fn to_params(&self) -> CsbmParams {
        CsbmParams {
            n: self.n,
            num_classes: self.num_classes,
            p_in: self.p_in,
            p_out: self.p_out,
            feat_dim: self.feat_dim,
            feat_signal: self.feat_signal,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub layers: usize,
    pub d_model: usize,
    pub heads: usize,
    pub k: usize,
    pub variant: Variant,
    pub scale_scores: bool,
    pub norm: Norm,
    pub dropout: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            layers: 1,
            d_model: 32,
            heads: 4,
            k: 2,
            variant: Variant::Signed,
            scale_scores: true,
            norm: Norm::Standardize,
            dropout: 0.1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSpec {
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            lr: 1e-2,
            weight_decay: 5e-4,
            max_epochs: 300,
            patience: 30,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

/// Everything one run needs. Loaded from `--config`, then overridden by
/// flags.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    pub task: Task,
    pub dataset: Option<DatasetSpec>,
    pub model: ModelSpec,
    pub train: TrainSpec,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub split: SplitRatios,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            task: Task::Node,
            dataset: None,
            model: ModelSpec::default(),
            train: TrainSpec::default(),
            seeds: vec![0],
            out: None,
            split: SplitRatios::default(),
        }
    }
}

/// Flags shared by the run-style subcommands; every flag overrides the
/// corresponding config-file field.
#[derive(Args, Clone, Debug, Default)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory (alternative to the config file's dataset).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Random seed; repeat the flag for multi-seed runs.
    #[arg(long = "seed")]
    pub seeds: Vec<u64>,
    /// Attention variant.
    #[arg(long, value_enum)]
    pub variant: Option<Variant>,
    /// Neighborhood hop count for the structural bias.
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of layers.
    #[arg(long)]
    pub layers: Option<usize>,
    /// Hidden width.
    #[arg(long)]
    pub dmodel: Option<usize>,
    /// Attention heads.
    #[arg(long)]
    pub heads: Option<usize>,
    /// Output directory for run artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Task kind.
    #[arg(long, value_enum)]
    pub task: Option<Task>,
}

impl RunSpec {
    pub fn load(path: &Path) -> Result<RunSpec, CliError> {
        let text = std::fs::read_to_string(path)?;
        let spec: RunSpec = serde_json::from_str(&text)?;
        Ok(spec)
    }

    /// Config file (when given) plus flag overrides, validated.
    pub fn from_args(args: &RunArgs) -> Result<RunSpec, CliError> {
        let mut spec = match &args.config {
            Some(path) => RunSpec::load(path)?,
            None => RunSpec::default(),
        };
        if let Some(path) = &args.dataset {
            spec.dataset = Some(DatasetSpec::Path { path: path.clone() });
        }
        if !args.seeds.is_empty() {
            spec.seeds = args.seeds.clone();
        }
        if let Some(v) = args.variant {
            spec.model.variant = v;
        }
        if let Some(k) = args.k {
            spec.model.k = k;
        }
        if let Some(l) = args.layers {
            spec.model.layers = l;
        }
        if let Some(d) = args.dmodel {
            spec.model.d_model = d;
        }
        if let Some(h) = args.heads {
            spec.model.heads = h;
        }
        if let Some(o) = &args.out {
            spec.out = Some(o.clone());
        }
        if let Some(t) = args.task {
            spec.task = t;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(CliError::Config("at least one seed is required".into()));
        }
        if self.model.k > 5 {
            return Err(CliError::Config(format!(
                "k must lie in [0, 5], got {}",
                self.model.k
            )));
        }
        if self.model.layers == 0 {
            return Err(CliError::Config("layers must be >= 1".into()));
        }
        if self.model.heads == 0 || !self.model.d_model.is_multiple_of(self.model.heads) {
            return Err(CliError::Config(format!(
                "d_model {} must be a positive multiple of heads {}",
                self.model.d_model, self.model.heads
            )));
        }
        if !(0.0..1.0).contains(&self.model.dropout) {
            return Err(CliError::Config(format!(
                "dropout {} outside [0, 1)",
                self.model.dropout
            )));
        }
        let s = self.split;
        if ((s.train + s.val + s.test) - 1.0).abs() > 1e-9 {
            return Err(CliError::Config(format!(
                "split ratios {}/{}/{} do not sum to 1",
                s.train, s.val, s.test
            )));
        }
        if self.dataset.is_none() {
            return Err(CliError::Config(
                "no dataset: set `dataset.path` or `dataset.csbm` in the config, or pass --dataset"
                    .into(),
            ));
        }
        Ok(())
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.lr,
            weight_decay: self.train.weight_decay,
            dropout_rate: self.model.dropout,
            max_epochs: self.train.max_epochs,
            patience: self.train.patience,
            seed,
        }
    }

    pub fn norm_kind(&self) -> NormKind {
        match self.model.norm {
            Norm::Standardize => NormKind::Standardize,
            Norm::None => NormKind::None,
        }
    }
}
