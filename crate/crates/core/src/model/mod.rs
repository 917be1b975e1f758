//! The signed-attention graph transformer.
//!
//! A model is a projection layer, a stack of layers (signed self-attention
//! followed by a structure-aware feed-forward network, both with residual
//! connections), and a task head. Parameters live in plain tensors; each
//! forward pass leases them onto a fresh tape.

mod attention;
mod layer;
mod sffn;

pub use attention::{
    aggregate, attention_scores, multi_head, original_softmax, signed_softmax, tanh_attention,
};
pub use layer::{graph_readout, model_forward, signgt_layer, ForwardPass, Mode, Trace};
pub use sffn::sffn_forward;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::StructuralBias;
use crate::rng::SplitMix64;
use crate::tensor::{Tape, Tensor, Var};

/// Epsilon inside the per-node standardization.
pub const NORM_EPS: f64 = 1e-5;

/// Which attention matrix a layer produces from raw scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttentionVariant {
    /// Signed self-attention: factor each score into sign and magnitude,
    /// softmax-normalize the magnitudes, reattach the signs.
    Signed,
    /// Plain row softmax (all weights positive).
    Original,
    /// tanh of the raw scores, no normalization.
    Tanh,
}

impl AttentionVariant {
    pub fn name(&self) -> &'static str {
        match self {
            AttentionVariant::Signed => "signed",
            AttentionVariant::Original => "original",
            AttentionVariant::Tanh => "tanh",
        }
    }
}

/// Residual-branch normalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    /// Per-node standardization with learned scale/shift (pre-norm layout).
    Standardize,
    /// No normalization; used for oracle comparisons.
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    Node,
    Graph,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttentionConfig {
    pub num_heads: usize,
    pub head_dim: usize,
    /// Divide raw scores by sqrt(head_dim) before the sign/magnitude split.
    pub scale_scores: bool,
    pub variant: AttentionVariant,
    pub dropout_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub d_model: usize,
    pub num_layers: usize,
    pub num_classes: usize,
    pub k_hops: usize,
    pub attention: AttentionConfig,
    pub norm: NormKind,
    pub task: TaskKind,
}

impl ModelConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        input_dim: usize,
        d_model: usize,
        num_heads: usize,
        num_layers: usize,
        num_classes: usize,
        k_hops: usize,
        variant: AttentionVariant,
        task: TaskKind,
    ) -> Result<Self> {
        if input_dim == 0 || d_model == 0 {
            return Err(Error::InvalidParameter(format!(
                "dimensions must be >= 1 (input {input_dim}, model {d_model})"
            )));
        }
        if num_heads == 0 || !d_model.is_multiple_of(num_heads) {
            return Err(Error::InvalidParameter(format!(
                "d_model {d_model} must be a positive multiple of num_heads {num_heads}"
            )));
        }
        if num_layers == 0 {
            return Err(Error::InvalidParameter(String::from("need at least one layer")));
        }
        if num_classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "classification needs >= 2 classes, got {num_classes}"
            )));
        }
        Ok(ModelConfig {
            input_dim,
            d_model,
            num_layers,
            num_classes,
            k_hops,
            attention: AttentionConfig {
                num_heads,
                head_dim: d_model / num_heads,
                scale_scores: true,
                variant,
                dropout_rate: 0.0,
            },
            norm: NormKind::Standardize,
            task,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.attention;
        if a.num_heads == 0 || a.head_dim == 0 {
            return Err(Error::InvalidParameter(format!(
                "heads {} / head_dim {} must be >= 1",
                a.num_heads, a.head_dim
            )));
        }
        if a.num_heads * a.head_dim != self.d_model {
            return Err(Error::InvalidParameter(format!(
                "d_model {} != heads {} * head_dim {}",
                self.d_model, a.num_heads, a.head_dim
            )));
        }
        if !(0.0..1.0).contains(&a.dropout_rate) {
            return Err(Error::InvalidParameter(format!(
                "dropout rate {} outside [0, 1)",
                a.dropout_rate
            )));
        }
        Ok(())
    }
}

/// Learnable parameters of one layer.
#[derive(Clone, Debug)]
pub struct LayerParams {
    pub wq: Vec<Tensor>,
    pub wk: Vec<Tensor>,
    pub wv: Vec<Tensor>,
    pub wo: Tensor,
    pub sffn_w1: Tensor,
    pub sffn_b1: Tensor,
    pub sffn_w2: Tensor,
    pub sffn_b2: Tensor,
    pub norm1_scale: Tensor,
    pub norm1_shift: Tensor,
    pub norm2_scale: Tensor,
    pub norm2_shift: Tensor,
}

/// Task head: a two-layer MLP. The output layer starts at zero so an
/// untrained model emits uniform logits.
#[derive(Clone, Debug)]
pub struct HeadParams {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

#[derive(Clone, Debug)]
pub struct SignGTModel {
    pub config: ModelConfig,
    pub proj_w: Tensor,
    pub proj_b: Tensor,
    pub layers: Vec<LayerParams>,
    pub head: HeadParams,
    /// Precomputed propagation matrix for single-graph (node) tasks,
    /// keyed by the graph's structure fingerprint.
    pub bias: Option<(u64, StructuralBias)>,
}

impl SignGTModel {
    /// Glorot-initialized model; deterministic per seed.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = SplitMix64::derive(seed, 0x1217);
        let d = config.d_model;
        let dk = config.attention.head_dim;
        let h = config.attention.num_heads;

        let proj_w = Tensor::glorot_with(&[config.input_dim, d], &mut rng)?;
        let proj_b = Tensor::zeros(&[1, d])?;

        let mut layers = Vec::with_capacity(config.num_layers);
        for _ in 0..config.num_layers {
            let mut wq = Vec::with_capacity(h);
            let mut wk = Vec::with_capacity(h);
            let mut wv = Vec::with_capacity(h);
            for _ in 0..h {
                wq.push(Tensor::glorot_with(&[d, dk], &mut rng)?);
                wk.push(Tensor::glorot_with(&[d, dk], &mut rng)?);
                wv.push(Tensor::glorot_with(&[d, dk], &mut rng)?);
            }
            layers.push(LayerParams {
                wq,
                wk,
                wv,
                wo: Tensor::glorot_with(&[h * dk, d], &mut rng)?,
                sffn_w1: Tensor::glorot_with(&[d, d], &mut rng)?,
                sffn_b1: Tensor::zeros(&[1, d])?,
                sffn_w2: Tensor::glorot_with(&[d, d], &mut rng)?,
                sffn_b2: Tensor::zeros(&[1, d])?,
                norm1_scale: Tensor::new(&[1, d], crate::tensor::Init::Constant(1.0))?,
                norm1_shift: Tensor::zeros(&[1, d])?,
                norm2_scale: Tensor::new(&[1, d], crate::tensor::Init::Constant(1.0))?,
                norm2_shift: Tensor::zeros(&[1, d])?,
            });
        }

        let head = HeadParams {
            w1: Tensor::glorot_with(&[d, d], &mut rng)?,
            b1: Tensor::zeros(&[1, d])?,
            w2: Tensor::zeros(&[d, config.num_classes])?,
            b2: Tensor::zeros(&[1, config.num_classes])?,
        };

        Ok(SignGTModel {
            config,
            proj_w,
            proj_b,
            layers,
            head,
            bias: None,
        })
    }

    /// Parameters in the canonical order used by binding, gradients, and
    /// the optimizer.
    pub fn param_tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        out.push(&self.proj_w);
        out.push(&self.proj_b);
        for l in &self.layers {
            out.extend(l.wq.iter());
            out.extend(l.wk.iter());
            out.extend(l.wv.iter());
            out.push(&l.wo);
            out.push(&l.sffn_w1);
            out.push(&l.sffn_b1);
            out.push(&l.sffn_w2);
            out.push(&l.sffn_b2);
            out.push(&l.norm1_scale);
            out.push(&l.norm1_shift);
            out.push(&l.norm2_scale);
            out.push(&l.norm2_shift);
        }
        out.push(&self.head.w1);
        out.push(&self.head.b1);
        out.push(&self.head.w2);
        out.push(&self.head.b2);
        out
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        out.push(&mut self.proj_w);
        out.push(&mut self.proj_b);
        for l in &mut self.layers {
            out.extend(l.wq.iter_mut());
            out.extend(l.wk.iter_mut());
            out.extend(l.wv.iter_mut());
            out.push(&mut l.wo);
            out.push(&mut l.sffn_w1);
            out.push(&mut l.sffn_b1);
            out.push(&mut l.sffn_w2);
            out.push(&mut l.sffn_b2);
            out.push(&mut l.norm1_scale);
            out.push(&mut l.norm1_shift);
            out.push(&mut l.norm2_scale);
            out.push(&mut l.norm2_shift);
        }
        out.push(&mut self.head.w1);
        out.push(&mut self.head.b1);
        out.push(&mut self.head.w2);
        out.push(&mut self.head.b2);
        out
    }

    pub fn num_params(&self) -> usize {
        self.param_tensors().iter().map(|t| t.numel()).sum()
    }

    /// Snapshot of all parameter buffers (for best-epoch restoration).
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.param_tensors()
            .iter()
            .map(|t| t.data().to_vec())
            .collect()
    }

    pub fn restore(&mut self, snapshot: &[Vec<f64>]) -> Result<()> {
        let mut params = self.param_tensors_mut();
        if params.len() != snapshot.len() {
            return Err(Error::InvalidInput(format!(
                "snapshot has {} buffers, model has {}",
                snapshot.len(),
                params.len()
            )));
        }
        for (p, s) in params.iter_mut().zip(snapshot) {
            if p.numel() != s.len() {
                return Err(Error::ShapeMismatch(format!(
                    "snapshot buffer {} vs parameter {}",
                    s.len(),
                    p.numel()
                )));
            }
            p.data_mut().copy_from_slice(s);
        }
        Ok(())
    }

    /// Lease all parameters onto a tape; returns the bound views plus the
    /// leaf vars in canonical order.
    pub fn bind(&self, tape: &mut Tape) -> Result<(BoundModel, Vec<Var>)> {
        let vars: Vec<Var> = self
            .param_tensors()
            .iter()
            .map(|t| tape.leaf(t))
            .collect::<Result<_>>()?;
        let bound = BoundModel::from_vars(&self.config, &vars)?;
        Ok((bound, vars))
    }
}

/// Tape-side view of one layer's parameters.
#[derive(Clone, Debug)]
pub struct BoundLayer {
    pub wq: Vec<Var>,
    pub wk: Vec<Var>,
    pub wv: Vec<Var>,
    pub wo: Var,
    pub sffn_w1: Var,
    pub sffn_b1: Var,
    pub sffn_w2: Var,
    pub sffn_b2: Var,
    pub norm1_scale: Var,
    pub norm1_shift: Var,
    pub norm2_scale: Var,
    pub norm2_shift: Var,
}

/// Tape-side view of the whole model, consuming vars in the same canonical
/// order that [`SignGTModel::param_tensors`] produces.
#[derive(Clone, Debug)]
pub struct BoundModel {
    pub proj_w: Var,
    pub proj_b: Var,
    pub layers: Vec<BoundLayer>,
    pub head_w1: Var,
    pub head_b1: Var,
    pub head_w2: Var,
    pub head_b2: Var,
}

impl BoundModel {
    pub fn from_vars(config: &ModelConfig, vars: &[Var]) -> Result<Self> {
        let h = config.attention.num_heads;
        let expected = 2 + config.num_layers * (3 * h + 9) + 4;
        if vars.len() != expected {
            return Err(Error::InvalidInput(format!(
                "expected {expected} parameter vars, got {}",
                vars.len()
            )));
        }
        let mut it = vars.iter().copied();
        let mut next = || it.next().expect("length checked above");
        let proj_w = next();
        let proj_b = next();
        let mut layers = Vec::with_capacity(config.num_layers);
        for _ in 0..config.num_layers {
            let wq: Vec<Var> = (0..h).map(|_| next()).collect();
            let wk: Vec<Var> = (0..h).map(|_| next()).collect();
            let wv: Vec<Var> = (0..h).map(|_| next()).collect();
            layers.push(BoundLayer {
                wq,
                wk,
                wv,
                wo: next(),
                sffn_w1: next(),
                sffn_b1: next(),
                sffn_w2: next(),
                sffn_b2: next(),
                norm1_scale: next(),
                norm1_shift: next(),
                norm2_scale: next(),
                norm2_shift: next(),
            });
        }
        Ok(BoundModel {
            proj_w,
            proj_b,
            layers,
            head_w1: next(),
            head_b1: next(),
            head_w2: next(),
            head_b2: next(),
        })
    }
}
