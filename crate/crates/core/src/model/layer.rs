//! Layer assembly and the full forward pass.

use alloc::string::String;
use alloc::vec::Vec;

use super::attention::{multi_head_traced, HeadTrace};
use super::{sffn_forward, BoundLayer, BoundModel, ModelConfig, NormKind, SignGTModel, TaskKind, NORM_EPS};
use crate::error::{Error, Result};
use crate::graph::{adjacency_power, normalize_adjacency, Graph, StructuralBias};
use crate::rng::SplitMix64;
use crate::tensor::{Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active.
    Train,
    /// Deterministic forward; dropout disabled.
    Eval,
}

/// Values captured from a forward pass for inspection and export: raw
/// per-head scores and attention matrices per layer, plus the final node
/// representations (before the task head).
#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub scores: Vec<Vec<Tensor>>,
    pub attention: Vec<Vec<Tensor>>,
    pub representations: Option<Tensor>,
}

/// A recorded forward pass: the tape, the logits, and the parameter leaf
/// vars in canonical order (aligned with `SignGTModel::param_tensors`).
pub struct ForwardPass {
    pub tape: Tape,
    pub logits: Var,
    pub param_vars: Vec<Var>,
}

fn norm(tape: &mut Tape, h: Var, scale: Var, shift: Var, kind: NormKind) -> Result<Var> {
    match kind {
        NormKind::Standardize => tape.standardize_rows(h, scale, shift, NORM_EPS),
        NormKind::None => Ok(h),
    }
}

/// One layer in the pre-norm residual layout:
///
/// h1 = h + MultiHead(Norm(h));  h2 = h1 + SFFN(Norm(h1))
pub fn signgt_layer(
    tape: &mut Tape,
    h: Var,
    layer: &BoundLayer,
    bias: &StructuralBias,
    config: &ModelConfig,
    mode: Mode,
    rng: Option<&mut SplitMix64>,
) -> Result<Var> {
    signgt_layer_traced(tape, h, layer, bias, config, mode, rng, None)
}

#[allow(clippy::too_many_arguments)]
fn signgt_layer_traced(
    tape: &mut Tape,
    h: Var,
    layer: &BoundLayer,
    bias: &StructuralBias,
    config: &ModelConfig,
    mode: Mode,
    mut rng: Option<&mut SplitMix64>,
    trace: Option<&mut HeadTrace>,
) -> Result<Var> {
    let normed = norm(tape, h, layer.norm1_scale, layer.norm1_shift, config.norm)?;
    let (attended, ()) = multi_head_traced(
        tape,
        normed,
        layer,
        &config.attention,
        mode,
        rng.as_deref_mut(),
        trace,
    )?;
    let h1 = tape.add(h, attended)?;

    let normed = norm(tape, h1, layer.norm2_scale, layer.norm2_shift, config.norm)?;
    let mut ff = sffn_forward(tape, normed, bias.as_matrix_op(), layer)?;
    if mode == Mode::Train && config.attention.dropout_rate > 0.0 {
        // Dropout on the SFFN output activations, mirroring the attention
        // dropout placement.
        let rng = rng.ok_or_else(|| {
            Error::InvalidInput(String::from("training with dropout needs a generator"))
        })?;
        ff = dropout_const(tape, ff, config.attention.dropout_rate, rng)?;
    }
    tape.add(h1, ff)
}

fn dropout_const(tape: &mut Tape, x: Var, rate: f64, rng: &mut SplitMix64) -> Result<Var> {
    let shape = tape.shape(x)?.to_vec();
    let keep = 1.0 / (1.0 - rate);
    let n: usize = shape.iter().product();
    let mask: Vec<f64> = (0..n)
        .map(|_| if rng.next_f64() < rate { 0.0 } else { keep })
        .collect();
    let mask = tape.constant_from(&shape, mask)?;
    tape.mul(x, mask)
}

/// Permutation-invariant mean pooling over node rows: [n x d] -> [1 x d].
pub fn graph_readout(tape: &mut Tape, h: Var) -> Result<Var> {
    tape.mean_rows(h)
}

fn mlp_head(tape: &mut Tape, h: Var, bound: &BoundModel) -> Result<Var> {
    let hidden = tape.matmul(h, bound.head_w1)?;
    let hidden = tape.add_row(hidden, bound.head_b1)?;
    let hidden = tape.relu(hidden)?;
    let out = tape.matmul(hidden, bound.head_w2)?;
    tape.add_row(out, bound.head_b2)
}

impl SignGTModel {
    /// Record a full forward pass on a fresh tape: project the node
    /// attributes to the hidden width, apply the layer stack, then the
    /// task head (per-node logits, or readout plus logits for graph
    /// tasks). `rng` drives dropout masks and is required only when
    /// training with a nonzero dropout rate.
    pub fn forward(
        &self,
        g: &Graph,
        bias: &StructuralBias,
        mode: Mode,
        mut rng: Option<&mut SplitMix64>,
        mut trace: Option<&mut Trace>,
    ) -> Result<ForwardPass> {
        if g.feature_dim() != self.config.input_dim {
            return Err(Error::ShapeMismatch(alloc::format!(
                "graph features have width {}, model expects {}",
                g.feature_dim(),
                self.config.input_dim
            )));
        }
        if bias.n() != g.num_nodes() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "bias is over {} nodes, graph has {}",
                bias.n(),
                g.num_nodes()
            )));
        }
        let mut tape = Tape::new();
        let (bound, param_vars) = self.bind(&mut tape)?;

        let x = tape.constant(g.features())?;
        let mut h = tape.matmul(x, bound.proj_w)?;
        h = tape.add_row(h, bound.proj_b)?;

        for layer in &bound.layers {
            let mut head_trace = trace.as_deref_mut().map(|_| HeadTrace {
                scores: Vec::new(),
                attention: Vec::new(),
            });
            h = signgt_layer_traced(
                &mut tape,
                h,
                layer,
                bias,
                &self.config,
                mode,
                rng.as_deref_mut(),
                head_trace.as_mut(),
            )?;
            if let (Some(t), Some(ht)) = (trace.as_deref_mut(), head_trace) {
                let scores: Vec<Tensor> = ht
                    .scores
                    .iter()
                    .map(|&v| tape.value(v))
                    .collect::<Result<_>>()?;
                let attention: Vec<Tensor> = ht
                    .attention
                    .iter()
                    .map(|&v| tape.value(v))
                    .collect::<Result<_>>()?;
                t.scores.push(scores);
                t.attention.push(attention);
            }
        }

        if let Some(t) = trace {
            t.representations = Some(tape.value(h)?);
        }

        let logits = match self.config.task {
            TaskKind::Node => mlp_head(&mut tape, h, &bound)?,
            TaskKind::Graph => {
                let pooled = graph_readout(&mut tape, h)?;
                mlp_head(&mut tape, pooled, &bound)?
            }
        };

        Ok(ForwardPass {
            tape,
            logits,
            param_vars,
        })
    }

    /// Structural bias for a graph at this model's hop count, using the
    /// cached one when its fingerprint and hop count match.
    pub fn bias_for(&self, g: &Graph) -> Result<StructuralBias> {
        if let Some((key, b)) = &self.bias {
            if *key == g.structure_fingerprint() && b.k() == self.config.k_hops {
                return Ok(b.clone());
            }
        }
        adjacency_power(&normalize_adjacency(g), self.config.k_hops)
    }

    /// Precompute and cache the structural bias for a fixed graph.
    pub fn attach_bias(&mut self, g: &Graph) -> Result<()> {
        let bias = adjacency_power(&normalize_adjacency(g), self.config.k_hops)?;
        self.bias = Some((g.structure_fingerprint(), bias));
        Ok(())
    }
}

/// Forward pass returning the logits as a tensor; dropout must be inactive
/// (eval mode, or zero rate).
pub fn model_forward(model: &SignGTModel, g: &Graph, mode: Mode) -> Result<Tensor> {
    let bias = model.bias_for(g)?;
    let pass = model.forward(g, &bias, mode, None, None)?;
    pass.tape.value(pass.logits)
}
