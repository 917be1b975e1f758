//! Attention: raw scores, the three normalization variants, aggregation,
//! and the multi-head assembly.

use alloc::vec::Vec;

use super::{AttentionConfig, AttentionVariant, BoundLayer, Mode};
use crate::error::Result;
use crate::math;
use crate::rng::SplitMix64;
use crate::tensor::{Tape, Var};

/// Raw pairwise scores S = (H Wq)(H Wk)^T, divided by sqrt(head_dim) when
/// `scale_scores` is set.
pub fn attention_scores(
    tape: &mut Tape,
    h: Var,
    wq: Var,
    wk: Var,
    config: &AttentionConfig,
) -> Result<Var> {
    let q = tape.matmul(h, wq)?;
    let k = tape.matmul(h, wk)?;
    let kt = tape.transpose(k)?;
    let s = tape.matmul(q, kt)?;
    if config.scale_scores {
        tape.scale(s, 1.0 / math::sqrt(config.head_dim as f64))
    } else {
        Ok(s)
    }
}

/// Signed softmax: separate each score's sign from its magnitude, softmax
/// the magnitudes row-wise, reattach the signs. Row absolute values sum to
/// one; each entry keeps the sign of its score (sign(0) counts as +1).
pub fn signed_softmax(tape: &mut Tape, scores: Var) -> Result<Var> {
    let signs = tape.sign(scores)?;
    let magnitudes = tape.abs(scores)?;
    let normalized = tape.softmax_rows(magnitudes)?;
    tape.mul(signs, normalized)
}

/// Plain row softmax of the scores; all weights positive, rows sum to one.
pub fn original_softmax(tape: &mut Tape, scores: Var) -> Result<Var> {
    tape.softmax_rows(scores)
}

/// tanh of the scores, entrywise, with no normalization. Every weight lies
/// strictly inside (-1, 1).
pub fn tanh_attention(tape: &mut Tape, scores: Var) -> Result<Var> {
    tape.tanh(scores)
}

/// Weighted aggregation of value rows: M * V.
pub fn aggregate(tape: &mut Tape, m: Var, v: Var) -> Result<Var> {
    tape.matmul(m, v)
}

fn variant_attention(tape: &mut Tape, scores: Var, variant: AttentionVariant) -> Result<Var> {
    match variant {
        AttentionVariant::Signed => signed_softmax(tape, scores),
        AttentionVariant::Original => original_softmax(tape, scores),
        AttentionVariant::Tanh => tanh_attention(tape, scores),
    }
}

/// Inverted dropout mask as a tape constant: entries are 0 with
/// probability `rate`, 1/(1-rate) otherwise.
fn dropout(tape: &mut Tape, x: Var, rate: f64, rng: &mut SplitMix64) -> Result<Var> {
    let shape = tape.shape(x)?.to_vec();
    let keep = 1.0 / (1.0 - rate);
    let n: usize = shape.iter().product();
    let mask: Vec<f64> = (0..n)
        .map(|_| if rng.next_f64() < rate { 0.0 } else { keep })
        .collect();
    let mask = tape.constant_from(&shape, mask)?;
    tape.mul(x, mask)
}

/// Per-head traces captured during a forward pass.
pub(crate) struct HeadTrace {
    pub scores: Vec<Var>,
    pub attention: Vec<Var>,
}

/// Multi-head attention: per head, scores -> variant attention ->
/// aggregation; the head outputs are concatenated along the feature axis
/// and projected by the output matrix. Attention dropout (training mode
/// only) is applied to the attention matrix entries after normalization.
pub fn multi_head(
    tape: &mut Tape,
    h: Var,
    layer: &BoundLayer,
    config: &AttentionConfig,
    mode: Mode,
    rng: Option<&mut SplitMix64>,
) -> Result<Var> {
    multi_head_traced(tape, h, layer, config, mode, rng, None).map(|(out, _)| out)
}

pub(crate) fn multi_head_traced(
    tape: &mut Tape,
    h: Var,
    layer: &BoundLayer,
    config: &AttentionConfig,
    mode: Mode,
    mut rng: Option<&mut SplitMix64>,
    mut trace: Option<&mut HeadTrace>,
) -> Result<(Var, ())> {
    let mut heads = Vec::with_capacity(config.num_heads);
    for i in 0..config.num_heads {
        let s = attention_scores(tape, h, layer.wq[i], layer.wk[i], config)?;
        let mut m = variant_attention(tape, s, config.variant)?;
        if let Some(t) = trace.as_deref_mut() {
            t.scores.push(s);
            t.attention.push(m);
        }
        if mode == Mode::Train && config.dropout_rate > 0.0 {
            let rng = rng
                .as_deref_mut()
                .ok_or_else(|| crate::Error::InvalidInput(alloc::string::String::from(
                    "training with dropout needs a generator",
                )))?;
            m = dropout(tape, m, config.dropout_rate, rng)?;
        }
        let v = tape.matmul(h, layer.wv[i])?;
        heads.push(aggregate(tape, m, v)?);
    }
    let cat = tape.concat_cols(&heads)?;
    Ok((tape.matmul(cat, layer.wo)?, ()))
}
