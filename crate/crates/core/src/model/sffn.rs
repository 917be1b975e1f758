//! Structure-aware feed-forward network.

use alloc::sync::Arc;

use super::BoundLayer;
use crate::error::Result;
use crate::tensor::{MatrixOp, Tape, Var};

/// Two linear layers around a ReLU, with the hidden activations mixed by
/// the precomputed k-hop propagation matrix:
///
/// out = Linear2(ReLU(B * Linear1(H)))
///
/// where B is the k-th power of the normalized adjacency. Each node's
/// hidden state is therefore a structurally weighted sum over its k-hop
/// neighborhood. With k = 0 the mix matrix is the identity and this
/// reduces exactly to a plain position-wise feed-forward network.
pub fn sffn_forward(
    tape: &mut Tape,
    h: Var,
    bias: Arc<dyn MatrixOp>,
    layer: &BoundLayer,
) -> Result<Var> {
    let inner = tape.matmul(h, layer.sffn_w1)?;
    let inner = tape.add_row(inner, layer.sffn_b1)?;
    let mixed = tape.apply_matrix(bias, inner)?;
    let hidden = tape.relu(mixed)?;
    let out = tape.matmul(hidden, layer.sffn_w2)?;
    tape.add_row(out, layer.sffn_b2)
}
