//! Classification loss.

use crate::error::Result;
use crate::tensor::{Tape, Var};

/// Mean over the masked rows of -log softmax(logits)[label], computed with
/// log-sum-exp so extreme logits cannot overflow.
pub fn cross_entropy(tape: &mut Tape, logits: Var, labels: &[usize], mask: &[usize]) -> Result<Var> {
    tape.cross_entropy(logits, labels, mask)
}
