use super::TokenGrid;
use crate::error::{Error, Result};
use crate::tensor::{Tape, Var};

/// Mean squared error over every entry.
pub fn mse(tape: &mut Tape, pred: Var, target: Var) -> Result<Var> {
    let diff = tape.sub(pred, target)?;
    let sq = tape.mul(diff, diff)?;
    tape.mean(sq, None)
}

/// Mean per-step cross-entropy (nats) of `[B, T, K]` logits against integer
/// targets, over the positions where `mask` (`[B, T]`, 0 or 1) is set.
pub fn seq_cross_entropy(tape: &mut Tape, logits: Var, targets: &TokenGrid, mask: &crate::Tensor) -> Result<Var> {
    let shape = tape.shape(logits).to_vec();
    if shape.len() != 3 || shape[0] != targets.rows || shape[1] != targets.cols {
        return Err(Error::dim("seq_cross_entropy", &shape, &[targets.rows, targets.cols]));
    }
    if mask.shape() != [targets.rows, targets.cols] {
        return Err(Error::dim(
            "seq_cross_entropy",
            &[targets.rows, targets.cols],
            mask.shape(),
        ));
    }
    if mask.data().iter().any(|&m| m != 0.0 && m != 1.0) {
        return Err(Error::contract("mask entries must be 0 or 1"));
    }
    tape.softmax_cross_entropy(logits, &targets.ids, mask.data())
}
