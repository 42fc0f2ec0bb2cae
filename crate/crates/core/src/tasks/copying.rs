//! The copying memory problem.
//!
//! Inputs have length `T + 20`: ten data symbols from `C0..C7`, `T - 1`
//! blanks (`C8`), the delimiter `C9`, then ten more blanks. The target is
//! blank everywhere except the last ten steps, which must repeat the ten data
//! symbols in order.

use std::fmt::Write;

use rand::Rng;

use super::adding::parse_rows;
use super::{rng, seq_cross_entropy, TokenGrid};
use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor};

pub const DATA_SYMBOLS: usize = 8;
pub const BLANK: usize = 8;
pub const DELIMITER: usize = 9;
pub const INPUT_SYMBOLS: usize = 10;
/// Targets never contain the delimiter, so predictions range over `C0..C8`.
pub const OUTPUT_CLASSES: usize = 9;
pub const COPY_LEN: usize = 10;

/// Expected per-step cross-entropy (nats) of the best memoryless predictor:
/// blanks for the first `T + 10` steps, uniform over the data symbols after.
pub fn copying_baseline(delay: usize) -> f64 {
    COPY_LEN as f64 * (DATA_SYMBOLS as f64).ln() / (delay + 2 * COPY_LEN) as f64
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CopyingBatch {
    pub delay: usize,
    /// `[batch, T + 20]` over `C0..C9`.
    pub inputs: TokenGrid,
    /// `[batch, T + 20]` over `C0..C8`.
    pub targets: TokenGrid,
}

pub fn gen_copying(seed: u64, batch: usize, delay: usize) -> Result<CopyingBatch> {
    if delay < 1 {
        return Err(Error::contract("copying task needs T >= 1"));
    }
    if batch == 0 {
        return Err(Error::contract("copying task needs batch >= 1"));
    }
    let len = delay + 2 * COPY_LEN;
    let mut rng = rng(seed);
    let mut inputs = vec![BLANK; batch * len];
    let mut targets = vec![BLANK; batch * len];
    for b in 0..batch {
        let row = &mut inputs[b * len..(b + 1) * len];
        for slot in row.iter_mut().take(COPY_LEN) {
            *slot = rng.random_range(0..DATA_SYMBOLS);
        }
        row[delay + COPY_LEN - 1] = DELIMITER;
        let data: Vec<usize> = row[..COPY_LEN].to_vec();
        targets[b * len + delay + COPY_LEN..(b + 1) * len].copy_from_slice(&data);
    }
    Ok(CopyingBatch {
        delay,
        inputs: TokenGrid::new(batch, len, inputs)?,
        targets: TokenGrid::new(batch, len, targets)?,
    })
}

/// Cross-entropy of the memoryless strategy on `batch`, computed through
/// [`seq_cross_entropy`]: a certain blank for the first `T + 10` steps and a
/// uniform guess over `C0..C7` for the rest.
pub fn memoryless_copying_loss(batch: &CopyingBatch) -> Result<f64> {
    const OFF: f64 = -1e9;
    let (rows, len) = (batch.inputs.rows, batch.inputs.cols);
    let mut logits = Vec::with_capacity(rows * len * OUTPUT_CLASSES);
    for _ in 0..rows {
        for t in 0..len {
            for k in 0..OUTPUT_CLASSES {
                let on = if t < batch.delay + COPY_LEN {
                    k == BLANK
                } else {
                    k < DATA_SYMBOLS
                };
                logits.push(if on { 0.0 } else { OFF });
            }
        }
    }
    let mut tape = Tape::new();
    let logits = tape.constant(Tensor::new(vec![rows, len, OUTPUT_CLASSES], logits)?);
    let mask = Tensor::filled(&[rows, len], 1.0);
    let loss = seq_cross_entropy(&mut tape, logits, &batch.targets, &mask)?;
    tape.value(loss).item()
}

impl CopyingBatch {
    pub fn seq_len(&self) -> usize {
        self.inputs.cols
    }

    pub fn one_hot_inputs(&self) -> Result<Tensor> {
        self.inputs.one_hot(INPUT_SYMBOLS)
    }

    /// Long-format CSV: `seq,step,input,target`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("seq,step,input,target\n");
        for b in 0..self.inputs.rows {
            for t in 0..self.inputs.cols {
                let _ = writeln!(out, "{b},{t},{},{}", self.inputs.get(b, t), self.targets.get(b, t));
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = parse_rows(text, "seq,step,input,target", 4)?;
        let batch = rows.iter().map(|r| r[0] as usize + 1).max().unwrap_or(0);
        let len = rows.iter().map(|r| r[1] as usize + 1).max().unwrap_or(0);
        if batch == 0 || rows.len() != batch * len || len <= 2 * COPY_LEN {
            return Err(Error::contract("copying CSV is not a dense batch"));
        }
        let mut inputs = vec![0; batch * len];
        let mut targets = vec![0; batch * len];
        for r in &rows {
            let idx = r[0] as usize * len + r[1] as usize;
            inputs[idx] = r[2] as usize;
            targets[idx] = r[3] as usize;
        }
        Ok(CopyingBatch {
            delay: len - 2 * COPY_LEN,
            inputs: TokenGrid::new(batch, len, inputs)?,
            targets: TokenGrid::new(batch, len, targets)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let (delay, len) = (self.delay, self.seq_len());
        if len != delay + 2 * COPY_LEN || self.targets.cols != len || self.targets.rows != self.inputs.rows {
            return Err(Error::contract("copying batch has inconsistent lengths"));
        }
        for b in 0..self.inputs.rows {
            let input = self.inputs.row(b);
            let target = self.targets.row(b);
            let fail = |what: &str| Err(Error::contract(format!("sequence {b}: {what}")));
            if input[..COPY_LEN].iter().any(|&s| s >= DATA_SYMBOLS) {
                return fail("data symbol outside C0..C7");
            }
            if input[COPY_LEN..delay + COPY_LEN - 1].iter().any(|&s| s != BLANK) {
                return fail("delay period is not blank");
            }
            if input[delay + COPY_LEN - 1] != DELIMITER {
                return fail("missing delimiter");
            }
            if input[delay + COPY_LEN..].iter().any(|&s| s != BLANK) {
                return fail("recall period input is not blank");
            }
            if target[..delay + COPY_LEN].iter().any(|&s| s != BLANK) {
                return fail("target is not blank before recall");
            }
            if target[delay + COPY_LEN..] != input[..COPY_LEN] {
                return fail("recalled symbols differ from the input");
            }
        }
        Ok(())
    }
}
