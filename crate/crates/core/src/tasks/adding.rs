//! The adding problem: two channels of length `T`, uniform values and a
//! marker channel flagging one position in each half. The target is the sum
//! of the two flagged values.

use std::fmt::Write;

use rand::Rng;

use super::rng;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// MSE of always predicting 1.0 (exactly 1/6, reported rounded).
pub const ADDING_BASELINE_MSE: f64 = 0.167;

#[derive(Clone, Debug, PartialEq)]
pub struct AddingBatch {
    /// `[batch, T, 2]`: channel 0 values in `[0, 1)`, channel 1 markers.
    pub inputs: Tensor,
    /// `[batch, 1]`
    pub targets: Tensor,
    /// Marked positions per sequence.
    pub markers: Vec<(usize, usize)>,
}

pub fn gen_adding(seed: u64, batch: usize, steps: usize) -> Result<AddingBatch> {
    if steps < 2 {
        return Err(Error::contract(format!("adding task needs T >= 2, got {steps}")));
    }
    if batch == 0 {
        return Err(Error::contract("adding task needs batch >= 1"));
    }
    let mut rng = rng(seed);
    let half = steps / 2;
    let mut inputs = vec![0.0; batch * steps * 2];
    let mut targets = Vec::with_capacity(batch);
    let mut markers = Vec::with_capacity(batch);
    for b in 0..batch {
        let seq = &mut inputs[b * steps * 2..(b + 1) * steps * 2];
        for t in 0..steps {
            seq[2 * t] = rng.random::<f64>();
        }
        let first = rng.random_range(0..half);
        let second = rng.random_range(half..steps);
        seq[2 * first + 1] = 1.0;
        seq[2 * second + 1] = 1.0;
        targets.push(seq[2 * first] + seq[2 * second]);
        markers.push((first, second));
    }
    Ok(AddingBatch {
        inputs: Tensor::new(vec![batch, steps, 2], inputs)?,
        targets: Tensor::new(vec![batch, 1], targets)?,
        markers,
    })
}

impl AddingBatch {
    pub fn batch_size(&self) -> usize {
        self.inputs.shape()[0]
    }

    pub fn steps(&self) -> usize {
        self.inputs.shape()[1]
    }

    /// Long-format CSV: `seq,step,value,marker,target`, values in shortest
    /// round-trip form.
    pub fn to_csv(&self) -> String {
        let (batch, steps) = (self.batch_size(), self.steps());
        let mut out = String::from("seq,step,value,marker,target\n");
        for b in 0..batch {
            let target = self.targets.data()[b];
            for t in 0..steps {
                let value = self.inputs.at(&[b, t, 0]);
                let marker = self.inputs.at(&[b, t, 1]);
                let _ = writeln!(out, "{b},{t},{value:?},{},{target:?}", marker as u8);
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = parse_rows(text, "seq,step,value,marker,target", 5)?;
        let batch = rows.iter().map(|r| r[0] as usize + 1).max().unwrap_or(0);
        let steps = rows.iter().map(|r| r[1] as usize + 1).max().unwrap_or(0);
        if batch == 0 || rows.len() != batch * steps {
            return Err(Error::contract("adding CSV is not a dense batch"));
        }
        let mut inputs = vec![0.0; batch * steps * 2];
        let mut targets = vec![0.0; batch];
        for r in &rows {
            let (b, t) = (r[0] as usize, r[1] as usize);
            inputs[(b * steps + t) * 2] = r[2];
            inputs[(b * steps + t) * 2 + 1] = r[3];
            targets[b] = r[4];
        }
        let mut markers = Vec::with_capacity(batch);
        for b in 0..batch {
            let flagged: Vec<usize> = (0..steps).filter(|&t| inputs[(b * steps + t) * 2 + 1] == 1.0).collect();
            let &[first, second] = flagged.as_slice() else {
                return Err(Error::contract(format!("sequence {b} has {} markers", flagged.len())));
            };
            markers.push((first, second));
        }
        Ok(AddingBatch {
            inputs: Tensor::new(vec![batch, steps, 2], inputs)?,
            targets: Tensor::new(vec![batch, 1], targets)?,
            markers,
        })
    }

    /// Checks the structural invariants: one marker per half and the target
    /// equal to the sum of the marked values.
    pub fn validate(&self) -> Result<()> {
        let steps = self.steps();
        let half = steps / 2;
        for (b, &(first, second)) in self.markers.iter().enumerate() {
            if first >= half || second < half || second >= steps {
                return Err(Error::contract(format!("sequence {b}: markers ({first}, {second})")));
            }
            let markers: f64 = (0..steps).map(|t| self.inputs.at(&[b, t, 1])).sum();
            if markers != 2.0 {
                return Err(Error::contract(format!("sequence {b}: {markers} markers")));
            }
            let sum = self.inputs.at(&[b, first, 0]) + self.inputs.at(&[b, second, 0]);
            if sum != self.targets.data()[b] {
                return Err(Error::contract(format!("sequence {b}: target is not the marked sum")));
            }
        }
        Ok(())
    }
}

pub(crate) fn parse_rows(text: &str, header: &str, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(header) {
        return Err(Error::contract(format!("expected CSV header '{header}'")));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::contract(format!("bad CSV line '{line}': {e}")))?;
            if fields.len() != width {
                return Err(Error::contract(format!("bad CSV line '{line}'")));
            }
            Ok(fields)
        })
        .collect()
}
