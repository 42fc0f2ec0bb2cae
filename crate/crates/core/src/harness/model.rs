//! A recurrent cell with a linear readout, and its losses on each task.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkpoint::Checkpoint;
use crate::cells::{unroll, CellConfig, CellKind, CellParams, Dense};
use crate::error::{Error, Result};
use crate::tasks::{mse, seq_cross_entropy, AddingBatch, TokenGrid};
use crate::tensor::{Tape, Tensor, Var};

/// Training or evaluation data in model-ready form.
#[derive(Clone, Debug)]
pub enum Batch {
    /// Regress a scalar from the final hidden state.
    Final(AddingBatch),
    /// Classify every step: `inputs` is `[B, T, d]`, `mask` is `[B, T]`.
    PerStep {
        inputs: Tensor,
        targets: TokenGrid,
        mask: Tensor,
    },
}

impl Batch {
    /// Number of loss terms the batch mean is taken over.
    pub fn weight(&self) -> f64 {
        match self {
            Batch::Final(b) => b.batch_size() as f64,
            Batch::PerStep { mask, .. } => mask.data().iter().sum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub cell: CellParams,
    pub readout: Dense<Tensor>,
}

impl Model {
    /// Cell initialization as configured; readout weights uniform in the
    /// same range with a zero bias.
    pub fn init(cfg: &CellConfig, output_size: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cell = CellParams::init(cfg, &mut rng)?;
        let r = cfg.init_range;
        let readout = Dense {
            w: Tensor::uniform(&[cfg.hidden_size, output_size], -r, r, &mut rng),
            b: Tensor::zeros(&[output_size]),
        };
        Ok(Model { cell, readout })
    }

    pub fn kind(&self) -> CellKind {
        self.cell.kind
    }

    pub fn output_size(&self) -> usize {
        self.readout.b.len()
    }

    /// Every tensor under a stable, unique name.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = self
            .cell
            .weights
            .entries()
            .into_iter()
            .map(|(n, t)| (format!("cell.{n}"), t))
            .collect();
        out.push(("readout.W".into(), &self.readout.w));
        out.push(("readout.b".into(), &self.readout.b));
        out
    }

    /// Mutable tensors in [`named_params`](Self::named_params) order.
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.cell.weights.values_mut();
        out.push(&mut self.readout.w);
        out.push(&mut self.readout.b);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.len()).sum()
    }

    /// Rebuilds a model from checkpointed tensors, checking every name and
    /// shape against a freshly laid out model of the recorded kind.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let has_candidate_bias = ckpt.params.iter().any(|(n, _)| n == "cell.b");
        let cfg = CellConfig {
            gru_candidate_bias: has_candidate_bias,
            ..CellConfig::new(ckpt.cell, ckpt.input_size, ckpt.hidden_size)
        };
        let mut model = Model {
            cell: CellParams::zeros(&cfg),
            readout: Dense {
                w: Tensor::zeros(&[ckpt.hidden_size, ckpt.output_size]),
                b: Tensor::zeros(&[ckpt.output_size]),
            },
        };
        let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
        if names.len() != ckpt.params.len() {
            return Err(Error::Checkpoint(format!(
                "{} cell expects {} tensors, checkpoint has {}",
                ckpt.cell,
                names.len(),
                ckpt.params.len()
            )));
        }
        for ((slot, name), (ck_name, value)) in model.params_mut().into_iter().zip(&names).zip(&ckpt.params) {
            if name != ck_name {
                return Err(Error::Checkpoint(format!("expected tensor {name}, found {ck_name}")));
            }
            if slot.shape() != value.shape() {
                return Err(Error::Checkpoint(format!(
                    "{name} has shape {:?}, expected {:?}",
                    value.shape(),
                    slot.shape()
                )));
            }
            *slot = value.clone();
        }
        Ok(model)
    }

    /// Records the batch loss on `tape`. Returns the loss and, when
    /// `trainable`, the parameter leaves in [`named_params`](Self::named_params)
    /// order.
    pub fn loss(&self, tape: &mut Tape, batch: &Batch, trainable: bool) -> Result<(Var, Vec<Var>)> {
        let cell = if trainable {
            self.cell.bind(tape)
        } else {
            self.cell.bind_frozen(tape)
        };
        let leaf = |tape: &mut Tape, t: &Tensor| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        };
        let rw = leaf(tape, &self.readout.w);
        let rb = leaf(tape, &self.readout.b);
        let mut vars: Vec<Var> = Vec::new();
        if trainable {
            vars = cell.weights.entries().into_iter().map(|(_, &v)| v).collect();
            vars.extend([rw, rb]);
        }

        let loss = match batch {
            Batch::Final(b) => {
                let run = unroll(tape, &cell, &b.inputs, None)?;
                let out = tape.matmul(run.last.h, rw)?;
                let pred = tape.add_bias(out, rb)?;
                let target = tape.constant(b.targets.clone());
                mse(tape, pred, target)?
            }
            Batch::PerStep { inputs, targets, mask } => {
                let run = unroll(tape, &cell, inputs, None)?;
                let mut logits = Vec::with_capacity(run.hidden.len());
                for &h in &run.hidden {
                    let z = tape.matmul(h, rw)?;
                    logits.push(tape.add_bias(z, rb)?);
                }
                let logits = tape.stack_time(&logits)?;
                seq_cross_entropy(tape, logits, targets, mask)?
            }
        };
        Ok((loss, vars))
    }

    /// Loss value without recording gradients.
    pub fn eval_loss(&self, batch: &Batch) -> Result<f64> {
        let mut tape = Tape::new();
        let (loss, _) = self.loss(&mut tape, batch, false)?;
        tape.value(loss).item()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::gen_adding;

    #[test]
    fn names_are_unique_and_ordered() {
        let m = Model::init(&CellConfig::new(CellKind::PruPlus, 3, 4), 2, 0).unwrap();
        let names: Vec<String> = m.named_params().into_iter().map(|(n, _)| n).collect();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
        assert_eq!(names.first().unwrap(), "cell.W");
        assert_eq!(names.last().unwrap(), "readout.b");
        assert_eq!(m.num_parameters(), m.cell.num_parameters() + 4 * 2 + 2);
    }

    #[test]
    fn trainable_loss_reaches_every_parameter() {
        let m = Model::init(&CellConfig::new(CellKind::Lstm, 2, 5), 1, 3).unwrap();
        let batch = Batch::Final(gen_adding(1, 4, 6).unwrap());
        let mut tape = Tape::new();
        let (loss, vars) = m.loss(&mut tape, &batch, true).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(vars.len(), m.named_params().len());
        for v in vars {
            assert!(grads.get(v).is_some());
        }
        assert_eq!(tape.value(loss).item().unwrap(), m.eval_loss(&batch).unwrap());
    }
}
