use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::checkpoint::Checkpoint;
use super::config::RunConfig;
use super::data::{EvalSplit, TaskData, STREAM_INIT};
use super::metrics::{MetricsRecord, MetricsWriter};
use super::model::Model;
use crate::error::{Error, Result};
use crate::optim::{clip_in_place, AdamState};
use crate::tasks::stream_seed;
use crate::tensor::Tape;

pub const METRICS_FILE: &str = "metrics.csv";
pub const BEST_CHECKPOINT: &str = "best.prnn";
pub const LAST_CHECKPOINT: &str = "last.prnn";
pub const CONFIG_FILE: &str = "config.txt";

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    /// Completed iterations, including any from a resumed checkpoint.
    pub iterations: u64,
    pub records: Vec<MetricsRecord>,
    pub best_valid: Option<f64>,
    /// First evaluated iteration whose validation loss fell below the task
    /// threshold.
    pub crossed_at: Option<u64>,
    pub stopped_early: bool,
    pub metrics_path: PathBuf,
    pub best_checkpoint: PathBuf,
    pub last_checkpoint: PathBuf,
}

impl TrainOutcome {
    pub fn last_record(&self) -> Option<&MetricsRecord> {
        self.records.last()
    }
}

/// Training state: model, optimizer and data stream.
pub struct Trainer {
    cfg: RunConfig,
    data: TaskData,
    pub model: Model,
    pub adam: AdamState,
    pub iteration: u64,
}

impl Trainer {
    /// Fresh model, or the state stored in `cfg.resume`.
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let data = TaskData::new(cfg)?;
        let (model, adam, iteration) = match &cfg.resume {
            Some(path) => {
                let ckpt = Checkpoint::load(path)?;
                check_compatible(&ckpt, cfg, &data)?;
                let model = Model::from_checkpoint(&ckpt)?;
                let mut adam = ckpt.adam;
                adam.config = cfg.adam;
                (model, adam, ckpt.iteration)
            }
            None => {
                let cell_cfg = cfg.cell_config(data.input_size);
                let model = Model::init(&cell_cfg, data.output_size, stream_seed(cfg.seed, STREAM_INIT, 0))?;
                let adam = AdamState::new(cfg.adam, model.named_params().into_iter().map(|(_, t)| t));
                (model, adam, 0)
            }
        };
        Ok(Trainer {
            cfg: cfg.clone(),
            data,
            model,
            adam,
            iteration,
        })
    }

    /// One clipped Adam update on the next training batch. Returns the batch
    /// loss before the update.
    pub fn step(&mut self) -> Result<f64> {
        let batch = self.data.train_batch(self.iteration)?;
        let mut tape = Tape::new();
        let (loss, vars) = self.model.loss(&mut tape, &batch, true)?;
        let value = tape.value(loss).item()?;
        if !value.is_finite() {
            return Err(Error::NonFinite {
                iteration: self.iteration + 1,
                value,
            });
        }
        let mut grads = tape.backward(loss)?;
        drop(tape);
        let mut grads: Vec<_> = vars.into_iter().map(|v| grads.take(v)).collect();
        clip_in_place(&mut grads, -self.cfg.clip, self.cfg.clip)?;
        self.adam.step(&mut self.model.params_mut(), &grads)?;
        self.iteration += 1;
        Ok(value)
    }

    pub fn evaluate(&self, split: EvalSplit) -> Result<f64> {
        self.data.evaluate(&self.model, split)
    }

    pub fn epoch_len(&self) -> u64 {
        self.data.epoch_len()
    }

    /// Iteration at which training ends.
    pub fn budget(&self) -> u64 {
        let total = self.cfg.epochs.saturating_mul(self.epoch_len());
        if self.cfg.max_iters > 0 {
            total.min(self.cfg.max_iters)
        } else {
            total
        }
    }

    pub fn checkpoint(&self, valid_loss: Option<f64>) -> Checkpoint {
        Checkpoint {
            task: self.cfg.task,
            cell: self.model.kind(),
            input_size: self.model.cell.input_size,
            hidden_size: self.model.cell.hidden_size,
            output_size: self.model.output_size(),
            seed: self.cfg.seed,
            iteration: self.iteration,
            valid_loss,
            params: self
                .model
                .named_params()
                .into_iter()
                .map(|(n, t)| (n, t.clone()))
                .collect(),
            adam: self.adam.clone(),
        }
    }
}

fn check_compatible(ckpt: &Checkpoint, cfg: &RunConfig, data: &TaskData) -> Result<()> {
    let want = (cfg.task, cfg.cell, data.input_size, cfg.hidden_size(), data.output_size);
    let have = (
        ckpt.task,
        ckpt.cell,
        ckpt.input_size,
        ckpt.hidden_size,
        ckpt.output_size,
    );
    if want != have {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {} {} ({}→{}→{}), config asks for {} {} ({}→{}→{})",
            have.0, have.1, have.2, have.3, have.4, want.0, want.1, want.2, want.3, want.4
        )));
    }
    Ok(())
}

fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".write-test");
    fs::write(&probe, b"")?;
    fs::remove_file(probe)?;
    Ok(())
}

/// Trains until the epoch or iteration budget is spent, patience runs out,
/// or (with `stop_at_threshold`) the task threshold is crossed.
///
/// Writes `metrics.csv`, `best.prnn` (lowest validation loss so far; the
/// initial parameters until the first evaluation), `last.prnn` and a copy of
/// the configuration to `cfg.out`.
pub fn train(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    ensure_writable(&cfg.out)?;
    let mut trainer = Trainer::new(cfg)?;
    let start = Instant::now();

    let metrics_path = cfg.out.join(METRICS_FILE);
    let best_path = cfg.out.join(BEST_CHECKPOINT);
    let last_path = cfg.out.join(LAST_CHECKPOINT);
    fs::write(cfg.out.join(CONFIG_FILE), cfg.to_text())?;

    let mut best_valid = None;
    let mut metrics = if cfg.resume.is_some() {
        if best_path.exists() {
            best_valid = Checkpoint::load(&best_path)?.valid_loss;
        }
        MetricsWriter::append(&metrics_path, trainer.iteration)?
    } else {
        trainer.checkpoint(None).save(&best_path)?;
        MetricsWriter::create(&metrics_path)?
    };

    let budget = trainer.budget();
    let epoch_len = trainer.epoch_len();
    let threshold = cfg.threshold();
    let mut records = Vec::new();
    let mut crossed_at = None;
    let mut since_best = 0;
    let mut stopped_early = false;
    let mut last_valid = None;
    let (mut loss_sum, mut loss_count) = (0.0, 0u64);

    while trainer.iteration < budget {
        loss_sum += trainer.step()?;
        loss_count += 1;
        let it = trainer.iteration;
        if it % cfg.eval_interval != 0 && it != budget {
            continue;
        }
        let valid = trainer.evaluate(EvalSplit::Valid)?;
        let record = MetricsRecord {
            iteration: it,
            epoch: it / epoch_len,
            seconds: if cfg.wallclock {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            },
            train_loss: loss_sum / loss_count as f64,
            valid_loss: valid,
            units: cfg.task.units(),
            cell: cfg.cell,
            seed: cfg.seed,
        };
        metrics.write(&record)?;
        records.push(record);
        (loss_sum, loss_count) = (0.0, 0);
        last_valid = Some(valid);

        if best_valid.is_none_or(|b| valid < b) {
            best_valid = Some(valid);
            since_best = 0;
            trainer.checkpoint(Some(valid)).save(&best_path)?;
        } else {
            since_best += 1;
        }
        if crossed_at.is_none() && threshold.is_some_and(|t| valid < t) {
            crossed_at = Some(it);
            if cfg.stop_at_threshold {
                stopped_early = true;
                break;
            }
        }
        if cfg.patience > 0 && since_best >= cfg.patience {
            stopped_early = true;
            break;
        }
    }
    trainer.checkpoint(last_valid).save(&last_path)?;

    Ok(TrainOutcome {
        iterations: trainer.iteration,
        records,
        best_valid,
        crossed_at,
        stopped_early,
        metrics_path,
        best_checkpoint: best_path,
        last_checkpoint: last_path,
    })
}

/// Loss of a checkpoint on held-out data. Parameters are not modified.
pub fn evaluate(ckpt: &Checkpoint, cfg: &RunConfig, split: EvalSplit) -> Result<f64> {
    cfg.validate()?;
    let data = TaskData::new(cfg)?;
    check_compatible(ckpt, cfg, &data)?;
    let model = Model::from_checkpoint(ckpt)?;
    data.evaluate(&model, split)
}
