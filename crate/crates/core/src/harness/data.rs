//! Task data streams. Training batch `i` depends only on `(seed, i)`, so a
//! resumed run sees exactly the batches an uninterrupted run would.

use std::path::Path;

use super::config::{RunConfig, Task};
use super::model::{Batch, Model};
use crate::error::{Error, Result};
use crate::tasks::{
    batchify, gen_adding, gen_copying, load_corpus, stream_seed, CharCorpus, LmBatch, Split, BUNDLED_CORPUS,
    INPUT_SYMBOLS, OUTPUT_CLASSES,
};
use crate::tensor::Tensor;

pub(crate) const STREAM_INIT: u64 = 0;
const STREAM_TRAIN: u64 = 1;
const STREAM_VALID: u64 = 2;
const STREAM_TEST: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalSplit {
    Valid,
    Test,
}

pub(crate) struct TaskData {
    task: Task,
    seed: u64,
    batch: usize,
    seq_len: usize,
    iters_per_epoch: u64,
    lm_epoch_len: u64,
    pub input_size: usize,
    pub output_size: usize,
    valid: Vec<Batch>,
    test: Vec<Batch>,
    corpus: Option<CharCorpus>,
    epoch_cache: Option<(u64, Vec<LmBatch>)>,
}

fn lm_batch(b: LmBatch, vocab: usize) -> Result<Batch> {
    Ok(Batch::PerStep {
        inputs: b.inputs.one_hot(vocab)?,
        targets: b.targets,
        mask: b.mask,
    })
}

fn copying_batch(seed: u64, batch: usize, delay: usize) -> Result<Batch> {
    let b = gen_copying(seed, batch, delay)?;
    let mask = Tensor::filled(&[batch, b.seq_len()], 1.0);
    Ok(Batch::PerStep {
        inputs: b.one_hot_inputs()?,
        targets: b.targets,
        mask,
    })
}

fn subset(split: &Split, max_sentences: usize) -> Split {
    if max_sentences == 0 || max_sentences >= split.num_sentences() {
        return split.clone();
    }
    let offsets = split.offsets[..=max_sentences].to_vec();
    Split {
        ids: split.ids[..offsets[max_sentences]].to_vec(),
        offsets,
    }
}

impl TaskData {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let batch = cfg.batch_size();
        let mut data = TaskData {
            task: cfg.task,
            seed: cfg.seed,
            batch,
            seq_len: cfg.seq_len,
            iters_per_epoch: cfg.iters_per_epoch,
            lm_epoch_len: 0,
            input_size: 0,
            output_size: 0,
            valid: Vec::new(),
            test: Vec::new(),
            corpus: None,
            epoch_cache: None,
        };
        match cfg.task {
            Task::Adding | Task::Copying => {
                (data.input_size, data.output_size) = match cfg.task {
                    Task::Adding => (2, 1),
                    _ => (INPUT_SYMBOLS, OUTPUT_CLASSES),
                };
                data.valid = data.synthetic_set(STREAM_VALID, cfg.valid_size)?;
                data.test = data.synthetic_set(STREAM_TEST, cfg.valid_size)?;
            }
            Task::CharLm => {
                let corpus = corpus_for(cfg.corpus.as_deref())?;
                let vocab = corpus.vocab.len();
                data.input_size = vocab;
                data.output_size = vocab;
                let valid = subset(&corpus.valid, cfg.valid_size);
                data.valid = batchify(&valid, batch, cfg.seq_len, None)?
                    .into_iter()
                    .map(|b| lm_batch(b, vocab))
                    .collect::<Result<_>>()?;
                data.test = batchify(&corpus.test, batch, cfg.seq_len, None)?
                    .into_iter()
                    .map(|b| lm_batch(b, vocab))
                    .collect::<Result<_>>()?;
                if data.valid.is_empty() || data.test.is_empty() {
                    return Err(Error::Corpus("corpus too small for validation and test splits".into()));
                }
                data.corpus = Some(corpus);
                data.lm_epoch_len = data.lm_epoch(0)?.len() as u64;
            }
        }
        Ok(data)
    }

    fn synthetic(&self, seed: u64, batch: usize) -> Result<Batch> {
        match self.task {
            Task::Adding => Ok(Batch::Final(gen_adding(seed, batch, self.seq_len)?)),
            _ => copying_batch(seed, batch, self.seq_len),
        }
    }

    fn synthetic_set(&self, stream: u64, size: usize) -> Result<Vec<Batch>> {
        (0..size.div_ceil(self.batch))
            .map(|i| {
                let rows = self.batch.min(size - i * self.batch);
                self.synthetic(stream_seed(self.seed, stream, i as u64), rows)
            })
            .collect()
    }

    /// Training iterations in one epoch.
    pub fn epoch_len(&self) -> u64 {
        match self.task {
            Task::CharLm => self.lm_epoch_len,
            _ => self.iters_per_epoch,
        }
    }

    fn lm_epoch(&mut self, epoch: u64) -> Result<&[LmBatch]> {
        if self.epoch_cache.as_ref().map(|(e, _)| *e) != Some(epoch) {
            let corpus = self.corpus.as_ref().expect("charlm data holds a corpus");
            let seed = stream_seed(self.seed, STREAM_TRAIN, epoch);
            let batches = batchify(&corpus.train, self.batch, self.seq_len, Some(seed))?;
            if batches.is_empty() {
                return Err(Error::Corpus("training split has no usable sentences".into()));
            }
            self.epoch_cache = Some((epoch, batches));
        }
        Ok(&self.epoch_cache.as_ref().expect("cache filled").1)
    }

    /// Batch consumed by training iteration `iteration` (0-based).
    pub fn train_batch(&mut self, iteration: u64) -> Result<Batch> {
        match self.task {
            Task::CharLm => {
                let per_epoch = self.lm_epoch_len;
                let vocab = self.input_size;
                let b = self.lm_epoch(iteration / per_epoch)?[(iteration % per_epoch) as usize].clone();
                lm_batch(b, vocab)
            }
            _ => self.synthetic(stream_seed(self.seed, STREAM_TRAIN, iteration), self.batch),
        }
    }

    /// Mean loss over a held-out split, weighted by loss terms per batch.
    pub fn evaluate(&self, model: &Model, split: EvalSplit) -> Result<f64> {
        let batches = match split {
            EvalSplit::Valid => &self.valid,
            EvalSplit::Test => &self.test,
        };
        let (mut total, mut weight) = (0.0, 0.0);
        for b in batches {
            let w = b.weight();
            total += model.eval_loss(b)? * w;
            weight += w;
        }
        Ok(total / weight)
    }
}

/// Reads the bundled corpus or `path`.
pub fn corpus_for(path: Option<&Path>) -> Result<CharCorpus> {
    match path {
        Some(p) => load_corpus(p),
        None => CharCorpus::from_text(BUNDLED_CORPUS),
    }
}
