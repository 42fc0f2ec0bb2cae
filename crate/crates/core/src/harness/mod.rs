//! Training runs: configuration, data streams, the training loop,
//! metrics, checkpoints and multi-seed comparisons.

mod checkpoint;
mod compare;
mod config;
mod data;
mod metrics;
mod model;
mod train;

pub use checkpoint::{Checkpoint, FORMAT_VERSION};
pub use compare::{
    compare, median, Comparison, ConfigSummary, RunStatus, RunSummary, PLOT_SCRIPT, RUNS_FILE, SUMMARY_FILE,
};
pub use config::{RunConfig, Task, CONFIG_KEYS};
pub use data::{corpus_for, EvalSplit};
pub use metrics::{read_metrics, MetricsRecord, MetricsWriter, METRICS_HEADER};
pub use model::{Batch, Model};
pub use train::{evaluate, train, TrainOutcome, Trainer, BEST_CHECKPOINT, CONFIG_FILE, LAST_CHECKPOINT, METRICS_FILE};
