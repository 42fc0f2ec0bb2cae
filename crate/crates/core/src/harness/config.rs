//! Run configuration: a flat `key = value` file whose keys double as CLI
//! flags.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::cells::{CellConfig, CellKind};
use crate::error::{Error, Result};
use crate::optim::AdamConfig;
use crate::tasks::{copying_baseline, ADDING_BASELINE_MSE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Task {
    Adding,
    Copying,
    CharLm,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Adding, Task::Copying, Task::CharLm];

    pub fn name(self) -> &'static str {
        match self {
            Task::Adding => "adding",
            Task::Copying => "copying",
            Task::CharLm => "charlm",
        }
    }

    /// Unit of the reported loss.
    pub fn units(self) -> &'static str {
        match self {
            Task::Adding => "mse",
            Task::Copying | Task::CharLm => "nats",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown task '{s}'; valid tasks: adding, copying, charlm")))
    }
}

/// Every configuration key with a one-line description.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("task", "adding, copying or charlm"),
    ("cell", "rnn, irnn_id, gru, lstm, lstm_plus, pru or pru_plus"),
    (
        "T",
        "sequence length (adding), delay (copying) or max window length (charlm)",
    ),
    (
        "n_hidden",
        "hidden units; default 128, or 256 for charlm (1000 with paper_scale)",
    ),
    ("batch", "batch size; default 50, or 32 for charlm"),
    ("epochs", "maximum number of epochs"),
    ("max_iters", "hard cap on training iterations; 0 means no cap"),
    ("iters_per_epoch", "batches per epoch on the synthetic tasks"),
    ("lr", "Adam learning rate"),
    ("beta1", "Adam first-moment decay"),
    ("beta2", "Adam second-moment decay"),
    ("adam_eps", "Adam epsilon"),
    ("clip", "elementwise gradient clipping bound"),
    ("seed", "seed for initialization and data"),
    ("out", "output directory"),
    ("eval_interval", "iterations between validation passes"),
    (
        "patience",
        "validation passes without improvement before stopping; 0 disables",
    ),
    (
        "valid_size",
        "validation sequences (synthetic) or sentences (charlm, 0 = all)",
    ),
    ("corpus", "corpus text file for charlm; empty uses the bundled corpus"),
    ("forget_bias", "initial forget-gate bias"),
    ("gru_candidate_bias", "give the GRU candidate a bias"),
    ("paper_scale", "use the large charlm hidden size"),
    (
        "stop_at_threshold",
        "stop once validation loss drops below the task threshold",
    ),
    (
        "wallclock",
        "record elapsed seconds in the metrics (breaks byte-identical reruns)",
    ),
    ("resume", "checkpoint to continue training from"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub cell: CellKind,
    pub seq_len: usize,
    pub n_hidden: Option<usize>,
    pub batch: Option<usize>,
    pub epochs: u64,
    pub max_iters: u64,
    pub iters_per_epoch: u64,
    pub adam: AdamConfig,
    pub clip: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub eval_interval: u64,
    pub patience: u64,
    pub valid_size: usize,
    pub corpus: Option<PathBuf>,
    pub forget_bias: f64,
    pub gru_candidate_bias: bool,
    pub paper_scale: bool,
    pub stop_at_threshold: bool,
    pub wallclock: bool,
    pub resume: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: Task::Adding,
            cell: CellKind::Pru,
            seq_len: 100,
            n_hidden: None,
            batch: None,
            epochs: 100,
            max_iters: 0,
            iters_per_epoch: 100,
            adam: AdamConfig::default(),
            clip: 1.0,
            seed: 1,
            out: PathBuf::from("runs/latest"),
            eval_interval: 100,
            patience: 10,
            valid_size: 1000,
            corpus: None,
            forget_bias: 0.0,
            gru_candidate_bias: true,
            paper_scale: false,
            stop_at_threshold: false,
            wallclock: false,
            resume: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!(
            "invalid value '{value}' for {key}; expected true or false"
        ))),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "task" => self.task = value.parse()?,
            "cell" => self.cell = value.parse()?,
            "T" => self.seq_len = parse(key, value)?,
            "n_hidden" => self.n_hidden = Some(parse(key, value)?),
            "batch" => self.batch = Some(parse(key, value)?),
            "epochs" => self.epochs = parse(key, value)?,
            "max_iters" => self.max_iters = parse(key, value)?,
            "iters_per_epoch" => self.iters_per_epoch = parse(key, value)?,
            "lr" => self.adam.lr = parse(key, value)?,
            "beta1" => self.adam.beta1 = parse(key, value)?,
            "beta2" => self.adam.beta2 = parse(key, value)?,
            "adam_eps" => self.adam.eps = parse(key, value)?,
            "clip" => self.clip = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "eval_interval" => self.eval_interval = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "valid_size" => self.valid_size = parse(key, value)?,
            "corpus" => self.corpus = optional_path(value),
            "forget_bias" => self.forget_bias = parse(key, value)?,
            "gru_candidate_bias" => self.gru_candidate_bias = parse_bool(key, value)?,
            "paper_scale" => self.paper_scale = parse_bool(key, value)?,
            "stop_at_threshold" => self.stop_at_threshold = parse_bool(key, value)?,
            "wallclock" => self.wallclock = parse_bool(key, value)?,
            "resume" => self.resume = optional_path(value),
            _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Serializes every key, so `from_text(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut lines = vec![
            format!("task = {}", self.task),
            format!("cell = {}", self.cell),
            format!("T = {}", self.seq_len),
            format!("n_hidden = {}", self.hidden_size()),
            format!("batch = {}", self.batch_size()),
            format!("epochs = {}", self.epochs),
            format!("max_iters = {}", self.max_iters),
            format!("iters_per_epoch = {}", self.iters_per_epoch),
            format!("lr = {:?}", self.adam.lr),
            format!("beta1 = {:?}", self.adam.beta1),
            format!("beta2 = {:?}", self.adam.beta2),
            format!("adam_eps = {:?}", self.adam.eps),
            format!("clip = {:?}", self.clip),
            format!("seed = {}", self.seed),
            format!("out = {}", self.out.display()),
            format!("eval_interval = {}", self.eval_interval),
            format!("patience = {}", self.patience),
            format!("valid_size = {}", self.valid_size),
            format!("corpus = {}", path(&self.corpus)),
            format!("forget_bias = {:?}", self.forget_bias),
            format!("gru_candidate_bias = {}", self.gru_candidate_bias),
            format!("paper_scale = {}", self.paper_scale),
            format!("stop_at_threshold = {}", self.stop_at_threshold),
            format!("wallclock = {}", self.wallclock),
            format!("resume = {}", path(&self.resume)),
        ];
        lines.push(String::new());
        lines.join("\n")
    }

    pub fn hidden_size(&self) -> usize {
        match (self.n_hidden, self.task) {
            (Some(n), _) => n,
            (None, Task::CharLm) if self.paper_scale => 1000,
            (None, Task::CharLm) => 256,
            (None, _) => 128,
        }
    }

    pub fn batch_size(&self) -> usize {
        match (self.batch, self.task) {
            (Some(b), _) => b,
            (None, Task::CharLm) => 32,
            (None, _) => 50,
        }
    }

    /// Validation loss below which a run counts as having learned the task:
    /// the cost of the best memoryless predictor. `None` for charlm.
    pub fn threshold(&self) -> Option<f64> {
        match self.task {
            Task::Adding => Some(ADDING_BASELINE_MSE),
            Task::Copying => Some(copying_baseline(self.seq_len)),
            Task::CharLm => None,
        }
    }

    pub fn cell_config(&self, input_size: usize) -> CellConfig {
        CellConfig {
            forget_bias: self.forget_bias,
            gru_candidate_bias: self.gru_candidate_bias,
            ..CellConfig::new(self.cell, input_size, self.hidden_size())
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        match self.task {
            Task::Adding if self.seq_len < 2 => return bad("adding task needs T >= 2"),
            Task::Copying if self.seq_len < 1 => return bad("copying task needs T >= 1"),
            Task::CharLm if self.seq_len < 2 => return bad("charlm needs T >= 2"),
            _ => {}
        }
        if self.hidden_size() == 0 {
            return bad("n_hidden must be positive");
        }
        if self.batch_size() == 0 {
            return bad("batch must be positive");
        }
        if self.eval_interval == 0 {
            return bad("eval_interval must be positive");
        }
        if self.iters_per_epoch == 0 {
            return bad("iters_per_epoch must be positive");
        }
        if self.task != Task::CharLm && self.valid_size == 0 {
            return bad("valid_size must be positive for synthetic tasks");
        }
        if self.clip.is_nan() || self.clip <= 0.0 {
            return bad("clip must be positive");
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.adam;
        if !(lr > 0.0 && eps > 0.0 && (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2)) {
            return bad("Adam needs lr > 0, eps > 0 and betas in [0, 1)");
        }
        Ok(())
    }
}
