use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prnn_core::gradcheck::check_cell;
use prnn_core::harness::{compare, evaluate, train, Checkpoint, EvalSplit, RunConfig, Task, CONFIG_FILE, PLOT_SCRIPT};
use prnn_core::tasks::{gen_adding, gen_copying};
use prnn_core::{CellKind, Error};

/// Train and compare recurrent cells on long-dependency benchmarks.
#[derive(Parser, Debug)]
#[command(name = "prnn", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one cell and write metrics.csv, best.prnn and last.prnn to --out
    Train(ConfigFlags),
    /// Report the loss of a checkpoint on held-out data
    Eval {
        /// Checkpoint to evaluate
        #[arg(long)]
        checkpoint: PathBuf,
        /// valid or test
        #[arg(long, default_value = "valid")]
        split: String,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Train several cells over several seeds and tabulate iterations to threshold
    Compare {
        /// Comma-separated cell kinds
        #[arg(long, value_delimiter = ',', required = true)]
        cells: Vec<String>,
        /// Comma-separated seeds
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        /// Runs to train concurrently
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Also write plot.py, a matplotlib script for the validation curves
        #[arg(long)]
        emit_plot_script: bool,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Write one generated batch of a synthetic task as CSV
    GenTask {
        /// adding or copying
        #[arg(long)]
        task: String,
        /// Sequence length (adding) or delay (copying)
        #[arg(long = "T")]
        t: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        batch: usize,
        /// Output file; standard output when absent
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare backpropagated gradients of a cell with finite differences
    Gradcheck {
        /// Cell kind, or "all"
        #[arg(long)]
        cell: String,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, default_value_t = 4)]
        batch: usize,
        #[arg(long, default_value_t = 8)]
        input_size: usize,
        #[arg(long, default_value_t = 16)]
        hidden: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest acceptable relative error
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

/// Run configuration. Each flag overrides the config-file key of the same name.
#[derive(Args, Debug, Default)]
struct ConfigFlags {
    /// key = value file applied before the flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// adding, copying or charlm
    #[arg(long)]
    task: Option<String>,
    /// rnn, irnn_id, gru, lstm, lstm_plus, pru or pru_plus
    #[arg(long)]
    cell: Option<String>,
    /// Sequence length (adding), delay (copying) or max window length (charlm)
    #[arg(long = "T")]
    t: Option<String>,
    /// Hidden units [default: 128, or 256 for charlm]
    #[arg(long = "n_hidden")]
    n_hidden: Option<String>,
    /// Batch size [default: 50, or 32 for charlm]
    #[arg(long)]
    batch: Option<String>,
    /// Maximum number of epochs [default: 100]
    #[arg(long)]
    epochs: Option<String>,
    /// Hard cap on training iterations, 0 for none [default: 0]
    #[arg(long = "max_iters")]
    max_iters: Option<String>,
    /// Batches per epoch on the synthetic tasks [default: 100]
    #[arg(long = "iters_per_epoch")]
    iters_per_epoch: Option<String>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    lr: Option<String>,
    /// Adam first-moment decay [default: 0.9]
    #[arg(long)]
    beta1: Option<String>,
    /// Adam second-moment decay [default: 0.999]
    #[arg(long)]
    beta2: Option<String>,
    /// Adam epsilon [default: 1e-8]
    #[arg(long = "adam_eps")]
    adam_eps: Option<String>,
    /// Elementwise gradient clipping bound [default: 1.0]
    #[arg(long)]
    clip: Option<String>,
    /// Seed for initialization and data [default: 1]
    #[arg(long)]
    seed: Option<String>,
    /// Output directory [default: runs/latest]
    #[arg(long)]
    out: Option<String>,
    /// Iterations between validation passes [default: 100]
    #[arg(long = "eval_interval")]
    eval_interval: Option<String>,
    /// Validation passes without improvement before stopping, 0 disables [default: 10]
    #[arg(long)]
    patience: Option<String>,
    /// Validation sequences (synthetic) or sentences (charlm, 0 = all) [default: 1000]
    #[arg(long = "valid_size")]
    valid_size: Option<String>,
    /// Corpus text file for charlm, one sentence per line [default: bundled]
    #[arg(long)]
    corpus: Option<String>,
    /// Initial forget-gate bias [default: 0]
    #[arg(long = "forget_bias")]
    forget_bias: Option<String>,
    /// Give the GRU candidate a bias [default: true]
    #[arg(long = "gru_candidate_bias")]
    gru_candidate_bias: Option<String>,
    /// Use the large charlm hidden size (1000) [default: false]
    #[arg(long = "paper_scale")]
    paper_scale: Option<String>,
    /// Stop once validation loss drops below the task threshold [default: false]
    #[arg(long = "stop_at_threshold")]
    stop_at_threshold: Option<String>,
    /// Record elapsed seconds in the metrics [default: false]
    #[arg(long)]
    wallclock: Option<String>,
    /// Checkpoint to continue training from
    #[arg(long)]
    resume: Option<String>,
}

impl ConfigFlags {
    fn pairs(&self) -> [(&'static str, &Option<String>); 25] {
        [
            ("task", &self.task),
            ("cell", &self.cell),
            ("T", &self.t),
            ("n_hidden", &self.n_hidden),
            ("batch", &self.batch),
            ("epochs", &self.epochs),
            ("max_iters", &self.max_iters),
            ("iters_per_epoch", &self.iters_per_epoch),
            ("lr", &self.lr),
            ("beta1", &self.beta1),
            ("beta2", &self.beta2),
            ("adam_eps", &self.adam_eps),
            ("clip", &self.clip),
            ("seed", &self.seed),
            ("out", &self.out),
            ("eval_interval", &self.eval_interval),
            ("patience", &self.patience),
            ("valid_size", &self.valid_size),
            ("corpus", &self.corpus),
            ("forget_bias", &self.forget_bias),
            ("gru_candidate_bias", &self.gru_candidate_bias),
            ("paper_scale", &self.paper_scale),
            ("stop_at_threshold", &self.stop_at_threshold),
            ("wallclock", &self.wallclock),
            ("resume", &self.resume),
        ]
    }

    /// `base`, then the config file, then the flags.
    fn apply(&self, mut cfg: RunConfig) -> Result<RunConfig, Error> {
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
        }
        for (key, value) in self.pairs() {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Corpus(_) => 1,
        _ => 2,
    }
}

fn fmt_iters(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        "never".to_string()
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Train(flags) => {
            let cfg = flags.apply(RunConfig::default())?;
            let outcome = train(&cfg)?;
            let best = outcome.best_valid.map_or("n/a".into(), |v| format!("{v:.6}"));
            println!(
                "{} {} on {}: {} iterations, best validation loss {best} {}",
                cfg.cell,
                cfg.hidden_size(),
                cfg.task,
                outcome.iterations,
                cfg.task.units()
            );
            if let Some(it) = outcome.crossed_at {
                println!("crossed the memoryless baseline at iteration {it}");
            }
            println!("outputs in {}", cfg.out.display());
        }
        Command::Eval {
            checkpoint,
            split,
            flags,
        } => {
            let split = match split.as_str() {
                "valid" => EvalSplit::Valid,
                "test" => EvalSplit::Test,
                other => return Err(Error::Config(format!("unknown split '{other}'; use valid or test"))),
            };
            let ckpt = Checkpoint::load(&checkpoint)?;
            let saved = checkpoint.parent().unwrap_or(Path::new(".")).join(CONFIG_FILE);
            let mut base = if saved.exists() {
                RunConfig::from_file(&saved)?
            } else {
                RunConfig::default()
            };
            base.task = ckpt.task;
            base.cell = ckpt.cell;
            base.seed = ckpt.seed;
            base.n_hidden = Some(ckpt.hidden_size);
            base.resume = None;
            let cfg = flags.apply(base)?;
            let loss = evaluate(&ckpt, &cfg, split)?;
            println!("{loss:?}");
        }
        Command::Compare {
            cells,
            seeds,
            jobs,
            emit_plot_script,
            flags,
        } => {
            let base = flags.apply(RunConfig::default())?;
            let cfgs = cells
                .iter()
                .map(|c| {
                    let mut cfg = base.clone();
                    cfg.cell = c.parse::<CellKind>()?;
                    Ok(cfg)
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let table = compare(&cfgs, &seeds, &base.out, jobs)?;
            table.write(&base.out)?;
            if emit_plot_script {
                fs::write(base.out.join(PLOT_SCRIPT), table.plot_script())?;
            }
            print!("{}", table.summary_csv());
            let failed: usize = table.configs.iter().map(|c| c.failed).sum();
            for c in &table.configs {
                eprintln!(
                    "{}: crossed in {}/{} runs, median iterations to threshold {}",
                    c.label,
                    c.crossed,
                    c.runs,
                    fmt_iters(c.median_iters_to_threshold)
                );
            }
            if failed > 0 {
                return Err(Error::Contract(format!("{failed} run(s) failed; see runs.csv")));
            }
        }
        Command::GenTask {
            task,
            t,
            seed,
            batch,
            output,
        } => {
            let csv = match task.parse::<Task>()? {
                Task::Adding => gen_adding(seed, batch, t).map_err(config_error)?.to_csv(),
                Task::Copying => gen_copying(seed, batch, t).map_err(config_error)?.to_csv(),
                Task::CharLm => return Err(Error::Config("gen-task supports adding and copying".into())),
            };
            match output {
                Some(path) => fs::write(path, csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Gradcheck {
            cell,
            steps,
            batch,
            input_size,
            hidden,
            seed,
            tolerance,
        } => {
            let kinds = if cell == "all" {
                CellKind::ALL.to_vec()
            } else {
                vec![cell.parse::<CellKind>()?]
            };
            let mut worst = 0.0f64;
            for kind in kinds {
                let report = check_cell(kind, steps, batch, input_size, hidden, seed)?;
                println!(
                    "{kind}: max relative error {:.3e} over {} entries",
                    report.max_rel_err, report.entries_checked
                );
                worst = worst.max(report.max_rel_err);
            }
            if worst.is_nan() || worst >= tolerance {
                return Err(Error::Contract(format!(
                    "gradient check failed: {worst:.3e} >= {tolerance:e}"
                )));
            }
        }
    }
    Ok(())
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Contract(m) => Error::Config(m),
        other => other,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
