//! Several configurations over several seeds, summarized per configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use super::config::RunConfig;
use super::train::{train, METRICS_FILE};
use crate::error::{Error, Result};

pub const RUNS_FILE: &str = "runs.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PLOT_SCRIPT: &str = "plot.py";

#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Ok,
    Failed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    /// Position of the configuration in the compared list.
    pub config: usize,
    pub label: String,
    pub seed: u64,
    pub status: RunStatus,
    pub iterations: u64,
    pub crossed_at: Option<u64>,
    pub best_valid: Option<f64>,
    pub final_valid: Option<f64>,
    pub dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigSummary {
    pub config: usize,
    pub label: String,
    pub runs: usize,
    pub failed: usize,
    pub crossed: usize,
    /// Median iterations to threshold; runs that never cross (or failed)
    /// count as infinitely late.
    pub median_iters_to_threshold: f64,
    pub median_final_valid: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub threshold: Option<f64>,
    pub runs: Vec<RunSummary>,
    pub configs: Vec<ConfigSummary>,
}

/// Median with the usual midpoint rule for even counts; NaN when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

fn run_one(config: usize, cfg: &RunConfig, seed: u64, dir: PathBuf) -> RunSummary {
    let mut cfg = cfg.clone();
    cfg.seed = seed;
    cfg.out = dir.clone();
    let label = cfg.cell.to_string();
    match train(&cfg) {
        Ok(o) => RunSummary {
            config,
            label,
            seed,
            status: RunStatus::Ok,
            iterations: o.iterations,
            crossed_at: o.crossed_at,
            best_valid: o.best_valid,
            final_valid: o.last_record().map(|r| r.valid_loss),
            dir,
        },
        Err(e) => RunSummary {
            config,
            label,
            seed,
            status: RunStatus::Failed(e.to_string()),
            iterations: 0,
            crossed_at: None,
            best_valid: None,
            final_valid: None,
            dir,
        },
    }
}

/// Trains every configuration with every seed under `out/<index>-<cell>/seed<seed>`.
///
/// Up to `jobs` runs train concurrently. A failing run is recorded with its
/// error and does not stop the others.
pub fn compare(cfgs: &[RunConfig], seeds: &[u64], out: &Path, jobs: usize) -> Result<Comparison> {
    if cfgs.len() < 2 {
        return Err(Error::Config("compare needs at least two configurations".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Config("compare needs at least one seed".into()));
    }
    let threshold = cfgs[0].threshold();
    if cfgs
        .iter()
        .any(|c| c.task != cfgs[0].task || c.threshold() != threshold)
    {
        return Err(Error::Config("compared configurations must share task and T".into()));
    }
    for c in cfgs {
        c.validate()?;
    }
    fs::create_dir_all(out)?;

    let jobs_list: Vec<(usize, u64, PathBuf)> = cfgs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| {
            seeds
                .iter()
                .map(move |&s| (i, s, out.join(format!("{i}-{}", c.cell)).join(format!("seed{s}"))))
        })
        .collect();
    let results: Mutex<Vec<Option<RunSummary>>> = Mutex::new(vec![None; jobs_list.len()]);
    let next = AtomicUsize::new(0);
    let workers = jobs.clamp(1, jobs_list.len());
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some((i, seed, dir)) = jobs_list.get(k) else { break };
                let summary = run_one(*i, &cfgs[*i], *seed, dir.clone());
                results.lock().expect("results lock")[k] = Some(summary);
            });
        }
    });
    let runs: Vec<RunSummary> = results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every run reports"))
        .collect();

    let configs = cfgs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mine: Vec<&RunSummary> = runs.iter().filter(|r| r.config == i).collect();
            let iters: Vec<f64> = mine
                .iter()
                .map(|r| r.crossed_at.map_or(f64::INFINITY, |x| x as f64))
                .collect();
            let finals: Vec<f64> = mine.iter().filter_map(|r| r.final_valid).collect();
            ConfigSummary {
                config: i,
                label: c.cell.to_string(),
                runs: mine.len(),
                failed: mine.iter().filter(|r| r.status != RunStatus::Ok).count(),
                crossed: mine.iter().filter(|r| r.crossed_at.is_some()).count(),
                median_iters_to_threshold: median(&iters),
                median_final_valid: median(&finals),
            }
        })
        .collect();
    Ok(Comparison {
        threshold,
        runs,
        configs,
    })
}

fn opt<T: std::fmt::Debug>(v: Option<T>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

impl Comparison {
    /// One row per run. Failed runs carry `failed` and the error message.
    pub fn runs_csv(&self) -> String {
        let mut out =
            String::from("config,cell,seed,status,iterations,iters_to_threshold,best_valid,final_valid,error\n");
        for r in &self.runs {
            let (status, err) = match &r.status {
                RunStatus::Ok => ("ok", String::new()),
                RunStatus::Failed(e) => ("failed", e.replace([',', '\n'], ";")),
            };
            let _ = writeln!(
                out,
                "{},{},{},{status},{},{},{},{},{err}",
                r.config,
                r.label,
                r.seed,
                r.iterations,
                r.crossed_at.map(|x| x.to_string()).unwrap_or_else(|| "never".into()),
                opt(r.best_valid),
                opt(r.final_valid),
            );
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out =
            String::from("config,cell,runs,failed,crossed,median_iters_to_threshold,median_final_valid,threshold\n");
        for c in &self.configs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:?},{:?},{}",
                c.config,
                c.label,
                c.runs,
                c.failed,
                c.crossed,
                c.median_iters_to_threshold,
                c.median_final_valid,
                opt(self.threshold),
            );
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(RUNS_FILE), self.runs_csv())?;
        fs::write(dir.join(SUMMARY_FILE), self.summary_csv())?;
        Ok(())
    }

    /// A matplotlib script plotting validation loss against epoch for every
    /// run, with the task threshold as a dashed line.
    pub fn plot_script(&self) -> String {
        let mut runs = String::new();
        for r in self.runs.iter().filter(|r| r.status == RunStatus::Ok) {
            let _ = writeln!(
                runs,
                "    ({:?}, {}, {:?}),",
                r.label,
                r.seed,
                r.dir.join(METRICS_FILE).display().to_string()
            );
        }
        let threshold = self.threshold.map_or("None".to_string(), |t| format!("{t:?}"));
        format!(
            r#"import csv
import matplotlib.pyplot as plt

RUNS = [
{runs}]
THRESHOLD = {threshold}

colors = {{}}
for label, seed, path in RUNS:
    with open(path) as f:
        rows = list(csv.DictReader(f))
    epochs = [int(r["iteration"]) for r in rows]
    loss = [float(r["valid_loss"]) for r in rows]
    color = colors.setdefault(label, "C%d" % len(colors))
    first = sum(1 for l, _, _ in RUNS[: RUNS.index((label, seed, path))] if l == label) == 0
    plt.plot(epochs, loss, color=color, alpha=0.8, label=label if first else None)
if THRESHOLD is not None:
    plt.axhline(THRESHOLD, color="k", linestyle="--", label="memoryless baseline")
plt.xlabel("iteration")
plt.ylabel("validation loss")
plt.yscale("log")
plt.legend()
plt.savefig("comparison.png", dpi=150)
"#
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_rules() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0]), 2.5);
        assert_eq!(median(&[1.0, f64::INFINITY, f64::INFINITY]), f64::INFINITY);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn needs_two_configs() {
        let dir = tempfile::tempdir().unwrap();
        let err = compare(&[RunConfig::default()], &[1], dir.path(), 1).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
