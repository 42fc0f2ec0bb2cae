//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Property criteria are asserted and fail the target. Training criteria are
//! reported but never asserted: the default `smoke` scale only exercises the
//! pipeline with tiny budgets, and `PRNN_ACCEPTANCE_SCALE=full` runs the real
//! budgets (hours on one core). Set `PRNN_ACCEPTANCE_OUT` to keep run folders
//! and `PRNN_ACCEPTANCE_ONLY=2,3` to run a subset.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use prnn_core::cells::CellState;
use prnn_core::gradcheck::check_cell;
use prnn_core::harness::{
    compare, evaluate, median, read_metrics, train, Checkpoint, Comparison, EvalSplit, RunConfig, Task,
};
use prnn_core::tasks::{
    copying_baseline, gen_adding, gen_copying, memoryless_copying_loss, CharCorpus, ADDING_BASELINE_MSE, BLANK,
    BUNDLED_CORPUS, COPY_LEN, DATA_SYMBOLS,
};
use prnn_core::{CellConfig, CellKind, CellParams, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, PartialEq)]
enum Scale {
    Smoke,
    Full,
}

struct Suite {
    scale: Scale,
    root: PathBuf,
    asserted_failures: Vec<u32>,
    only: Option<Vec<u32>>,
}

impl Suite {
    fn report(&mut self, id: u32, name: &str, pass: bool, asserted: bool, detail: &str) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        let note = if asserted { "" } else { " (reported, not asserted)" };
        println!("{verdict} [{id}] {name}{note}: {detail}");
        if asserted && !pass {
            self.asserted_failures.push(id);
        }
    }

    fn wants(&self, id: u32) -> bool {
        self.only.as_ref().is_none_or(|ids| ids.contains(&id))
    }

    fn dir(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn seeds(&self) -> Vec<u64> {
        match self.scale {
            Scale::Smoke => vec![1],
            Scale::Full => vec![1, 2, 3],
        }
    }
}

fn bits(t: &Tensor) -> Vec<u64> {
    t.data().iter().map(|x| x.to_bits()).collect()
}

fn set(p: &mut CellParams, name: &str, value: Tensor) {
    let idx = p.weights.entries().iter().position(|(n, _)| n == name).unwrap();
    *p.weights.values_mut().into_iter().nth(idx).unwrap() = value;
}

fn random_params(kind: CellKind, d: usize, n: usize, rng: &mut ChaCha8Rng) -> CellParams {
    let mut p = CellParams::init(&CellConfig::new(kind, d, n), rng).unwrap();
    for t in p.weights.values_mut() {
        *t = Tensor::uniform(t.shape(), -1.0, 1.0, rng);
    }
    p
}

fn step(p: &CellParams, h: &Tensor, c: &Tensor, x: &Tensor) -> (Tensor, Tensor) {
    let mut tape = Tape::new();
    let cell = p.bind_frozen(&mut tape);
    let s = CellState {
        h: tape.constant(h.clone()),
        c: tape.constant(c.clone()),
    };
    let x = tape.constant(x.clone());
    let next = cell.step(&mut tape, &s, x).unwrap();
    (tape.value(next.h).clone(), tape.value(next.c).clone())
}

fn gradients(suite: &mut Suite) {
    let start = Instant::now();
    let mut worst = (0.0f64, CellKind::Rnn);
    for kind in CellKind::ALL {
        let report = check_cell(kind, 20, 4, 8, 16, 2024).unwrap();
        if report.max_rel_err >= worst.0 {
            worst = (report.max_rel_err, kind);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst.0 < 1e-4 && secs < 60.0;
    let detail = format!(
        "worst max relative error {:.2e} ({}), {secs:.1} s for all kinds",
        worst.0, worst.1
    );
    suite.report(1, "gradient correctness", pass, true, &detail);
}

fn persistence(suite: &mut Suite) {
    let (d, n, steps) = (4, 8, 1000);
    let mut drift = 0.0f64;
    for kind in [CellKind::Pru, CellKind::PruPlus] {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = random_params(kind, d, n, &mut rng);
            set(&mut p, "W_f", Tensor::zeros(&[d, n]));
            set(&mut p, "U_f", Tensor::zeros(&[n, n]));
            set(&mut p, "W_i", Tensor::zeros(&[d, n]));
            set(&mut p, "U_i", Tensor::zeros(&[n, n]));
            set(&mut p, "b_f", Tensor::filled(&[n], 50.0));
            set(&mut p, "b_i", Tensor::filled(&[n], -50.0));
            let c0 = Tensor::uniform(&[3, n], -3.0, 3.0, &mut rng);
            let mut h = Tensor::uniform(&[3, n], -1.0, 1.0, &mut rng);
            let mut c = c0.clone();
            for _ in 0..steps {
                let x = Tensor::uniform(&[3, d], -5.0, 5.0, &mut rng);
                (h, c) = step(&p, &h, &c, &x);
            }
            drift = drift.max(c.max_abs_diff(&c0).unwrap());
        }
    }
    let detail = format!("max sup-norm drift of c over {steps} steps: {drift:.1e}");
    suite.report(5, "persistence invariant", drift < 1e-8, true, &detail);
}

fn reduction(suite: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut mismatches = 0;
    for _ in 0..100 {
        let (d, n, b) = (rng.random_range(1..10), rng.random_range(1..12), rng.random_range(1..5));
        for (plain, full) in [(CellKind::Pru, CellKind::Lstm), (CellKind::PruPlus, CellKind::LstmPlus)] {
            let pru = random_params(plain, d, n, &mut rng);
            let mut lstm = random_params(full, d, n, &mut rng);
            for (name, t) in pru.weights.entries() {
                set(&mut lstm, &name, t.clone());
            }
            set(&mut lstm, "U", Tensor::zeros(&[n, n]));
            let h = Tensor::uniform(&[b, n], -1.0, 1.0, &mut rng);
            let c = Tensor::uniform(&[b, n], -2.0, 2.0, &mut rng);
            let x = Tensor::uniform(&[b, d], -1.0, 1.0, &mut rng);
            let (ha, ca) = step(&pru, &h, &c, &x);
            let (hb, cb) = step(&lstm, &h, &c, &x);
            if bits(&ha) != bits(&hb) || bits(&ca) != bits(&cb) {
                mismatches += 1;
            }
        }
    }
    let detail = format!("{mismatches} bitwise mismatches in 100 triples for each of PRU and PRU+");
    suite.report(6, "reduction equivalence", mismatches == 0, true, &detail);
}

fn determinism(suite: &mut Suite) {
    let base = |task: Task, out: &Path| {
        let mut cfg = RunConfig {
            task,
            cell: CellKind::Pru,
            max_iters: 10,
            eval_interval: 5,
            valid_size: 100,
            out: out.to_path_buf(),
            ..RunConfig::default()
        };
        if task == Task::CharLm {
            cfg.n_hidden = Some(64);
            cfg.valid_size = 20;
        }
        cfg
    };
    let mut same_csv = true;
    for task in Task::ALL {
        let a = suite.dir(&format!("determinism/{task}-a"));
        let b = suite.dir(&format!("determinism/{task}-b"));
        train(&base(task, &a)).unwrap();
        train(&base(task, &b)).unwrap();
        same_csv &= fs::read(a.join("metrics.csv")).unwrap() == fs::read(b.join("metrics.csv")).unwrap();
    }

    let mut same_resume = true;
    for task in Task::ALL {
        let whole = suite.dir(&format!("determinism/{task}-whole"));
        let split = suite.dir(&format!("determinism/{task}-split"));
        train(&base(task, &whole)).unwrap();
        let mut cfg = base(task, &split);
        cfg.max_iters = 5;
        let first = train(&cfg).unwrap();
        let saved = Checkpoint::load(&first.last_checkpoint).unwrap();
        same_resume &= saved.to_bytes().unwrap() == fs::read(&first.last_checkpoint).unwrap();
        cfg.resume = Some(first.last_checkpoint);
        cfg.max_iters = 10;
        train(&cfg).unwrap();
        same_resume &= fs::read(whole.join("last.prnn")).unwrap() == fs::read(split.join("last.prnn")).unwrap();
        same_resume &= fs::read(whole.join("metrics.csv")).unwrap() == fs::read(split.join("metrics.csv")).unwrap();
    }
    let detail = format!(
        "identical metrics CSVs for repeated runs: {same_csv}; 5 resumed iterations bitwise equal: {same_resume}"
    );
    suite.report(8, "determinism", same_csv && same_resume, true, &detail);
}

fn baselines(suite: &mut Suite) {
    let (mut sq, mut n) = (0.0, 0usize);
    for chunk in 0..100u64 {
        let batch = gen_adding(90_000 + chunk, 1000, 100).unwrap();
        for &y in batch.targets.data() {
            sq += (y - 1.0) * (y - 1.0);
            n += 1;
        }
    }
    let mse = sq / n as f64;
    let adding_ok = (mse - ADDING_BASELINE_MSE).abs() <= 0.01 && n == 100_000;

    let (mut formula, mut simulation) = (0.0f64, 0.0f64);
    for delay in [1, 10, 100, 500] {
        let steps = delay + 2 * COPY_LEN;
        // Per-step cost of the memoryless strategy: a certain blank until the
        // copy window, then a uniform guess over the data symbols.
        let direct: f64 = (0..steps)
            .map(|t| {
                if t < delay + COPY_LEN {
                    0.0
                } else {
                    (DATA_SYMBOLS as f64).ln()
                }
            })
            .sum::<f64>()
            / steps as f64;
        let batch = gen_copying(delay as u64, 16, delay).unwrap();
        assert!(batch.targets.row(0)[..delay + COPY_LEN].iter().all(|&s| s == BLANK));
        let simulated = memoryless_copying_loss(&batch).unwrap();
        formula = formula.max((copying_baseline(delay) - direct).abs() / direct);
        simulation = simulation.max((simulated - direct).abs() / direct);
    }
    // The simulated loss is a mean over thousands of terms, so it gets a
    // rounding allowance that the closed form does not.
    let copying_ok = formula <= 4.0 * f64::EPSILON && simulation <= 64.0 * f64::EPSILON;
    let detail = format!(
        "constant-1 MSE over {n} adding sequences {mse:.4}; copying baseline relative deviation {formula:.1e} (closed form), {simulation:.1e} (simulated)"
    );
    suite.report(9, "baseline constants", adding_ok && copying_ok, true, &detail);
}

/// Runs `cells` on a shared base config and returns the comparison.
fn run_cells(suite: &Suite, name: &str, base: &RunConfig, cells: &[CellKind]) -> Comparison {
    let cfgs: Vec<RunConfig> = cells.iter().map(|&cell| RunConfig { cell, ..base.clone() }).collect();
    let out = suite.dir(name);
    let cmp = compare(&cfgs, &suite.seeds(), &out, 1).unwrap();
    cmp.write(&out).unwrap();
    cmp
}

fn crossing(cmp: &Comparison, cell: usize, seed: u64) -> f64 {
    let run = cmp.runs.iter().find(|r| r.config == cell && r.seed == seed).unwrap();
    run.crossed_at.map_or(f64::INFINITY, |i| i as f64)
}

/// Median over seeds of the first evaluation below `level`; never counts as infinity.
fn median_first_below(cmp: &Comparison, cell: usize, level: f64) -> f64 {
    let firsts: Vec<f64> = cmp
        .runs
        .iter()
        .filter(|r| r.config == cell)
        .map(|r| {
            read_metrics(r.dir.join("metrics.csv"))
                .ok()
                .and_then(|m| {
                    m.iter()
                        .find(|rec| rec.valid_loss < level)
                        .map(|rec| rec.iteration as f64)
                })
                .unwrap_or(f64::INFINITY)
        })
        .collect();
    median(&firsts)
}

fn median_crossing(cmp: &Comparison, cell: usize) -> f64 {
    cmp.configs[cell].median_iters_to_threshold
}

fn fmt_iters(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        "never".into()
    }
}

fn adding_base(suite: &Suite, seq_len: usize) -> RunConfig {
    let mut cfg = RunConfig {
        task: Task::Adding,
        seq_len,
        patience: 0,
        ..RunConfig::default()
    };
    match suite.scale {
        Scale::Full => {
            cfg.epochs = 100;
        }
        Scale::Smoke => {
            cfg.n_hidden = Some(32);
            cfg.max_iters = 200;
            cfg.eval_interval = 50;
            cfg.valid_size = 200;
        }
    }
    cfg
}

const ADDING_CELLS: [CellKind; 3] = [CellKind::Pru, CellKind::PruPlus, CellKind::Lstm];

fn adding(suite: &mut Suite) -> Comparison {
    let cmp = run_cells(suite, "adding-T100", &adding_base(suite, 100), &ADDING_CELLS);
    let all_cross = cmp.runs.iter().filter(|r| r.config < 2).all(|r| r.crossed_at.is_some());
    let (pru, plus, lstm) = (
        median_crossing(&cmp, 0),
        median_crossing(&cmp, 1),
        median_crossing(&cmp, 2),
    );
    let pass = all_cross && pru <= lstm;
    // 0.167 sits just above the 1/6 a memoryless predictor scores, so a
    // plateaued model can cross it by noise. Report a level well below the
    // plateau next to it; the verdict still uses 0.167.
    let strict: Vec<String> = (0..ADDING_CELLS.len())
        .map(|c| fmt_iters(median_first_below(&cmp, c, 0.1)))
        .collect();
    let detail = format!(
        "median iterations to MSE < {}: PRU {}, PRU+ {}, LSTM {} (informational, MSE < 0.1: {})",
        ADDING_BASELINE_MSE,
        fmt_iters(pru),
        fmt_iters(plus),
        fmt_iters(lstm),
        strict.join(", ")
    );
    suite.report(2, "adding task T=100", pass, false, &detail);
    cmp
}

fn adding_gap(suite: &mut Suite, short: &Comparison) {
    let cells = [CellKind::Pru, CellKind::Lstm];
    let long = run_cells(suite, "adding-T500", &adding_base(suite, 500), &cells);
    let gap = |cmp: &Comparison, lstm: usize, seed: u64| crossing(cmp, lstm, seed) - crossing(cmp, 0, seed);
    let seeds = suite.seeds();
    let directional = seeds
        .iter()
        .filter(|&&s| {
            // A seed only counts when PRU crossed at both lengths.
            let crossed = crossing(short, 0, s).is_finite() && crossing(&long, 0, s).is_finite();
            crossed && gap(&long, 1, s) >= gap(short, 2, s)
        })
        .count();
    let med = |cmp: &Comparison, lstm: usize| median(&seeds.iter().map(|&s| gap(cmp, lstm, s)).collect::<Vec<_>>());
    let (g100, g500) = (med(short, 2), med(&long, 1));
    let needed = if seeds.len() == 1 { 1 } else { 2 };
    let pass = directional >= needed;
    let detail = format!(
        "median gap (LSTM minus PRU iterations) T=100 {g100}, T=500 {g500}; directional in {directional}/{} seeds",
        seeds.len()
    );
    suite.report(3, "adding convergence gap grows with T", pass, false, &detail);
}

fn copying(suite: &mut Suite) {
    let mut base = RunConfig {
        task: Task::Copying,
        seq_len: 100,
        patience: 0,
        stop_at_threshold: true,
        ..RunConfig::default()
    };
    match suite.scale {
        Scale::Full => base.epochs = 300,
        Scale::Smoke => {
            base.n_hidden = Some(32);
            base.epochs = 2;
            base.eval_interval = 50;
            base.valid_size = 200;
        }
    }
    let cmp = run_cells(suite, "copying-T100", &base, &ADDING_CELLS);
    let pru_all = cmp
        .runs
        .iter()
        .filter(|r| r.config == 0)
        .all(|r| r.crossed_at.is_some());
    let lstm_none = cmp
        .runs
        .iter()
        .filter(|r| r.config == 2)
        .all(|r| r.crossed_at.is_none());
    let seeds = suite.seeds();
    let faster = seeds
        .iter()
        .filter(|&&s| crossing(&cmp, 0, s) < crossing(&cmp, 1, s))
        .count();
    let needed = if seeds.len() == 1 { 1 } else { 2 };
    let pass = pru_all && lstm_none && faster >= needed;
    let detail = format!(
        "baseline {:.5} nats/step; median iterations to cross: PRU {}, PRU+ {}, LSTM {}; PRU before PRU+ in {faster}/{} seeds",
        copying_baseline(100),
        fmt_iters(median_crossing(&cmp, 0)),
        fmt_iters(median_crossing(&cmp, 1)),
        fmt_iters(median_crossing(&cmp, 2)),
        seeds.len()
    );
    suite.report(4, "copying task T=100", pass, false, &detail);
}

fn char_lm(suite: &mut Suite) {
    let mut base = RunConfig {
        task: Task::CharLm,
        seq_len: 100,
        n_hidden: Some(256),
        ..RunConfig::default()
    };
    match suite.scale {
        Scale::Full => {
            base.max_iters = 8000;
            base.eval_interval = 500;
            base.valid_size = 500;
        }
        Scale::Smoke => {
            base.n_hidden = Some(32);
            base.max_iters = 40;
            base.eval_interval = 20;
            base.valid_size = 40;
        }
    }
    let cells = CellKind::ALL;
    let cmp = run_cells(suite, "charlm", &base, &cells);
    let vocab = CharCorpus::from_text(BUNDLED_CORPUS).unwrap().vocab.len();
    let bound = 0.8 * (vocab as f64).ln();
    let mut test_nll = vec![Vec::new(); cells.len()];
    for run in &cmp.runs {
        let nll = match Checkpoint::load(run.dir.join("best.prnn")) {
            Ok(ckpt) => {
                let mut cfg = base.clone();
                cfg.cell = cells[run.config];
                cfg.seed = run.seed;
                evaluate(&ckpt, &cfg, EvalSplit::Test).unwrap_or(f64::NAN)
            }
            Err(_) => f64::NAN,
        };
        test_nll[run.config].push(nll);
    }
    let medians: Vec<f64> = test_nll.iter().map(|v| median(v)).collect();
    let all_below = medians.iter().all(|&m| m <= bound);
    let (pru, lstm) = (medians[5], medians[3]);
    let pass = all_below && pru <= lstm + 0.02;
    let table = cells
        .iter()
        .zip(&medians)
        .map(|(c, m)| format!("{c} {m:.3}"))
        .collect::<Vec<_>>()
        .join(", ");
    let detail = format!("median test NLL nats/char (bound {bound:.3} for |vocab| {vocab}): {table}");
    suite.report(7, "char-LM sanity", pass, false, &detail);
}

fn main() -> ExitCode {
    let scale = match std::env::var("PRNN_ACCEPTANCE_SCALE").as_deref() {
        Ok("full") => Scale::Full,
        Ok("smoke") | Err(_) => Scale::Smoke,
        Ok(other) => {
            eprintln!("unknown PRNN_ACCEPTANCE_SCALE {other:?}; expected smoke or full");
            return ExitCode::FAILURE;
        }
    };
    let temp = tempfile::tempdir().unwrap();
    let root = std::env::var_os("PRNN_ACCEPTANCE_OUT").map_or_else(|| temp.path().to_path_buf(), PathBuf::from);
    let only = std::env::var("PRNN_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|id| id.trim().parse().ok()).collect());
    let mut suite = Suite {
        scale,
        root,
        asserted_failures: Vec::new(),
        only,
    };
    let label = if scale == Scale::Full { "full" } else { "smoke" };
    println!("acceptance scale: {label}");

    if suite.wants(1) {
        gradients(&mut suite);
    }
    if suite.wants(2) || suite.wants(3) {
        let short = adding(&mut suite);
        if suite.wants(3) {
            adding_gap(&mut suite, &short);
        }
    }
    if suite.wants(4) {
        copying(&mut suite);
    }
    if suite.wants(5) {
        persistence(&mut suite);
    }
    if suite.wants(6) {
        reduction(&mut suite);
    }
    if suite.wants(7) {
        char_lm(&mut suite);
    }
    if suite.wants(8) {
        determinism(&mut suite);
    }
    if suite.wants(9) {
        baselines(&mut suite);
    }

    if suite.asserted_failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("asserted criteria failed: {:?}", suite.asserted_failures);
        ExitCode::FAILURE
    }
}
