//! Central finite-difference gradient checking.
//!
//! The checker only evaluates forward values; it never looks at the tape's
//! adjoints, so it stays an independent oracle for [`Tape::backward`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cells::{unroll, BoundCell, CellConfig, CellKind, CellParams};
use crate::error::Result;
use crate::tensor::{Tape, Tensor, Var};

pub const DEFAULT_EPS: f64 = 1e-5;

/// Denominator floor for the relative error. Entries with smaller gradients
/// are judged on absolute error instead: with losses of order 10 and
/// `eps = 1e-5`, rounding alone puts about 1e-9 of noise on a difference
/// quotient, which would swamp the relative error of a 1e-7 gradient.
pub const DEFAULT_FLOOR: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// `(parameter index, flat entry)` of the worst entry.
    pub worst: Option<(usize, usize)>,
    pub entries_checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Gradient of a scalar function of `params` by central differences.
pub fn numeric_gradient<F>(params: &[Tensor], eps: f64, f: F) -> Result<Vec<Tensor>>
where
    F: Fn(&[Tensor]) -> Result<f64>,
{
    let mut work: Vec<Tensor> = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let mut g = Tensor::zeros(params[p].shape());
        for i in 0..params[p].len() {
            let orig = work[p].data()[i];
            work[p].data_mut()[i] = orig + eps;
            let up = f(&work)?;
            work[p].data_mut()[i] = orig - eps;
            let down = f(&work)?;
            work[p].data_mut()[i] = orig;
            g.data_mut()[i] = (up - down) / (2.0 * eps);
        }
        out.push(g);
    }
    Ok(out)
}

/// Compares tape gradients of `build` against central differences for every
/// entry of every parameter.
///
/// `build` records the loss on a fresh tape given one leaf per parameter and
/// must return a scalar.
pub fn check_gradients<F>(params: &[Tensor], eps: f64, floor: f64, build: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let root = build(&mut tape, &vars)?;
    let grads = tape.backward(root)?;
    let analytic: Vec<Tensor> = vars.iter().map(|&v| grads.wrt(v)).collect();

    let numeric = numeric_gradient(params, eps, |ps| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.constant(p.clone())).collect();
        let root = build(&mut tape, &vars)?;
        tape.value(root).item()
    })?;

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        entries_checked: 0,
    };
    for (p, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        for (i, (&x, &y)) in a.data().iter().zip(n.data()).enumerate() {
            let err = relative_error(x, y, floor);
            report.entries_checked += 1;
            if err > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = report.max_rel_err.max(err);
                report.worst = Some((p, i));
            }
        }
    }
    Ok(report)
}

/// Gradient check of a cell unrolled over `steps` steps.
///
/// Parameters are drawn uniformly from `[-0.5, 0.5]` (so no matrix is the
/// identity), inputs from `[-1, 1]`, and row `b` of the batch is masked after
/// `steps - 3b` steps. The loss is `sum(H ⊙ R)` for the stacked hidden
/// outputs `H` and a fixed random `R`.
pub fn check_cell(
    kind: CellKind,
    steps: usize,
    batch: usize,
    input_size: usize,
    hidden_size: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cell = CellParams::init(&CellConfig::new(kind, input_size, hidden_size), &mut rng)?;
    for t in cell.weights.values_mut() {
        *t = Tensor::uniform(t.shape(), -0.5, 0.5, &mut rng);
    }
    let inputs = Tensor::uniform(&[batch, steps, input_size], -1.0, 1.0, &mut rng);
    let proj = Tensor::uniform(&[batch, steps, hidden_size], -1.0, 1.0, &mut rng);
    let mut mask = Tensor::filled(&[batch, steps], 1.0);
    for b in 0..batch {
        let len = steps.saturating_sub(3 * b).max(1);
        mask.data_mut()[b * steps + len..(b + 1) * steps].fill(0.0);
    }
    let params: Vec<Tensor> = cell.weights.entries().into_iter().map(|(_, t)| t.clone()).collect();
    check_gradients(&params, DEFAULT_EPS, DEFAULT_FLOOR, |tape, vars| {
        let mut next = vars.iter().copied();
        let bound = BoundCell {
            kind,
            hidden_size,
            weights: cell.weights.map(|_| next.next().expect("one var per tensor")),
        };
        let run = unroll(tape, &bound, &inputs, Some(&mask))?;
        let h = run.stacked(tape)?;
        let r = tape.constant(proj.clone());
        let prod = tape.mul(h, r)?;
        tape.sum(prod, None)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_derivative_matches_difference_quotient() {
        let x = Tensor::vector(vec![0.3]).unwrap();
        let report = check_gradients(&[x], DEFAULT_EPS, DEFAULT_FLOOR, |tape, v| {
            let y = tape.tanh(v[0]);
            tape.sum(y, None)
        })
        .unwrap();
        assert!(report.max_rel_err < 1e-6, "{report:?}");
    }

    #[test]
    fn relative_error_uses_floor() {
        assert_eq!(relative_error(0.0, 0.0, 1e-6), 0.0);
        assert!((relative_error(0.0, 1e-12, 1e-6) - 1e-6).abs() < 1e-18);
        assert!((relative_error(1e-7, 2e-7, DEFAULT_FLOOR) - 1e-3).abs() < 1e-15);
        assert!((relative_error(2.0, 1.0, 1e-6) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn small_cells_pass() {
        for kind in CellKind::ALL {
            let r = check_cell(kind, 4, 2, 3, 4, 1).unwrap();
            assert!(r.max_rel_err < 1e-4, "{kind}: {r:?}");
        }
    }
}
