//! Recurrent cell variants as step functions `(state, input) → state`.
//!
//! All variants share one parameter container, [`CellWeights`], generic over
//! the storage: `CellWeights<Tensor>` holds trainable values and
//! `CellWeights<Var>` holds the same values bound to a [`Tape`].
//!
//! Matrices act on row vectors, so a batch `x: [batch, d]` is mapped by
//! `x · W` with `W: [d, n]`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellKind {
    /// `h' = tanh(xW + hU + b)`
    Rnn,
    /// `h' = tanh(xW + h + b)`: the recurrent matrix pinned to the identity.
    IrnnId,
    Gru,
    Lstm,
    /// LSTM followed by the feedforward output layer of PRU+.
    LstmPlus,
    /// LSTM without `hU` in the cell candidate.
    Pru,
    /// PRU followed by `h = tanh(ĥ W_out + b_out)`.
    PruPlus,
}

impl CellKind {
    pub const ALL: [CellKind; 7] = [
        CellKind::Rnn,
        CellKind::IrnnId,
        CellKind::Gru,
        CellKind::Lstm,
        CellKind::LstmPlus,
        CellKind::Pru,
        CellKind::PruPlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Rnn => "rnn",
            CellKind::IrnnId => "irnn_id",
            CellKind::Gru => "gru",
            CellKind::Lstm => "lstm",
            CellKind::LstmPlus => "lstm_plus",
            CellKind::Pru => "pru",
            CellKind::PruPlus => "pru_plus",
        }
    }

    fn gate_names(self) -> &'static [&'static str] {
        match self {
            CellKind::Rnn | CellKind::IrnnId => &[],
            CellKind::Gru => &["r", "z"],
            CellKind::Lstm | CellKind::LstmPlus | CellKind::Pru | CellKind::PruPlus => &["i", "f", "o"],
        }
    }

    /// Whether the candidate path carries a recurrent matrix `U`.
    pub fn has_recurrent_matrix(self) -> bool {
        matches!(
            self,
            CellKind::Rnn | CellKind::Gru | CellKind::Lstm | CellKind::LstmPlus
        )
    }

    pub fn has_output_layer(self) -> bool {
        matches!(self, CellKind::LstmPlus | CellKind::PruPlus)
    }

    /// Whether the variant maintains a memory cell `c` next to `h`.
    pub fn has_memory_cell(self) -> bool {
        !self.gate_names().is_empty() && self != CellKind::Gru
    }

    pub fn valid_names() -> String {
        Self::ALL.map(Self::name).join(", ")
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown cell kind '{s}' (valid: {})", Self::valid_names())))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellConfig {
    pub kind: CellKind,
    pub input_size: usize,
    pub hidden_size: usize,
    /// Initial value of the forget-gate bias. Zero reproduces the plain
    /// equations; 1.0 is the common alternative.
    pub forget_bias: f64,
    /// Adds a bias to the GRU candidate. `false` keeps the candidate as
    /// `tanh(xW + (r⊙h)U)` exactly.
    pub gru_candidate_bias: bool,
    /// Half-width of the uniform init for input weights.
    pub init_range: f64,
}

impl CellConfig {
    pub fn new(kind: CellKind, input_size: usize, hidden_size: usize) -> Self {
        CellConfig {
            kind,
            input_size,
            hidden_size,
            forget_bias: 0.0,
            gru_candidate_bias: true,
            init_range: 0.08,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gate<T> {
    pub name: &'static str,
    pub w: T,
    pub u: T,
    pub b: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub w: T,
    pub b: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellWeights<T> {
    pub w: T,
    pub u: Option<T>,
    pub b: Option<T>,
    pub gates: Vec<Gate<T>>,
    pub output: Option<Dense<T>>,
}

impl<T> CellWeights<T> {
    /// Entries in canonical order: `W, U, b`, then `W_g, U_g, b_g` per gate,
    /// then `W_out, b_out`.
    pub fn entries(&self) -> Vec<(String, &T)> {
        let mut out = vec![("W".to_string(), &self.w)];
        out.extend(self.u.iter().map(|u| ("U".to_string(), u)));
        out.extend(self.b.iter().map(|b| ("b".to_string(), b)));
        for g in &self.gates {
            out.push((format!("W_{}", g.name), &g.w));
            out.push((format!("U_{}", g.name), &g.u));
            out.push((format!("b_{}", g.name), &g.b));
        }
        if let Some(d) = &self.output {
            out.push(("W_out".to_string(), &d.w));
            out.push(("b_out".to_string(), &d.b));
        }
        out
    }

    pub fn values_mut(&mut self) -> Vec<&mut T> {
        let mut out = vec![&mut self.w];
        out.extend(self.u.as_mut());
        out.extend(self.b.as_mut());
        for g in &mut self.gates {
            out.extend([&mut g.w, &mut g.u, &mut g.b]);
        }
        if let Some(d) = &mut self.output {
            out.extend([&mut d.w, &mut d.b]);
        }
        out
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> CellWeights<U> {
        CellWeights {
            w: f(&self.w),
            u: self.u.as_ref().map(&mut f),
            b: self.b.as_ref().map(&mut f),
            gates: self
                .gates
                .iter()
                .map(|g| Gate {
                    name: g.name,
                    w: f(&g.w),
                    u: f(&g.u),
                    b: f(&g.b),
                })
                .collect(),
            output: self.output.as_ref().map(|d| Dense { w: f(&d.w), b: f(&d.b) }),
        }
    }
}

/// Learnable parameters of one recurrent cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellParams {
    pub kind: CellKind,
    pub input_size: usize,
    pub hidden_size: usize,
    pub weights: CellWeights<Tensor>,
}

impl CellParams {
    /// Standard initialization: input weights `U[-r, r]`, every recurrent
    /// matrix (including gate matrices and `W_out`) the identity, biases zero
    /// except the configured forget bias.
    pub fn init<R: Rng + ?Sized>(cfg: &CellConfig, rng: &mut R) -> Result<Self> {
        let (d, n, r) = (cfg.input_size, cfg.hidden_size, cfg.init_range);
        if d == 0 || n == 0 {
            return Err(Error::Config("cell sizes must be positive".into()));
        }
        let kind = cfg.kind;
        let w = Tensor::uniform(&[d, n], -r, r, rng);
        let u = kind.has_recurrent_matrix().then(|| Tensor::eye(n));
        let b = (kind != CellKind::Gru || cfg.gru_candidate_bias).then(|| Tensor::zeros(&[n]));
        let gates = kind
            .gate_names()
            .iter()
            .map(|&name| {
                let bias = if name == "f" { cfg.forget_bias } else { 0.0 };
                Gate {
                    name,
                    w: Tensor::uniform(&[d, n], -r, r, rng),
                    u: Tensor::eye(n),
                    b: Tensor::filled(&[n], bias),
                }
            })
            .collect();
        let output = kind.has_output_layer().then(|| Dense {
            w: Tensor::eye(n),
            b: Tensor::zeros(&[n]),
        });
        Ok(CellParams {
            kind,
            input_size: d,
            hidden_size: n,
            weights: CellWeights { w, u, b, gates, output },
        })
    }

    pub fn zeros(cfg: &CellConfig) -> Self {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut p = Self::init(cfg, &mut rng).expect("zero-sized cell");
        p.weights.values_mut().into_iter().for_each(|t| t.data_mut().fill(0.0));
        p
    }

    pub fn num_parameters(&self) -> usize {
        self.weights.entries().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundCell {
        BoundCell {
            kind: self.kind,
            hidden_size: self.hidden_size,
            weights: self.weights.map(|t| tape.param(t.clone())),
        }
    }

    /// Same as [`bind`](Self::bind) but records the parameters as constants.
    pub fn bind_frozen(&self, tape: &mut Tape) -> BoundCell {
        BoundCell {
            kind: self.kind,
            hidden_size: self.hidden_size,
            weights: self.weights.map(|t| tape.constant(t.clone())),
        }
    }
}

/// A cell whose parameters live on a tape.
#[derive(Clone, Debug)]
pub struct BoundCell {
    pub kind: CellKind,
    pub hidden_size: usize,
    pub weights: CellWeights<Var>,
}

/// Hidden state `h` and memory cell `c`, both `[batch, n]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellState {
    pub h: Var,
    pub c: Var,
}

impl CellState {
    pub fn zeros(tape: &mut Tape, batch: usize, hidden_size: usize) -> Self {
        let h = tape.constant(Tensor::zeros(&[batch, hidden_size]));
        let c = tape.constant(Tensor::zeros(&[batch, hidden_size]));
        CellState { h, c }
    }
}

/// `x·W (+ h·U) (+ b)`
fn affine(tape: &mut Tape, x: Var, w: Var, rec: Option<(Var, Var)>, b: Option<Var>) -> Result<Var> {
    let mut acc = tape.matmul(x, w)?;
    if let Some((h, u)) = rec {
        let hu = tape.matmul(h, u)?;
        acc = tape.add(acc, hu)?;
    }
    match b {
        Some(b) => tape.add_bias(acc, b),
        None => Ok(acc),
    }
}

fn check_state(tape: &Tape, p: &BoundCell, s: &CellState, x: Var) -> Result<()> {
    let h = tape.shape(s.h);
    let n = p.hidden_size;
    if h.len() != 2 || h[1] != n || tape.shape(s.c) != h {
        return Err(Error::dim("cell state", h, tape.shape(s.c)));
    }
    let xs = tape.shape(x);
    if xs.len() != 2 || xs[0] != h[0] {
        return Err(Error::dim("cell input", xs, h));
    }
    Ok(())
}

fn gate(tape: &mut Tape, g: &Gate<Var>, x: Var, h: Var) -> Result<Var> {
    let pre = affine(tape, x, g.w, Some((h, g.u)), Some(g.b))?;
    Ok(tape.sigmoid(pre))
}

fn expect_u(p: &BoundCell) -> Result<Var> {
    p.weights
        .u
        .ok_or_else(|| Error::contract(format!("{} cell has no recurrent matrix", p.kind)))
}

pub fn step_rnn(tape: &mut Tape, p: &BoundCell, s: &CellState, x: Var) -> Result<CellState> {
    check_state(tape, p, s, x)?;
    let pre = affine(tape, x, p.weights.w, Some((s.h, expect_u(p)?)), p.weights.b)?;
    Ok(CellState {
        h: tape.tanh(pre),
        c: s.c,
    })
}

pub fn step_irnn_id(tape: &mut Tape, p: &BoundCell, s: &CellState, x: Var) -> Result<CellState> {
    check_state(tape, p, s, x)?;
    let xw = tape.matmul(x, p.weights.w)?;
    let mut pre = tape.add(xw, s.h)?;
    if let Some(b) = p.weights.b {
        pre = tape.add_bias(pre, b)?;
    }
    Ok(CellState {
        h: tape.tanh(pre),
        c: s.c,
    })
}

pub fn step_gru(tape: &mut Tape, p: &BoundCell, s: &CellState, x: Var) -> Result<CellState> {
    check_state(tape, p, s, x)?;
    let [gr, gz] = p.weights.gates.as_slice() else {
        return Err(Error::contract("gru needs gates r and z"));
    };
    let r = gate(tape, gr, x, s.h)?;
    let z = gate(tape, gz, x, s.h)?;
    let rh = tape.mul(r, s.h)?;
    let pre = affine(tape, x, p.weights.w, Some((rh, expect_u(p)?)), p.weights.b)?;
    let cand = tape.tanh(pre);
    // (1 - z)⊙h + z⊙cand, written as h + z⊙(cand - h)
    let delta = tape.sub(cand, s.h)?;
    let step = tape.mul(z, delta)?;
    Ok(CellState {
        h: tape.add(s.h, step)?,
        c: s.c,
    })
}

/// Shared body of the LSTM family. `recurrent_candidate` selects between the
/// LSTM candidate `tanh(hU + xW + b)` and the PRU candidate `tanh(xW + b)`.
fn lstm_family(tape: &mut Tape, p: &BoundCell, s: &CellState, x: Var, recurrent_candidate: bool) -> Result<CellState> {
    check_state(tape, p, s, x)?;
    let [gi, gf, go] = p.weights.gates.as_slice() else {
        return Err(Error::contract(format!("{} needs gates i, f and o", p.kind)));
    };
    let i = gate(tape, gi, x, s.h)?;
    let f = gate(tape, gf, x, s.h)?;
    let o = gate(tape, go, x, s.h)?;
    let rec = if recurrent_candidate {
        Some((s.h, expect_u(p)?))
    } else {
        None
    };
    let pre = affine(tape, x, p.weights.w, rec, p.weights.b)?;
    let cand = tape.tanh(pre);
    let keep = tape.mul(f, s.c)?;
    let write = tape.mul(i, cand)?;
    let c = tape.add(keep, write)?;
    let tc = tape.tanh(c);
    let h_hat = tape.mul(o, tc)?;
    let h = match &p.weights.output {
        Some(out) => {
            let pre = affine(tape, h_hat, out.w, None, Some(out.b))?;
            tape.tanh(pre)
        }
        None => h_hat,
    };
    Ok(CellState { h, c })
}

pub fn step_lstm(tape: &mut Tape, p: &BoundCell, s: &CellState, x: Var) -> Result<CellState> {
    lstm_family(tape, p, s, x, true)
}

pub fn step_lstm_plus(tape: &mut Tape, p: &BoundCell, s: &CellState, x: Var) -> Result<CellState> {
    lstm_family(tape, p, s, x, true)
}

pub fn step_pru(tape: &mut Tape, p: &BoundCell, s: &CellState, x: Var) -> Result<CellState> {
    lstm_family(tape, p, s, x, false)
}

pub fn step_pru_plus(tape: &mut Tape, p: &BoundCell, s: &CellState, x: Var) -> Result<CellState> {
    lstm_family(tape, p, s, x, false)
}

impl BoundCell {
    pub fn step(&self, tape: &mut Tape, s: &CellState, x: Var) -> Result<CellState> {
        match self.kind {
            CellKind::Rnn => step_rnn(tape, self, s, x),
            CellKind::IrnnId => step_irnn_id(tape, self, s, x),
            CellKind::Gru => step_gru(tape, self, s, x),
            CellKind::Lstm => step_lstm(tape, self, s, x),
            CellKind::LstmPlus => step_lstm_plus(tape, self, s, x),
            CellKind::Pru => step_pru(tape, self, s, x),
            CellKind::PruPlus => step_pru_plus(tape, self, s, x),
        }
    }
}

/// Per-step hidden outputs and the final state of an unrolled sequence.
#[derive(Clone, Debug)]
pub struct Unrolled {
    pub hidden: Vec<Var>,
    pub last: CellState,
}

impl Unrolled {
    /// Hidden outputs as one `[batch, T, n]` value.
    pub fn stacked(&self, tape: &mut Tape) -> Result<Var> {
        tape.stack_time(&self.hidden)
    }
}

/// Runs `cell` over `inputs: [batch, T, d]` from a zero state.
///
/// Where `mask[b, t] == 0` the state of row `b` is carried through unchanged.
/// `None` means every step is valid.
pub fn unroll(tape: &mut Tape, cell: &BoundCell, inputs: &Tensor, mask: Option<&Tensor>) -> Result<Unrolled> {
    let &[batch, steps, _] = inputs.shape() else {
        return Err(Error::contract(format!(
            "unroll needs [batch, T, d] inputs, got {:?}",
            inputs.shape()
        )));
    };
    if steps == 0 {
        return Err(Error::EmptySequence);
    }
    if let Some(m) = mask {
        if m.shape() != [batch, steps] {
            return Err(Error::dim("unroll mask", m.shape(), &[batch, steps]));
        }
        if m.data().iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::contract("mask entries must be 0 or 1"));
        }
    }
    let mut state = CellState::zeros(tape, batch, cell.hidden_size);
    let mut hidden = Vec::with_capacity(steps);
    for t in 0..steps {
        let x = tape.constant(inputs.time_step(t)?);
        let next = cell.step(tape, &state, x)?;
        state = match mask {
            Some(m) => {
                let keep: Vec<bool> = m.column(t)?.into_iter().map(|v| v != 0.0).collect();
                if keep.iter().all(|&k| k) {
                    next
                } else {
                    CellState {
                        h: tape.select_rows(&keep, next.h, state.h)?,
                        c: tape.select_rows(&keep, next.c, state.c)?,
                    }
                }
            }
            None => next,
        };
        hidden.push(state.h);
    }
    Ok(Unrolled { hidden, last: state })
}
