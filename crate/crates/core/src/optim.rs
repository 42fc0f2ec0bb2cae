//! Adam with elementwise gradient clipping.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for an ordered list of parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    /// Number of completed updates.
    pub t: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

/// Clamps every entry of every gradient into `[lo, hi]`.
pub fn clip(mut grads: Vec<Tensor>, lo: f64, hi: f64) -> Result<Vec<Tensor>> {
    clip_in_place(&mut grads, lo, hi)?;
    Ok(grads)
}

pub fn clip_in_place(grads: &mut [Tensor], lo: f64, hi: f64) -> Result<()> {
    if lo > hi || lo.is_nan() || hi.is_nan() {
        return Err(Error::contract(format!("clip bounds [{lo}, {hi}] are not ordered")));
    }
    for g in grads {
        for x in g.data_mut() {
            *x = x.clamp(lo, hi);
        }
    }
    Ok(())
}

impl AdamState {
    /// Fresh state with zero moments shaped like `params`.
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let shapes: Vec<&[usize]> = params.into_iter().map(Tensor::shape).collect();
        AdamState {
            config,
            t: 0,
            m: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
        }
    }

    /// One bias-corrected Adam update. Gradients are expected to be clipped
    /// already.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::contract(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.shape() != g.shape() {
                return Err(Error::dim("adam_step", p.shape(), g.shape()));
            }
            if p.shape() != m.shape() {
                return Err(Error::dim("adam_step", p.shape(), m.shape()));
            }
        }

        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let correct1 = 1.0 - beta1.powi(t);
        let correct2 = 1.0 - beta2.powi(t);

        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let entries = p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut());
            for (((p, &g), m), v) in entries {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / correct1;
                let v_hat = *v / correct2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
