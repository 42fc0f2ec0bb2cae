//! Dense row-major `f64` tensors and a reverse-mode tape over them.
//!
//! [`Tensor`] is a plain value type. Differentiable computation happens on a
//! [`Tape`], which records every operation together with the forward values its
//! adjoint needs, and replays the records in reverse on [`Tape::backward`].

mod kernels;
mod tape;

pub use tape::{Gradient, Tape, Var};

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::contract(format!(
                "tensor extents must be positive, got {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::contract(format!(
                "shape {shape:?} holds {expected} values but {} were given",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    /// Builds a tensor whose shape is already known to match `data`.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Result<Self> {
        Self::new(vec![data.len()], data)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    /// Builds a matrix from nested rows, e.g. `from_rows(&[[1.0, 2.0], [3.0, 4.0]])`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::contract("ragged rows"));
            }
            data.extend_from_slice(row);
        }
        Self::new(vec![rows.len(), cols], data)
    }

    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Samples every entry independently from `U[lo, hi)`.
    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], lo: f64, hi: f64, rng: &mut R) -> Self {
        let len = shape.iter().product();
        let data = (0..len).map(|_| rng.random_range(lo..hi)).collect();
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() != 1 {
            return Err(Error::contract(format!(
                "item() needs a one-element tensor, got shape {:?}",
                self.shape
            )));
        }
        Ok(self.data[0])
    }

    /// Entry at a multi-index; panics if the index is out of range.
    pub fn at(&self, index: &[usize]) -> f64 {
        assert_eq!(index.len(), self.shape.len(), "index rank mismatch");
        let mut offset = 0;
        for (&i, &d) in index.iter().zip(&self.shape) {
            assert!(i < d, "index {index:?} out of range for {:?}", self.shape);
            offset = offset * d + i;
        }
        self.data[offset]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::dim("max_abs_diff", &self.shape, &other.shape));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    /// Plain (non-recorded) matrix product.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        let (m, k, n) = matmul_dims(self, rhs)?;
        let mut out = vec![0.0; m * n];
        kernels::gemm(m, k, n, &self.data, false, &rhs.data, false, 0.0, &mut out);
        Ok(Tensor::from_parts(vec![m, n], out))
    }

    /// Slice `[batch, T, features]` at time `t` into `[batch, features]`.
    pub fn time_step(&self, t: usize) -> Result<Tensor> {
        let &[batch, steps, features] = self.shape.as_slice() else {
            return Err(Error::contract(format!(
                "time_step needs a rank-3 tensor, got {:?}",
                self.shape
            )));
        };
        if t >= steps {
            return Err(Error::contract(format!("time step {t} out of range 0..{steps}")));
        }
        let mut data = Vec::with_capacity(batch * features);
        for b in 0..batch {
            let start = (b * steps + t) * features;
            data.extend_from_slice(&self.data[start..start + features]);
        }
        Ok(Tensor::from_parts(vec![batch, features], data))
    }

    /// Column `t` of a `[batch, T]` matrix.
    pub fn column(&self, t: usize) -> Result<Vec<f64>> {
        let &[rows, cols] = self.shape.as_slice() else {
            return Err(Error::contract("column needs a matrix"));
        };
        if t >= cols {
            return Err(Error::contract(format!("column {t} out of range 0..{cols}")));
        }
        Ok((0..rows).map(|r| self.data[r * cols + t]).collect())
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.data.len() <= 16 {
            write!(f, "Tensor{:?} {:?}", self.shape, self.data)
        } else {
            write!(f, "Tensor{:?} [{} values]", self.shape, self.data.len())
        }
    }
}

fn matmul_dims(a: &Tensor, b: &Tensor) -> Result<(usize, usize, usize)> {
    match (a.shape.as_slice(), b.shape.as_slice()) {
        (&[m, k], &[k2, n]) if k == k2 => Ok((m, k, n)),
        _ => Err(Error::dim("matmul", &a.shape, &b.shape)),
    }
}
