//! Append-only Wengert tape.
//!
//! Every operation pushes one record holding its operands, a tag, and the
//! forward value. Records only reference earlier records, so a single reverse
//! sweep over the tape visits operands after all their consumers.

use super::kernels::{gemm, sigmoid};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Sum(Var, Option<usize>),
    Mean(Var, Option<usize>),
    SelectRows {
        keep_new: Vec<bool>,
        new: Var,
        old: Var,
    },
    StackTime(Vec<Var>),
    SoftmaxXent {
        logits: Var,
        targets: Vec<usize>,
        weights: Vec<f64>,
        weight_total: f64,
        probs: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one backward sweep, kept for leaves only.
#[derive(Debug)]
pub struct Gradient {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradient {
    /// Gradient of a leaf, or `None` if the root does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of a leaf; zeros when the root does not depend on it.
    pub fn wrt(&self, v: Var) -> Tensor {
        match self.get(v) {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    pub fn take(&mut self, v: Var) -> Tensor {
        self.grads[v.0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Records a leaf that receives a gradient.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Records a leaf that is treated as a constant.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::MatMul(a, b), needs))
    }

    fn zip_same(&self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::dim(op, ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Ok(Tensor::from_parts(ta.shape().to_vec(), data))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same("add", a, b, |x, y| x + y)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Add(a, b), needs))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same("sub", a, b, |x, y| x - y)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Sub(a, b), needs))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same("mul", a, b, |x, y| x * y)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Mul(a, b), needs))
    }

    /// Adds a vector `[n]` to every row of a matrix `[m, n]`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        let n = match (ta.shape(), tb.shape()) {
            (&[_, n], &[nb]) if n == nb => n,
            _ => return Err(Error::dim("add_bias", ta.shape(), tb.shape())),
        };
        let mut data = ta.data().to_vec();
        for row in data.chunks_exact_mut(n) {
            for (x, &b) in row.iter_mut().zip(tb.data()) {
                *x += b;
            }
        }
        let out = Tensor::from_parts(ta.shape().to_vec(), data);
        let needs = self.needs(a) || self.needs(bias);
        Ok(self.push(out, Op::AddBias(a, bias), needs))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let t = self.value(a);
        let data = t.data().iter().map(|x| x * k).collect();
        let out = Tensor::from_parts(t.shape().to_vec(), data);
        let needs = self.needs(a);
        self.push(out, Op::Scale(a, k), needs)
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let t = self.value(a);
        Tensor::from_parts(t.shape().to_vec(), t.data().iter().map(|&x| f(x)).collect())
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.map(a, f64::tanh);
        let needs = self.needs(a);
        self.push(out, Op::Tanh(a), needs)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.map(a, sigmoid);
        let needs = self.needs(a);
        self.push(out, Op::Sigmoid(a), needs)
    }

    /// Sum over one axis, or over everything when `axis` is `None`.
    pub fn sum(&mut self, a: Var, axis: Option<usize>) -> Result<Var> {
        let out = reduce_sum(self.value(a), axis)?;
        let needs = self.needs(a);
        Ok(self.push(out, Op::Sum(a, axis), needs))
    }

    pub fn mean(&mut self, a: Var, axis: Option<usize>) -> Result<Var> {
        let count = reduced_count(self.value(a), axis)? as f64;
        let mut out = reduce_sum(self.value(a), axis)?;
        out.data_mut().iter_mut().for_each(|x| *x /= count);
        let needs = self.needs(a);
        Ok(self.push(out, Op::Mean(a, axis), needs))
    }

    /// Row-wise choice between two `[m, n]` matrices: row `r` comes from
    /// `new` when `keep_new[r]`, otherwise from `old`.
    pub fn select_rows(&mut self, keep_new: &[bool], new: Var, old: Var) -> Result<Var> {
        let (tn, to) = (self.value(new), self.value(old));
        if tn.shape() != to.shape() || tn.rank() != 2 || tn.shape()[0] != keep_new.len() {
            return Err(Error::dim("select_rows", tn.shape(), to.shape()));
        }
        let n = tn.shape()[1];
        let mut data = Vec::with_capacity(tn.len());
        for (r, &k) in keep_new.iter().enumerate() {
            let src = if k { tn } else { to };
            data.extend_from_slice(&src.data()[r * n..(r + 1) * n]);
        }
        let out = Tensor::from_parts(tn.shape().to_vec(), data);
        let needs = self.needs(new) || self.needs(old);
        Ok(self.push(
            out,
            Op::SelectRows {
                keep_new: keep_new.to_vec(),
                new,
                old,
            },
            needs,
        ))
    }

    /// Stacks per-step `[batch, n]` matrices into `[batch, T, n]`.
    pub fn stack_time(&mut self, steps: &[Var]) -> Result<Var> {
        let first = *steps.first().ok_or(Error::EmptySequence)?;
        let shape = self.shape(first).to_vec();
        let &[batch, n] = shape.as_slice() else {
            return Err(Error::dim("stack_time", &shape, &[]));
        };
        for &s in steps {
            if self.shape(s) != shape.as_slice() {
                return Err(Error::dim("stack_time", &shape, self.shape(s)));
            }
        }
        let t_len = steps.len();
        let mut data = vec![0.0; batch * t_len * n];
        for (t, &s) in steps.iter().enumerate() {
            let src = self.value(s).data();
            for b in 0..batch {
                let dst = (b * t_len + t) * n;
                data[dst..dst + n].copy_from_slice(&src[b * n..(b + 1) * n]);
            }
        }
        let needs = steps.iter().any(|&s| self.needs(s));
        let out = Tensor::from_parts(vec![batch, t_len, n], data);
        Ok(self.push(out, Op::StackTime(steps.to_vec()), needs))
    }

    /// Weighted mean softmax cross-entropy over the last axis.
    ///
    /// `logits` has shape `[.., K]`; `targets` and `weights` hold one entry per
    /// row. The result is `Σ w·CE / Σ w`. Log-softmax uses the max shift.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize], weights: &[f64]) -> Result<Var> {
        let t = self.value(logits);
        let k = *t
            .shape()
            .last()
            .ok_or_else(|| Error::contract("logits need rank ≥ 1"))?;
        let rows = t.len() / k;
        if targets.len() != rows || weights.len() != rows {
            return Err(Error::dim("softmax_cross_entropy", t.shape(), &[targets.len()]));
        }
        if let Some(&bad) = targets.iter().find(|&&c| c >= k) {
            return Err(Error::contract(format!("target class {bad} out of range 0..{k}")));
        }
        let weight_total: f64 = weights.iter().sum();
        if weight_total <= 0.0 {
            return Err(Error::contract("cross-entropy mask selects no positions"));
        }
        let mut probs = vec![0.0; t.len()];
        let mut total = 0.0;
        for (r, row) in t.data().chunks_exact(k).enumerate() {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let p = &mut probs[r * k..(r + 1) * k];
            let mut z = 0.0;
            for (pi, &x) in p.iter_mut().zip(row) {
                *pi = (x - max).exp();
                z += *pi;
            }
            p.iter_mut().for_each(|pi| *pi /= z);
            if weights[r] != 0.0 {
                let log_prob = row[targets[r]] - max - z.ln();
                total -= weights[r] * log_prob;
            }
        }
        let needs = self.needs(logits);
        Ok(self.push(
            Tensor::scalar(total / weight_total),
            Op::SoftmaxXent {
                logits,
                targets: targets.to_vec(),
                weights: weights.to_vec(),
                weight_total,
                probs,
            },
            needs,
        ))
    }

    /// Reverse sweep from a scalar `root`.
    pub fn backward(&self, root: Var) -> Result<Gradient> {
        let root_value = self.value(root);
        if root_value.len() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar root, got shape {:?}",
                root_value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..=root.0).map(|_| None).collect();
        grads[root.0] = Some(Tensor::filled(root_value.shape(), 1.0));

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) || !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }

        grads.resize_with(self.nodes.len(), || None);
        for (g, node) in grads.iter_mut().zip(&self.nodes) {
            if !matches!(node.op, Op::Leaf) || !node.needs_grad {
                *g = None;
            }
        }
        Ok(Gradient {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                if self.needs(*a) {
                    // dA = G · Bᵀ
                    let (slot, beta) = slot(grads, *a, ta.shape());
                    gemm(m, n, k, g.data(), false, tb.data(), true, beta, slot);
                }
                if self.needs(*b) {
                    // dB = Aᵀ · G
                    let (slot, beta) = slot(grads, *b, tb.shape());
                    gemm(k, m, n, ta.data(), true, g.data(), false, beta, slot);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.data().iter().copied());
                self.accumulate(grads, *b, g.data().iter().copied());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.data().iter().copied());
                self.accumulate(grads, *b, g.data().iter().map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                self.accumulate(grads, *a, g.data().iter().zip(tb.data()).map(|(g, y)| g * y));
                self.accumulate(grads, *b, g.data().iter().zip(ta.data()).map(|(g, x)| g * x));
            }
            Op::AddBias(a, bias) => {
                self.accumulate(grads, *a, g.data().iter().copied());
                if self.needs(*bias) {
                    let n = self.value(*bias).len();
                    let mut col = vec![0.0; n];
                    for row in g.data().chunks_exact(n) {
                        col.iter_mut().zip(row).for_each(|(c, x)| *c += x);
                    }
                    self.accumulate(grads, *bias, col.into_iter());
                }
            }
            Op::Scale(a, k) => self.accumulate(grads, *a, g.data().iter().map(|x| x * k)),
            Op::Tanh(a) => {
                let y = node.value.data();
                self.accumulate(grads, *a, g.data().iter().zip(y).map(|(g, y)| g * (1.0 - y * y)));
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                self.accumulate(grads, *a, g.data().iter().zip(y).map(|(g, y)| g * y * (1.0 - y)));
            }
            Op::Sum(a, axis) | Op::Mean(a, axis) => {
                let input = self.value(*a);
                let scale = match node.op {
                    Op::Mean(..) => 1.0 / reduced_count(input, *axis).unwrap_or(1) as f64,
                    _ => 1.0,
                };
                let spread = broadcast_reduced(g, input.shape(), *axis);
                self.accumulate(grads, *a, spread.into_iter().map(|x| x * scale));
            }
            Op::SelectRows { keep_new, new, old } => {
                let n = node.value.shape()[1];
                let pick = |want: bool| {
                    let mut out = vec![0.0; g.len()];
                    for (r, &k) in keep_new.iter().enumerate() {
                        if k == want {
                            out[r * n..(r + 1) * n].copy_from_slice(&g.data()[r * n..(r + 1) * n]);
                        }
                    }
                    out
                };
                if self.needs(*new) {
                    self.accumulate(grads, *new, pick(true).into_iter());
                }
                if self.needs(*old) {
                    self.accumulate(grads, *old, pick(false).into_iter());
                }
            }
            Op::StackTime(steps) => {
                let &[batch, t_len, n] = node.value.shape() else {
                    unreachable!("stack output is rank 3")
                };
                for (t, &s) in steps.iter().enumerate() {
                    if !self.needs(s) {
                        continue;
                    }
                    let mut part = Vec::with_capacity(batch * n);
                    for b in 0..batch {
                        let src = (b * t_len + t) * n;
                        part.extend_from_slice(&g.data()[src..src + n]);
                    }
                    self.accumulate(grads, s, part.into_iter());
                }
            }
            Op::SoftmaxXent {
                logits,
                targets,
                weights,
                weight_total,
                probs,
            } => {
                let k = *self.value(*logits).shape().last().unwrap_or(&1);
                let upstream = g.data()[0];
                let mut d = probs.clone();
                for (r, row) in d.chunks_exact_mut(k).enumerate() {
                    let w = upstream * weights[r] / weight_total;
                    row[targets[r]] -= 1.0;
                    row.iter_mut().for_each(|x| *x *= w);
                }
                self.accumulate(grads, *logits, d.into_iter());
            }
        }
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, values: impl Iterator<Item = f64>) {
        if !self.needs(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.data_mut().iter_mut().zip(values).for_each(|(e, x)| *e += x),
            empty @ None => {
                let shape = self.value(v).shape().to_vec();
                *empty = Some(Tensor::from_parts(shape, values.collect()));
            }
        }
    }
}

/// Gradient buffer for `v` plus the gemm `beta` to use (1 to accumulate).
fn slot<'a>(grads: &'a mut [Option<Tensor>], v: Var, shape: &[usize]) -> (&'a mut [f64], f64) {
    let beta = if grads[v.0].is_some() { 1.0 } else { 0.0 };
    let t = grads[v.0].get_or_insert_with(|| Tensor::zeros(shape));
    (t.data_mut(), beta)
}

fn check_axis(t: &Tensor, axis: usize) -> Result<()> {
    if axis >= t.rank() {
        return Err(Error::contract(format!(
            "axis {axis} out of range for shape {:?}",
            t.shape()
        )));
    }
    Ok(())
}

fn reduced_count(t: &Tensor, axis: Option<usize>) -> Result<usize> {
    match axis {
        None => Ok(t.len()),
        Some(ax) => {
            check_axis(t, ax)?;
            Ok(t.shape()[ax])
        }
    }
}

/// `(outer, extent, inner)` such that `axis` is the middle factor.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn reduce_sum(t: &Tensor, axis: Option<usize>) -> Result<Tensor> {
    let Some(ax) = axis else {
        return Ok(Tensor::scalar(t.data().iter().sum()));
    };
    check_axis(t, ax)?;
    let (outer, extent, inner) = split_axis(t.shape(), ax);
    let mut out = vec![0.0; outer * inner];
    for o in 0..outer {
        for e in 0..extent {
            let src = &t.data()[(o * extent + e) * inner..][..inner];
            out[o * inner..(o + 1) * inner]
                .iter_mut()
                .zip(src)
                .for_each(|(acc, x)| *acc += x);
        }
    }
    let mut shape: Vec<usize> = t.shape().to_vec();
    shape.remove(ax);
    if shape.is_empty() {
        shape.push(1);
    }
    Ok(Tensor::from_parts(shape, out))
}

fn broadcast_reduced(g: &Tensor, input_shape: &[usize], axis: Option<usize>) -> Vec<f64> {
    let len: usize = input_shape.iter().product();
    let Some(ax) = axis else {
        return vec![g.data()[0]; len];
    };
    let (outer, extent, inner) = split_axis(input_shape, ax);
    let mut out = Vec::with_capacity(len);
    for o in 0..outer {
        for _ in 0..extent {
            out.extend_from_slice(&g.data()[o * inner..(o + 1) * inner]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn activations_at_zero() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[3]));
        let s = tape.sigmoid(x);
        let th = tape.tanh(x);
        assert_eq!(tape.value(s).data(), &[0.5; 3]);
        assert_eq!(tape.value(th).data(), &[0.0; 3]);
    }

    #[test]
    fn reductions() {
        let mut tape = Tape::new();
        let v = tape.constant(t(&[3], &[1.0, 2.0, 3.0]));
        let m = tape.mean(v, None).unwrap();
        assert_eq!(tape.value(m).item().unwrap(), 2.0);

        let a = tape.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let s0 = tape.sum(a, Some(0)).unwrap();
        assert_eq!(tape.value(s0).data(), &[4.0, 6.0]);
        let s1 = tape.sum(a, Some(1)).unwrap();
        assert_eq!(tape.value(s1).data(), &[3.0, 7.0]);
        assert!(matches!(tape.sum(a, Some(2)), Err(Error::Contract(_))));
    }

    #[test]
    fn mean_gradient_is_one_over_n() {
        let mut tape = Tape::new();
        let p = tape.param(t(&[5], &[0.3, -1.0, 2.0, 7.0, 0.0]));
        let m = tape.mean(p, None).unwrap();
        let g = tape.backward(m).unwrap();
        assert_eq!(g.wrt(p).data(), &[0.2; 5]);
    }

    #[test]
    fn leaf_root_has_unit_gradient() {
        let mut tape = Tape::new();
        let p = tape.param(Tensor::scalar(3.0));
        let g = tape.backward(p).unwrap();
        assert_eq!(g.wrt(p).data(), &[1.0]);
    }

    #[test]
    fn sum_of_squares_gradient() {
        let mut tape = Tape::new();
        let p = tape.param(t(&[2], &[1.0, 2.0]));
        let sq = tape.mul(p, p).unwrap();
        let s = tape.sum(sq, None).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.wrt(p).data(), &[2.0, 4.0]);
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let mut tape = Tape::new();
        let p = tape.param(t(&[2], &[1.0, 2.0]));
        assert!(matches!(tape.backward(p), Err(Error::Contract(_))));
    }

    #[test]
    fn unreached_leaf_gets_zero_gradient() {
        let mut tape = Tape::new();
        let p = tape.param(t(&[2], &[1.0, 2.0]));
        let q = tape.param(t(&[2, 1], &[5.0, 6.0]));
        let s = tape.sum(p, None).unwrap();
        let g = tape.backward(s).unwrap();
        assert!(g.get(q).is_none());
        assert_eq!(g.wrt(q), Tensor::zeros(&[2, 1]));
    }

    #[test]
    fn broadcasting_is_limited_to_bias_add() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let v = tape.constant(Tensor::zeros(&[3]));
        let w = tape.constant(Tensor::zeros(&[2]));
        assert!(tape.add_bias(a, v).is_ok());
        assert!(matches!(tape.add(a, v), Err(Error::Dimension { .. })));
        assert!(matches!(tape.add_bias(a, w), Err(Error::Dimension { .. })));
    }

    #[test]
    fn select_rows_routes_values_and_gradients() {
        let mut tape = Tape::new();
        let new = tape.param(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let old = tape.param(t(&[2, 2], &[5.0, 6.0, 7.0, 8.0]));
        let s = tape.select_rows(&[true, false], new, old).unwrap();
        assert_eq!(tape.value(s).data(), &[1.0, 2.0, 7.0, 8.0]);
        let total = tape.sum(s, None).unwrap();
        let g = tape.backward(total).unwrap();
        assert_eq!(g.wrt(new).data(), &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(g.wrt(old).data(), &[0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn uniform_logits_give_log_k() {
        let mut tape = Tape::new();
        let logits = tape.constant(Tensor::filled(&[2, 3, 7], 0.25));
        let ce = tape
            .softmax_cross_entropy(logits, &[0, 1, 2, 3, 4, 5], &[1.0; 6])
            .unwrap();
        assert!((tape.value(ce).item().unwrap() - 7f64.ln()).abs() < 1e-15);
        assert!(matches!(
            tape.softmax_cross_entropy(logits, &[0; 6], &[0.0; 6]),
            Err(Error::Contract(_))
        ));
        assert!(tape.softmax_cross_entropy(logits, &[7; 6], &[1.0; 6]).is_err());
    }
}
