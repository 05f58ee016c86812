//! Primitive differentiable operations: forward constructors on [`Var`] and
//! the corresponding backward rules.

use crate::error::{Error, Result};
use crate::rng::SplitRng;
use crate::tensor::Tensor;

use super::{Node, Tape, Var};

/// Operation kind recorded per tape node, with parent ids and whatever the
/// backward rule needs (saved partials live in the parent/output values).
pub enum Op {
    Leaf,
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Div { a: usize, b: usize },
    MinElem { a: usize, b: usize },
    Neg { a: usize },
    AddScalar { a: usize },
    MulScalar { a: usize, c: f64 },
    Powi { a: usize, n: i32 },
    Matmul { a: usize, b: usize },
    Relu { a: usize },
    LeakyRelu { a: usize, slope: f64 },
    Sigmoid { a: usize },
    Tanh { a: usize },
    Exp { a: usize },
    Ln { a: usize },
    Sqrt { a: usize },
    Abs { a: usize },
    Clamp { a: usize, lo: f64, hi: f64 },
    SumAll { a: usize },
    MeanAll { a: usize },
    SumAxis { a: usize, axis: usize },
    MeanAxis { a: usize, axis: usize },
    MaxAll { a: usize, argmax: usize },
    MaxAxis { a: usize, argmax: Vec<usize> },
    Reshape { a: usize },
    Transpose { a: usize },
    Narrow { a: usize, axis: usize, start: usize },
    Concat { parts: Vec<usize>, axis: usize },
    /// Gather along axis 0; also serves as embedding lookup.
    SelectRows { a: usize, indices: Vec<usize> },
    Softmax { a: usize, axis: usize },
    LogSoftmax { a: usize, axis: usize },
    /// Row-wise softmax over allowed positions of a 2-D score matrix;
    /// disallowed positions get exactly zero weight.
    MaskedSoftmax { a: usize, allowed: Vec<bool> },
    /// Mean cross-entropy of rows of logits against class indices,
    /// in the fused log-sum-exp form.
    CrossEntropyLogits { logits: usize, targets: Vec<usize> },
    Dropout { a: usize, scale_mask: Vec<f64> },
    /// Forward takes a replacement value; backward passes the gradient to
    /// the parent unchanged (straight-through estimator).
    StraightThrough { a: usize },
    Conv2d {
        x: usize,
        w: usize,
        b: Option<usize>,
        stride: usize,
        padding: usize,
        groups: usize,
    },
    MaxPool2d { a: usize, argmax: Vec<usize> },
}

fn accumulate(grads: &mut [Option<Tensor>], id: usize, g: Tensor) {
    match &mut grads[id] {
        Some(existing) => {
            for (e, add) in existing.data_mut().iter_mut().zip(g.data()) {
                *e += add;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

/// Apply the backward rule of node `id`, accumulating into its parents.
pub(crate) fn backprop(
    nodes: &[Node],
    id: usize,
    grad: &Tensor,
    grads: &mut [Option<Tensor>],
) -> Result<()> {
    let val = |i: usize| &nodes[i].value;
    match &nodes[id].op {
        Op::Leaf => {}
        Op::Add { a, b } => {
            accumulate(grads, *a, grad.reduce_to_shape(val(*a).shape()));
            accumulate(grads, *b, grad.reduce_to_shape(val(*b).shape()));
        }
        Op::Sub { a, b } => {
            accumulate(grads, *a, grad.reduce_to_shape(val(*a).shape()));
            accumulate(grads, *b, grad.map(|v| -v).reduce_to_shape(val(*b).shape()));
        }
        Op::Mul { a, b } => {
            let ga = grad.broadcast_zip(val(*b), |g, bv| g * bv)?;
            let gb = grad.broadcast_zip(val(*a), |g, av| g * av)?;
            accumulate(grads, *a, ga.reduce_to_shape(val(*a).shape()));
            accumulate(grads, *b, gb.reduce_to_shape(val(*b).shape()));
        }
        Op::Div { a, b } => {
            let ga = grad.broadcast_zip(val(*b), |g, bv| g / bv)?;
            let out = &nodes[id].value; // a/b, already broadcast
            let gb = grad
                .broadcast_zip(out, |g, o| g * o)?
                .broadcast_zip(val(*b), |go, bv| -go / bv)?;
            accumulate(grads, *a, ga.reduce_to_shape(val(*a).shape()));
            accumulate(grads, *b, gb.reduce_to_shape(val(*b).shape()));
        }
        Op::MinElem { a, b } => {
            // ties route to the first operand
            let pick_a = val(*a).broadcast_zip(val(*b), |x, y| if x <= y { 1.0 } else { 0.0 })?;
            let ga = grad.broadcast_zip(&pick_a, |g, m| g * m)?;
            let gb = grad.broadcast_zip(&pick_a, |g, m| g * (1.0 - m))?;
            accumulate(grads, *a, ga.reduce_to_shape(val(*a).shape()));
            accumulate(grads, *b, gb.reduce_to_shape(val(*b).shape()));
        }
        Op::Neg { a } => accumulate(grads, *a, grad.map(|v| -v)),
        Op::AddScalar { a } => accumulate(grads, *a, grad.clone()),
        Op::MulScalar { a, c } => accumulate(grads, *a, grad.map(|v| v * c)),
        Op::Powi { a, n } => {
            let n = *n;
            let g = val(*a).broadcast_zip(grad, |x, g| g * n as f64 * x.powi(n - 1))?;
            accumulate(grads, *a, g);
        }
        Op::Matmul { a, b } => {
            let ga = grad.matmul(&val(*b).transpose()?)?;
            let gb = val(*a).transpose()?.matmul(grad)?;
            accumulate(grads, *a, ga);
            accumulate(grads, *b, gb);
        }
        Op::Relu { a } => {
            let g = val(*a).broadcast_zip(grad, |x, g| if x > 0.0 { g } else { 0.0 })?;
            accumulate(grads, *a, g);
        }
        Op::LeakyRelu { a, slope } => {
            let s = *slope;
            let g = val(*a).broadcast_zip(grad, |x, g| if x > 0.0 { g } else { g * s })?;
            accumulate(grads, *a, g);
        }
        Op::Sigmoid { a } => {
            let g = nodes[id].value.broadcast_zip(grad, |y, g| g * y * (1.0 - y))?;
            accumulate(grads, *a, g);
        }
        Op::Tanh { a } => {
            let g = nodes[id].value.broadcast_zip(grad, |y, g| g * (1.0 - y * y))?;
            accumulate(grads, *a, g);
        }
        Op::Exp { a } => {
            let g = nodes[id].value.broadcast_zip(grad, |y, g| g * y)?;
            accumulate(grads, *a, g);
        }
        Op::Ln { a } => {
            let g = val(*a).broadcast_zip(grad, |x, g| g / x)?;
            accumulate(grads, *a, g);
        }
        Op::Sqrt { a } => {
            let g = nodes[id].value.broadcast_zip(grad, |y, g| g / (2.0 * y))?;
            accumulate(grads, *a, g);
        }
        Op::Abs { a } => {
            let g = val(*a).broadcast_zip(grad, |x, g| g * sign(x))?;
            accumulate(grads, *a, g);
        }
        Op::Clamp { a, lo, hi } => {
            let (lo, hi) = (*lo, *hi);
            let g = val(*a).broadcast_zip(grad, |x, g| if x >= lo && x <= hi { g } else { 0.0 })?;
            accumulate(grads, *a, g);
        }
        Op::SumAll { a } => {
            let g = grad.data()[0];
            accumulate(grads, *a, Tensor::full(val(*a).shape(), g));
        }
        Op::MeanAll { a } => {
            let g = grad.data()[0] / val(*a).numel() as f64;
            accumulate(grads, *a, Tensor::full(val(*a).shape(), g));
        }
        Op::SumAxis { a, axis } => {
            accumulate(grads, *a, expand_axis(grad, val(*a).shape(), *axis, 1.0));
        }
        Op::MeanAxis { a, axis } => {
            let scale = 1.0 / val(*a).shape()[*axis] as f64;
            accumulate(grads, *a, expand_axis(grad, val(*a).shape(), *axis, scale));
        }
        Op::MaxAll { a, argmax } => {
            let mut g = Tensor::zeros(val(*a).shape());
            g.data_mut()[*argmax] = grad.data()[0];
            accumulate(grads, *a, g);
        }
        Op::MaxAxis { a, argmax } => {
            let mut g = Tensor::zeros(val(*a).shape());
            for (out_i, &src) in argmax.iter().enumerate() {
                g.data_mut()[src] += grad.data()[out_i];
            }
            accumulate(grads, *a, g);
        }
        Op::Reshape { a } => {
            accumulate(grads, *a, grad.reshape(val(*a).shape())?);
        }
        Op::Transpose { a } => {
            accumulate(grads, *a, grad.transpose()?);
        }
        Op::Narrow { a, axis, start } => {
            let src_shape = val(*a).shape();
            let mut g = Tensor::zeros(src_shape);
            copy_block(grad, &mut g, *axis, 0, *start, grad.shape()[*axis]);
            accumulate(grads, *a, g);
        }
        Op::Concat { parts, axis } => {
            let mut offset = 0;
            for &p in parts {
                let p_shape = val(p).shape().to_vec();
                let len = p_shape[*axis];
                let mut g = Tensor::zeros(&p_shape);
                copy_block(grad, &mut g, *axis, offset, 0, len);
                accumulate(grads, p, g);
                offset += len;
            }
        }
        Op::SelectRows { a, indices } => {
            let src_shape = val(*a).shape().to_vec();
            let inner: usize = src_shape[1..].iter().product();
            let mut g = Tensor::zeros(&src_shape);
            for (row, &src_row) in indices.iter().enumerate() {
                let dst = &mut g.data_mut()[src_row * inner..(src_row + 1) * inner];
                let src = &grad.data()[row * inner..(row + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
            accumulate(grads, *a, g);
        }
        Op::Softmax { a, axis } => {
            let y = &nodes[id].value;
            let mut g = Tensor::zeros(y.shape());
            for_each_lane(y.shape(), *axis, |lane| {
                let dot: f64 = lane.iter().map(|&i| grad.data()[i] * y.data()[i]).sum();
                for &i in lane {
                    g.data_mut()[i] = y.data()[i] * (grad.data()[i] - dot);
                }
            });
            accumulate(grads, *a, g);
        }
        Op::LogSoftmax { a, axis } => {
            let y = &nodes[id].value; // log-probabilities
            let mut g = Tensor::zeros(y.shape());
            for_each_lane(y.shape(), *axis, |lane| {
                let gsum: f64 = lane.iter().map(|&i| grad.data()[i]).sum();
                for &i in lane {
                    g.data_mut()[i] = grad.data()[i] - y.data()[i].exp() * gsum;
                }
            });
            accumulate(grads, *a, g);
        }
        Op::MaskedSoftmax { a, allowed } => {
            let y = &nodes[id].value;
            let cols = y.shape()[1];
            let mut g = Tensor::zeros(y.shape());
            for r in 0..y.shape()[0] {
                let base = r * cols;
                let dot: f64 = (0..cols)
                    .filter(|&c| allowed[base + c])
                    .map(|c| grad.data()[base + c] * y.data()[base + c])
                    .sum();
                for c in 0..cols {
                    if allowed[base + c] {
                        g.data_mut()[base + c] =
                            y.data()[base + c] * (grad.data()[base + c] - dot);
                    }
                }
            }
            accumulate(grads, *a, g);
        }
        Op::CrossEntropyLogits { logits, targets } => {
            // d loss / d logits = (softmax - one_hot) / batch
            let x = val(*logits);
            let (rows, cols) = (x.shape()[0], x.shape()[1]);
            debug_assert_eq!(rows, targets.len());
            let scale = grad.data()[0] / rows as f64;
            let mut g = Tensor::zeros(x.shape());
            for (r, &target) in targets.iter().enumerate() {
                let row = x.row(r);
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
                for (c, &logit) in row.iter().enumerate() {
                    let p = (logit - m).exp() / z;
                    let onehot = if c == target { 1.0 } else { 0.0 };
                    g.data_mut()[r * cols + c] = scale * (p - onehot);
                }
            }
            accumulate(grads, *logits, g);
        }
        Op::Dropout { a, scale_mask } => {
            let mut g = grad.clone();
            for (gv, m) in g.data_mut().iter_mut().zip(scale_mask) {
                *gv *= m;
            }
            accumulate(grads, *a, g);
        }
        Op::StraightThrough { a } => accumulate(grads, *a, grad.clone()),
        Op::Conv2d { x, w, b, stride, padding, groups } => {
            let (gx, gw, gb) = conv2d_backward(val(*x), val(*w), grad, *stride, *padding, *groups);
            accumulate(grads, *x, gx);
            accumulate(grads, *w, gw);
            if let Some(b) = b {
                accumulate(grads, *b, gb);
            }
        }
        Op::MaxPool2d { a, argmax } => {
            let mut g = Tensor::zeros(val(*a).shape());
            for (out_i, &src) in argmax.iter().enumerate() {
                g.data_mut()[src] += grad.data()[out_i];
            }
            accumulate(grads, *a, g);
        }
    }
    Ok(())
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Broadcast a reduced gradient back along `axis`, scaling each copy.
fn expand_axis(grad: &Tensor, target: &[usize], axis: usize, scale: f64) -> Tensor {
    let mut out = Tensor::zeros(target);
    let outer: usize = target[..axis].iter().product();
    let len = target[axis];
    let inner: usize = target[axis + 1..].iter().product();
    for o in 0..outer {
        for j in 0..len {
            for i in 0..inner {
                out.data_mut()[(o * len + j) * inner + i] = grad.data()[o * inner + i] * scale;
            }
        }
    }
    out
}

/// Copy a contiguous block of `len` slices along `axis` from `src` (starting
/// at `src_start`) into `dst` (starting at `dst_start`). Shapes must agree on
/// every other axis.
fn copy_block(src: &Tensor, dst: &mut Tensor, axis: usize, src_start: usize, dst_start: usize, len: usize) {
    let s_shape = src.shape();
    let d_shape = dst.shape().to_vec();
    let outer: usize = s_shape[..axis].iter().product();
    let inner: usize = s_shape[axis + 1..].iter().product();
    let s_len = s_shape[axis];
    let d_len = d_shape[axis];
    for o in 0..outer {
        for j in 0..len {
            for i in 0..inner {
                let s = (o * s_len + src_start + j) * inner + i;
                let d = (o * d_len + dst_start + j) * inner + i;
                dst.data_mut()[d] = src.data()[s];
            }
        }
    }
}

/// Visit each 1-D lane along `axis` as a list of flat indices.
fn for_each_lane(shape: &[usize], axis: usize, mut f: impl FnMut(&[usize])) {
    let outer: usize = shape[..axis].iter().product();
    let len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let mut lane = vec![0usize; len];
    for o in 0..outer {
        for i in 0..inner {
            for (j, slot) in lane.iter_mut().enumerate() {
                *slot = (o * len + j) * inner + i;
            }
            f(&lane);
        }
    }
}

const DIV_EPS: f64 = 1e-12;

impl Var {
    pub fn add(&self, other: &Var) -> Result<Var> {
        self.tape.check_same(other)?;
        let value = self.value().broadcast_zip(&other.value(), |a, b| a + b)?;
        Ok(self.tape.push(value, Op::Add { a: self.id, b: other.id }))
    }

    pub fn sub(&self, other: &Var) -> Result<Var> {
        self.tape.check_same(other)?;
        let value = self.value().broadcast_zip(&other.value(), |a, b| a - b)?;
        Ok(self.tape.push(value, Op::Sub { a: self.id, b: other.id }))
    }

    pub fn mul(&self, other: &Var) -> Result<Var> {
        self.tape.check_same(other)?;
        let value = self.value().broadcast_zip(&other.value(), |a, b| a * b)?;
        Ok(self.tape.push(value, Op::Mul { a: self.id, b: other.id }))
    }

    /// Elementwise division. Rejects denominators with magnitude below 1e-12,
    /// reporting how many positions are degenerate and where the first one is.
    pub fn div(&self, other: &Var) -> Result<Var> {
        self.tape.check_same(other)?;
        let b = other.value();
        let mut count = 0;
        let mut first = 0;
        for (i, &v) in b.data().iter().enumerate() {
            if v.abs() < DIV_EPS {
                if count == 0 {
                    first = i;
                }
                count += 1;
            }
        }
        if count > 0 {
            return Err(Error::DivisionByZero { count, first });
        }
        let value = self.value().broadcast_zip(&b, |a, b| a / b)?;
        Ok(self.tape.push(value, Op::Div { a: self.id, b: other.id }))
    }

    /// Elementwise minimum; on ties the gradient routes to `self`.
    pub fn min_elem(&self, other: &Var) -> Result<Var> {
        self.tape.check_same(other)?;
        let value = self.value().broadcast_zip(&other.value(), f64::min)?;
        Ok(self.tape.push(value, Op::MinElem { a: self.id, b: other.id }))
    }

    pub fn neg(&self) -> Var {
        self.tape.push(self.value().map(|v| -v), Op::Neg { a: self.id })
    }

    pub fn add_scalar(&self, c: f64) -> Var {
        self.tape.push(self.value().map(|v| v + c), Op::AddScalar { a: self.id })
    }

    pub fn mul_scalar(&self, c: f64) -> Var {
        self.tape.push(self.value().map(|v| v * c), Op::MulScalar { a: self.id, c })
    }

    pub fn powi(&self, n: i32) -> Var {
        self.tape.push(self.value().map(|v| v.powi(n)), Op::Powi { a: self.id, n })
    }

    pub fn matmul(&self, other: &Var) -> Result<Var> {
        self.tape.check_same(other)?;
        let value = self.value().matmul(&other.value())?;
        Ok(self.tape.push(value, Op::Matmul { a: self.id, b: other.id }))
    }

    pub fn relu(&self) -> Var {
        self.tape.push(self.value().map(|v| v.max(0.0)), Op::Relu { a: self.id })
    }

    pub fn leaky_relu(&self, slope: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&slope) {
            return Err(Error::invalid_argument(format!(
                "leaky_relu slope must be in (0,1), got {slope}"
            )));
        }
        Ok(self.tape.push(
            self.value().map(|v| if v > 0.0 { v } else { v * slope }),
            Op::LeakyRelu { a: self.id, slope },
        ))
    }

    pub fn sigmoid(&self) -> Var {
        self.tape.push(self.value().map(sigmoid_scalar), Op::Sigmoid { a: self.id })
    }

    pub fn tanh(&self) -> Result<Var> {
        Ok(self.tape.push(self.value().map(f64::tanh), Op::Tanh { a: self.id }))
    }

    pub fn exp(&self) -> Var {
        self.tape.push(self.value().map(f64::exp), Op::Exp { a: self.id })
    }

    pub fn ln(&self) -> Var {
        self.tape.push(self.value().map(f64::ln), Op::Ln { a: self.id })
    }

    pub fn sqrt(&self) -> Var {
        self.tape.push(self.value().map(f64::sqrt), Op::Sqrt { a: self.id })
    }

    pub fn abs(&self) -> Var {
        self.tape.push(self.value().map(f64::abs), Op::Abs { a: self.id })
    }

    /// Clamp to `[lo, hi]`; gradient is 1 inside the range, 0 where clamped.
    pub fn clamp(&self, lo: f64, hi: f64) -> Var {
        self.tape.push(
            self.value().map(|v| v.clamp(lo, hi)),
            Op::Clamp { a: self.id, lo, hi },
        )
    }

    pub fn sum_all(&self) -> Result<Var> {
        Ok(self
            .tape
            .push(Tensor::scalar(self.value().sum_all()), Op::SumAll { a: self.id }))
    }

    pub fn mean_all(&self) -> Result<Var> {
        Ok(self
            .tape
            .push(Tensor::scalar(self.value().mean_all()), Op::MeanAll { a: self.id }))
    }

    pub fn sum_axis(&self, axis: usize) -> Result<Var> {
        let value = self.value().sum_axis(axis)?;
        Ok(self.tape.push(value, Op::SumAxis { a: self.id, axis }))
    }

    pub fn mean_axis(&self, axis: usize) -> Result<Var> {
        let value = self.value().mean_axis(axis)?;
        Ok(self.tape.push(value, Op::MeanAxis { a: self.id, axis }))
    }

    /// Max over all elements; gradient routes to the lowest-index argmax.
    pub fn max_all(&self) -> Result<Var> {
        let (m, argmax) = self.value().max_all();
        Ok(self.tape.push(Tensor::scalar(m), Op::MaxAll { a: self.id, argmax }))
    }

    /// Max along an axis; per-slice ties route to the lowest index.
    pub fn max_axis(&self, axis: usize) -> Result<Var> {
        let (value, argmax) = self.value().max_axis(axis)?;
        Ok(self.tape.push(value, Op::MaxAxis { a: self.id, argmax }))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var> {
        let value = self.value().reshape(shape)?;
        Ok(self.tape.push(value, Op::Reshape { a: self.id }))
    }

    pub fn transpose(&self) -> Result<Var> {
        let value = self.value().transpose()?;
        Ok(self.tape.push(value, Op::Transpose { a: self.id }))
    }

    /// Slice `len` entries starting at `start` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape();
        if axis >= shape.len() {
            return Err(Error::InvalidAxis { axis, rank: shape.len() });
        }
        if start + len > shape[axis] {
            return Err(Error::invalid_argument(format!(
                "narrow {start}+{len} exceeds axis {axis} of extent {}",
                shape[axis]
            )));
        }
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        let src = self.value();
        let mut value = Tensor::zeros(&out_shape);
        // reuse the block copier by viewing src -> value
        {
            let outer: usize = shape[..axis].iter().product();
            let inner: usize = shape[axis + 1..].iter().product();
            for o in 0..outer {
                for j in 0..len {
                    for i in 0..inner {
                        let s = (o * shape[axis] + start + j) * inner + i;
                        let d = (o * len + j) * inner + i;
                        value.data_mut()[d] = src.data()[s];
                    }
                }
            }
        }
        Ok(self.tape.push(value, Op::Narrow { a: self.id, axis, start }))
    }

    /// Row-major gather along axis 0 (also used as embedding lookup).
    pub fn select_rows(&self, indices: &[usize]) -> Result<Var> {
        let shape = self.shape();
        if shape.is_empty() {
            return Err(Error::invalid_argument("select_rows requires rank >= 1"));
        }
        let rows = shape[0];
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(Error::invalid_argument(format!(
                "row index {bad} out of range for extent {rows}"
            )));
        }
        let inner: usize = shape[1..].iter().product();
        let mut out_shape = shape.clone();
        out_shape[0] = indices.len();
        let src = self.value();
        let mut value = Tensor::zeros(&out_shape);
        for (r, &i) in indices.iter().enumerate() {
            value.data_mut()[r * inner..(r + 1) * inner]
                .copy_from_slice(&src.data()[i * inner..(i + 1) * inner]);
        }
        Ok(self.tape.push(
            value,
            Op::SelectRows { a: self.id, indices: indices.to_vec() },
        ))
    }

    /// Numerically stable softmax along `axis` (max subtraction).
    pub fn softmax(&self, axis: usize) -> Result<Var> {
        let x = self.value();
        if axis >= x.rank() {
            return Err(Error::InvalidAxis { axis, rank: x.rank() });
        }
        let mut value = Tensor::zeros(x.shape());
        for_each_lane(x.shape(), axis, |lane| {
            let m = lane.iter().map(|&i| x.data()[i]).fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for &i in lane {
                let e = (x.data()[i] - m).exp();
                value.data_mut()[i] = e;
                z += e;
            }
            for &i in lane {
                value.data_mut()[i] /= z;
            }
        });
        Ok(self.tape.push(value, Op::Softmax { a: self.id, axis }))
    }

    /// Numerically stable log-softmax along `axis`.
    pub fn log_softmax(&self, axis: usize) -> Result<Var> {
        let x = self.value();
        if axis >= x.rank() {
            return Err(Error::InvalidAxis { axis, rank: x.rank() });
        }
        let mut value = Tensor::zeros(x.shape());
        for_each_lane(x.shape(), axis, |lane| {
            let m = lane.iter().map(|&i| x.data()[i]).fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = lane.iter().map(|&i| (x.data()[i] - m).exp()).sum();
            let lz = m + z.ln();
            for &i in lane {
                value.data_mut()[i] = x.data()[i] - lz;
            }
        });
        Ok(self.tape.push(value, Op::LogSoftmax { a: self.id, axis }))
    }

    /// Replace this var's value while keeping its gradient path: the
    /// backward pass treats the operation as the identity. The replacement
    /// must have the same shape.
    pub fn straight_through_to(&self, value: Tensor) -> Result<Var> {
        if value.shape() != self.shape() {
            return Err(Error::ShapeMismatch {
                context: "straight_through",
                lhs: self.shape(),
                rhs: value.shape().to_vec(),
            });
        }
        Ok(self.tape.push(value, Op::StraightThrough { a: self.id }))
    }

    /// Inverted dropout: in training, each element is zeroed with
    /// probability `p` and survivors are scaled by `1/(1-p)`; in inference
    /// the input passes through unchanged.
    pub fn dropout(&self, p: f64, training: bool, rng: &mut SplitRng) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::invalid_argument(format!(
                "dropout probability must be in [0,1), got {p}"
            )));
        }
        if !training || p == 0.0 {
            return Ok(self.clone());
        }
        let keep = 1.0 - p;
        let scale_mask: Vec<f64> = (0..self.value().numel())
            .map(|_| if rng.uniform() < p { 0.0 } else { 1.0 / keep })
            .collect();
        let mut value = self.value();
        for (v, m) in value.data_mut().iter_mut().zip(&scale_mask) {
            *v *= m;
        }
        Ok(self.tape.push(value, Op::Dropout { a: self.id, scale_mask }))
    }
}

fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    /// Concatenate along `axis`. All parts must agree on the other axes.
    pub fn concat(&self, parts: &[Var], axis: usize) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::invalid_argument("concat of zero tensors"));
        }
        let first = parts[0].shape();
        if axis >= first.len() {
            return Err(Error::InvalidAxis { axis, rank: first.len() });
        }
        let mut total = 0;
        for p in parts {
            self.check_same(p)?;
            let s = p.shape();
            let mut expect = s.clone();
            expect[axis] = first[axis];
            let mut got = first.clone();
            got[axis] = first[axis];
            if expect.len() != got.len()
                || expect
                    .iter()
                    .zip(&got)
                    .enumerate()
                    .any(|(d, (a, b))| d != axis && a != b)
            {
                return Err(Error::ShapeMismatch { context: "concat", lhs: first, rhs: s });
            }
            total += s[axis];
        }
        let mut out_shape = first.clone();
        out_shape[axis] = total;
        let mut value = Tensor::zeros(&out_shape);
        let mut offset = 0;
        for p in parts {
            let v = p.value();
            let len = v.shape()[axis];
            copy_block(&v, &mut value, axis, 0, offset, len);
            offset += len;
        }
        Ok(self.push(
            value,
            Op::Concat { parts: parts.iter().map(|p| p.id).collect(), axis },
        ))
    }

    /// Row-wise softmax of 2-D `scores` restricted to `allowed` positions
    /// (row-major `[rows*cols]`). Disallowed positions receive a -1e9
    /// additive penalty before the softmax and are zeroed exactly after it.
    /// A row with no allowed position is an error.
    pub fn masked_softmax(&self, scores: &Var, allowed: &[bool]) -> Result<Var> {
        self.check_same(scores)?;
        let x = scores.value();
        if x.rank() != 2 || allowed.len() != x.numel() {
            return Err(Error::invalid_argument(format!(
                "masked_softmax expects 2-D scores matching the mask, got {:?} with {} mask entries",
                x.shape(),
                allowed.len()
            )));
        }
        let (rows, cols) = (x.shape()[0], x.shape()[1]);
        let mut value = Tensor::zeros(x.shape());
        for r in 0..rows {
            let base = r * cols;
            if !allowed[base..base + cols].iter().any(|&a| a) {
                return Err(Error::FullyMaskedRow { row: r });
            }
            let penalized: Vec<f64> = (0..cols)
                .map(|c| x.data()[base + c] + if allowed[base + c] { 0.0 } else { -1e9 })
                .collect();
            let m = penalized.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = penalized.iter().map(|v| (v - m).exp()).collect();
            let z: f64 = exps.iter().sum();
            for c in 0..cols {
                value.data_mut()[base + c] = if allowed[base + c] { exps[c] / z } else { 0.0 };
            }
        }
        Ok(self.push(
            value,
            Op::MaskedSoftmax { a: scores.id, allowed: allowed.to_vec() },
        ))
    }

    /// Mean cross-entropy between logit rows and class indices, computed in
    /// the fused log-sum-exp form (natural log).
    pub fn cross_entropy_logits(&self, logits: &Var, targets: &[usize]) -> Result<Var> {
        self.check_same(logits)?;
        let x = logits.value();
        if x.rank() != 2 || x.shape()[0] != targets.len() {
            return Err(Error::invalid_argument(format!(
                "cross_entropy_logits expects [batch x classes] logits with one target per row, got {:?} and {} targets",
                x.shape(),
                targets.len()
            )));
        }
        let cols = x.shape()[1];
        if let Some(&bad) = targets.iter().find(|&&t| t >= cols) {
            return Err(Error::invalid_argument(format!(
                "class index {bad} out of range for {cols} classes"
            )));
        }
        let mut total = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            let row = x.row(r);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
            total += m + z.ln() - row[t];
        }
        let value = Tensor::scalar(total / targets.len() as f64);
        Ok(self.push(
            value,
            Op::CrossEntropyLogits { logits: logits.id, targets: targets.to_vec() },
        ))
    }

    /// 2-D convolution over a `[C_in, H, W]` input with `[C_out, C_in/groups, k, k]`
    /// filters. Output spatial extent is `floor((n + 2*padding - k)/stride) + 1`.
    pub fn conv2d(
        &self,
        x: &Var,
        w: &Var,
        b: Option<&Var>,
        stride: usize,
        padding: usize,
        groups: usize,
    ) -> Result<Var> {
        self.check_same(x)?;
        self.check_same(w)?;
        if let Some(b) = b {
            self.check_same(b)?;
        }
        let xv = x.value();
        let wv = w.value();
        let value = conv2d_forward(&xv, &wv, b.map(|b| b.value()).as_ref(), stride, padding, groups)?;
        Ok(self.push(
            value,
            Op::Conv2d {
                x: x.id,
                w: w.id,
                b: b.map(|b| b.id),
                stride,
                padding,
                groups,
            },
        ))
    }

    /// Max pooling over non-overlapping or strided square windows of a
    /// `[C, H, W]` input. Gradient routes to the argmax of each window,
    /// ties broken toward the lowest flat index.
    pub fn max_pool2d(&self, x: &Var, window: usize, stride: usize) -> Result<Var> {
        self.check_same(x)?;
        let xv = x.value();
        if xv.rank() != 3 {
            return Err(Error::invalid_argument(format!(
                "max_pool2d expects [C, H, W], got {:?}",
                xv.shape()
            )));
        }
        let (c, h, wd) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
        if window == 0 || stride == 0 {
            return Err(Error::invalid_argument("window and stride must be positive"));
        }
        if window > h || window > wd {
            return Err(Error::invalid_argument(format!(
                "pooling window {window} larger than input {h}x{wd}"
            )));
        }
        let oh = (h - window) / stride + 1;
        let ow = (wd - window) / stride + 1;
        let mut value = Tensor::zeros(&[c, oh, ow]);
        let mut argmax = vec![0usize; c * oh * ow];
        for ch in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut arg = 0;
                    for ky in 0..window {
                        for kx in 0..window {
                            let iy = oy * stride + ky;
                            let ix = ox * stride + kx;
                            let src = (ch * h + iy) * wd + ix;
                            if xv.data()[src] > best {
                                best = xv.data()[src];
                                arg = src;
                            }
                        }
                    }
                    let dst = (ch * oh + oy) * ow + ox;
                    value.data_mut()[dst] = best;
                    argmax[dst] = arg;
                }
            }
        }
        Ok(self.push(value, Op::MaxPool2d { a: x.id, argmax }))
    }
}

pub(crate) fn conv2d_forward(
    x: &Tensor,
    w: &Tensor,
    b: Option<&Tensor>,
    stride: usize,
    padding: usize,
    groups: usize,
) -> Result<Tensor> {
    if x.rank() != 3 || w.rank() != 4 {
        return Err(Error::ShapeMismatch {
            context: "conv2d",
            lhs: x.shape().to_vec(),
            rhs: w.shape().to_vec(),
        });
    }
    let (c_in, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (c_out, c_in_g, k, k2) = (w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]);
    if k != k2 {
        return Err(Error::invalid_argument("conv2d expects square kernels"));
    }
    if stride == 0 {
        return Err(Error::invalid_argument("stride must be positive"));
    }
    if groups == 0 || c_in % groups != 0 || c_out % groups != 0 || c_in_g != c_in / groups {
        return Err(Error::invalid_argument(format!(
            "groups {groups} must divide input channels {c_in} and output channels {c_out}, with filter depth {c_in_g}"
        )));
    }
    if h + 2 * padding < k || wd + 2 * padding < k {
        return Err(Error::invalid_argument(format!(
            "padded input {}x{} smaller than kernel {k}",
            h + 2 * padding,
            wd + 2 * padding
        )));
    }
    if let Some(b) = b {
        if b.shape() != [c_out] {
            return Err(Error::ShapeMismatch {
                context: "conv2d bias",
                lhs: b.shape().to_vec(),
                rhs: vec![c_out],
            });
        }
    }
    let oh = (h + 2 * padding - k) / stride + 1;
    let ow = (wd + 2 * padding - k) / stride + 1;
    let per_group_out = c_out / groups;
    let mut out = Tensor::zeros(&[c_out, oh, ow]);
    for oc in 0..c_out {
        let g = oc / per_group_out;
        let bias = b.map_or(0.0, |b| b.data()[oc]);
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bias;
                for icl in 0..c_in_g {
                    let ic = g * c_in_g + icl;
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * stride + ky) as isize - padding as isize;
                            let ix = (ox * stride + kx) as isize - padding as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                continue;
                            }
                            let xs = (ic * h + iy as usize) * wd + ix as usize;
                            let ws = ((oc * c_in_g + icl) * k + ky) * k + kx;
                            acc += x.data()[xs] * w.data()[ws];
                        }
                    }
                }
                out.data_mut()[(oc * oh + oy) * ow + ox] = acc;
            }
        }
    }
    Ok(out)
}

fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    grad: &Tensor,
    stride: usize,
    padding: usize,
    groups: usize,
) -> (Tensor, Tensor, Tensor) {
    let (h, wd) = (x.shape()[1], x.shape()[2]);
    let (c_out, c_in_g, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    let (oh, ow) = (grad.shape()[1], grad.shape()[2]);
    let per_group_out = c_out / groups;
    let mut gx = Tensor::zeros(x.shape());
    let mut gw = Tensor::zeros(w.shape());
    let mut gb = Tensor::zeros(&[c_out]);
    for oc in 0..c_out {
        let g = oc / per_group_out;
        for oy in 0..oh {
            for ox in 0..ow {
                let go = grad.data()[(oc * oh + oy) * ow + ox];
                gb.data_mut()[oc] += go;
                for icl in 0..c_in_g {
                    let ic = g * c_in_g + icl;
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * stride + ky) as isize - padding as isize;
                            let ix = (ox * stride + kx) as isize - padding as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                continue;
                            }
                            let xs = (ic * h + iy as usize) * wd + ix as usize;
                            let ws = ((oc * c_in_g + icl) * k + ky) * k + kx;
                            gx.data_mut()[xs] += go * w.data()[ws];
                            gw.data_mut()[ws] += go * x.data()[xs];
                        }
                    }
                }
            }
        }
    }
    (gx, gw, gb)
}

