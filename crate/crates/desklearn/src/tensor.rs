//! Dense n-dimensional arrays of `f64`, row-major.
//!
//! `Tensor` is the universal value type of the crate: scalars are rank-0
//! tensors, vectors rank-1, matrices rank-2, and feature maps rank-3
//! (`[channels, height, width]`). Elementwise binary operations broadcast
//! with right-aligned trailing dimensions and size-1 expansion.

use crate::error::{Error, Result};
use crate::rng::SplitRng;

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tensor{:?} {:?}", self.shape, self.data)
    }
}

pub(crate) fn numel_of(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Row-major strides for a shape.
pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

/// Broadcast two shapes (right-aligned, size-1 expansion).
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0usize; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() { 1 } else { a[i - (rank - a.len())] };
        let db = if i < rank - b.len() { 1 } else { b[i - (rank - b.len())] };
        if da != db && da != 1 && db != 1 {
            return Err(Error::ShapeMismatch {
                context: "broadcast",
                lhs: a.to_vec(),
                rhs: b.to_vec(),
            });
        }
        out[i] = da.max(db);
    }
    Ok(out)
}

/// Strides of `shape` viewed as `rank`-dimensional with 0-stride on
/// broadcast (size-1 or padded) dimensions.
fn broadcast_strides(shape: &[usize], rank: usize) -> Vec<usize> {
    let strides = strides_of(shape);
    let mut out = vec![0usize; rank];
    let offset = rank - shape.len();
    for i in 0..shape.len() {
        out[offset + i] = if shape[i] == 1 { 0 } else { strides[i] };
    }
    out
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if data.len() != numel_of(shape) {
            return Err(Error::invalid_argument(format!(
                "data length {} does not match shape {:?} (numel {})",
                data.len(),
                shape,
                numel_of(shape)
            )));
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![0.0; numel_of(shape)] }
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Self { shape: shape.to_vec(), data: vec![value; numel_of(shape)] }
    }

    pub fn scalar(value: f64) -> Self {
        Self { shape: vec![], data: vec![value] }
    }

    /// 1-D tensor from a slice.
    pub fn from_slice(values: &[f64]) -> Self {
        Self { shape: vec![values.len()], data: values.to_vec() }
    }

    /// 2-D tensor from rows. All rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::invalid_argument("ragged rows in from_rows"));
            }
            data.extend_from_slice(r);
        }
        Tensor::new(&[rows.len(), cols], data)
    }

    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn randn(shape: &[usize], rng: &mut SplitRng) -> Self {
        let data = (0..numel_of(shape)).map(|_| rng.normal()).collect();
        Self { shape: shape.to_vec(), data }
    }

    pub fn rand_uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut SplitRng) -> Self {
        let data = (0..numel_of(shape)).map(|_| rng.uniform_in(lo, hi)).collect();
        Self { shape: shape.to_vec(), data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
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

    /// The single value of a scalar (or one-element) tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() == 1 {
            Ok(self.data[0])
        } else {
            Err(Error::NonScalarLoss(self.shape.clone()))
        }
    }

    pub fn at(&self, index: &[usize]) -> f64 {
        debug_assert_eq!(index.len(), self.rank());
        let strides = strides_of(&self.shape);
        let flat: usize = index.iter().zip(&strides).map(|(i, s)| i * s).sum();
        self.data[flat]
    }

    /// Row `i` of a 2-D tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        debug_assert_eq!(self.rank(), 2);
        let cols = self.shape[1];
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Elementwise binary operation with broadcasting.
    pub fn broadcast_zip(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let out_shape = broadcast_shape(&self.shape, &other.shape)?;
        if out_shape == self.shape && out_shape == other.shape {
            let data = self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect();
            return Ok(Tensor { shape: out_shape, data });
        }
        let rank = out_shape.len();
        let a_str = broadcast_strides(&self.shape, rank);
        let b_str = broadcast_strides(&other.shape, rank);
        let out_str = strides_of(&out_shape);
        let n = numel_of(&out_shape);
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; rank];
        for flat in 0..n {
            let mut rem = flat;
            for d in 0..rank {
                idx[d] = rem / out_str[d];
                rem %= out_str[d];
            }
            let af: usize = idx.iter().zip(&a_str).map(|(i, s)| i * s).sum();
            let bf: usize = idx.iter().zip(&b_str).map(|(i, s)| i * s).sum();
            data.push(f(self.data[af], other.data[bf]));
        }
        Ok(Tensor { shape: out_shape, data })
    }

    /// Sum a gradient of `self`'s broadcasted shape back down to `target` shape.
    pub fn reduce_to_shape(&self, target: &[usize]) -> Tensor {
        if self.shape == target {
            return self.clone();
        }
        let rank = self.rank();
        let t_str = broadcast_strides(target, rank);
        let out_str = strides_of(&self.shape);
        let mut out = Tensor::zeros(target);
        let mut idx = vec![0usize; rank];
        for flat in 0..self.data.len() {
            let mut rem = flat;
            for d in 0..rank {
                idx[d] = rem / out_str[d];
                rem %= out_str[d];
            }
            let tf: usize = idx.iter().zip(&t_str).map(|(i, s)| i * s).sum();
            out.data[tf] += self.data[flat];
        }
        out
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[0] {
            return Err(Error::ShapeMismatch {
                context: "matmul",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let (m, k) = (self.shape[0], self.shape[1]);
        let n = other.shape[1];
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[p * n..(p + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += a * brow[j];
                }
            }
        }
        Ok(Tensor { shape: vec![m, n], data: out })
    }

    /// 2-D transpose.
    pub fn transpose(&self) -> Result<Tensor> {
        if self.rank() != 2 {
            return Err(Error::invalid_argument(format!(
                "transpose expects rank 2, got shape {:?}",
                self.shape
            )));
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = self.data[i * n + j];
            }
        }
        Ok(Tensor { shape: vec![n, m], data })
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel_of(shape) != self.numel() {
            return Err(Error::ShapeMismatch {
                context: "reshape",
                lhs: self.shape.clone(),
                rhs: shape.to_vec(),
            });
        }
        Ok(Tensor { shape: shape.to_vec(), data: self.data.clone() })
    }

    pub fn sum_all(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean_all(&self) -> f64 {
        self.sum_all() / self.numel() as f64
    }

    /// Max over all elements, with the flat index of the (lowest-index) argmax.
    pub fn max_all(&self) -> (f64, usize) {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > best {
                best = v;
                arg = i;
            }
        }
        (best, arg)
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.rank() {
            return Err(Error::InvalidAxis { axis, rank: self.rank() });
        }
        Ok(())
    }

    /// Shape with `axis` removed.
    fn reduced_shape(&self, axis: usize) -> Vec<usize> {
        let mut s = self.shape.clone();
        s.remove(axis);
        s
    }

    /// Iterate (outer, inner) decomposition around `axis`: for each output
    /// element, the input flat indices are `outer + j * inner_stride + inner`.
    fn axis_geometry(&self, axis: usize) -> (usize, usize, usize) {
        let outer: usize = self.shape[..axis].iter().product();
        let len = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();
        (outer, len, inner)
    }

    pub fn sum_axis(&self, axis: usize) -> Result<Tensor> {
        self.check_axis(axis)?;
        let (outer, len, inner) = self.axis_geometry(axis);
        let mut out = Tensor::zeros(&self.reduced_shape(axis));
        for o in 0..outer {
            for j in 0..len {
                for i in 0..inner {
                    out.data[o * inner + i] += self.data[(o * len + j) * inner + i];
                }
            }
        }
        Ok(out)
    }

    pub fn mean_axis(&self, axis: usize) -> Result<Tensor> {
        let len = self.shape.get(axis).copied().unwrap_or(0).max(1) as f64;
        Ok(self.sum_axis(axis)?.map(|v| v / len))
    }

    /// Max along `axis`; also returns, per output element, the input flat
    /// index of the argmax (ties broken toward the lowest index).
    pub fn max_axis(&self, axis: usize) -> Result<(Tensor, Vec<usize>)> {
        self.check_axis(axis)?;
        let (outer, len, inner) = self.axis_geometry(axis);
        let mut out = Tensor::full(&self.reduced_shape(axis), f64::NEG_INFINITY);
        let mut args = vec![0usize; out.numel()];
        for o in 0..outer {
            for j in 0..len {
                for i in 0..inner {
                    let src = (o * len + j) * inner + i;
                    let dst = o * inner + i;
                    if self.data[src] > out.data[dst] {
                        out.data[dst] = self.data[src];
                        args[dst] = src;
                    }
                }
            }
        }
        Ok((out, args))
    }

    /// Largest absolute elementwise difference; shapes must match.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}
