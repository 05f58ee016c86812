//! Fully connected layers and low-rank adapters.

use crate::autograd::{Param, Tape, Var};
use crate::error::{Error, Result};
use crate::rng::SplitRng;
use crate::tensor::Tensor;

use super::Init;

/// Affine map `W x + b` with `W: [out x in]`, `b: [out]`.
pub struct LinearLayer {
    pub w: Param,
    pub b: Param,
}

impl LinearLayer {
    pub fn new(in_dim: usize, out_dim: usize, init: Init, rng: &mut SplitRng) -> Self {
        Self {
            w: Param::new("linear.w", init.tensor(&[out_dim, in_dim], in_dim, out_dim, rng)),
            b: Param::new("linear.b", Tensor::zeros(&[out_dim])),
        }
    }

    pub fn from_tensors(w: Tensor, b: Tensor) -> Result<Self> {
        if w.rank() != 2 || b.rank() != 1 || b.shape()[0] != w.shape()[0] {
            return Err(Error::ShapeMismatch {
                context: "linear layer",
                lhs: w.shape().to_vec(),
                rhs: b.shape().to_vec(),
            });
        }
        Ok(Self { w: Param::new("linear.w", w), b: Param::new("linear.b", b) })
    }

    pub fn in_dim(&self) -> usize {
        self.w.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn params(&self) -> Vec<Param> {
        vec![self.w.clone(), self.b.clone()]
    }

    pub fn set_trainable(&self, trainable: bool) {
        self.w.set_trainable(trainable);
        self.b.set_trainable(trainable);
    }

    /// Apply to a single input vector `[in]` or a batch of rows `[n x in]`.
    pub fn forward(&self, tape: &Tape, x: &Var) -> Result<Var> {
        let w = tape.param(&self.w);
        let b = tape.param(&self.b);
        linear_forward(&w, &b, x)
    }
}

/// `W x + b` for an input vector `[in]` or batch of rows `[n x in]`.
pub fn linear_forward(w: &Var, b: &Var, x: &Var) -> Result<Var> {
    let (out_dim, in_dim) = {
        let s = w.shape();
        if s.len() != 2 {
            return Err(Error::invalid_argument(format!("weight must be 2-D, got {s:?}")));
        }
        (s[0], s[1])
    };
    match x.shape().as_slice() {
        [d] if *d == in_dim => {
            let col = x.reshape(&[*d, 1])?;
            w.matmul(&col)?.reshape(&[out_dim])?.add(b)
        }
        [_, d] if *d == in_dim => x.matmul(&w.transpose()?)?.add(b),
        other => Err(Error::ShapeMismatch {
            context: "linear forward",
            lhs: other.to_vec(),
            rhs: w.shape(),
        }),
    }
}

/// Low-rank adapter: a trainable correction `scale * B (A x)` added to a
/// frozen base layer's output.
pub struct LoraAdapter {
    pub a: Param,
    pub b: Param,
    pub rank: usize,
    pub scale: f64,
}

impl LoraAdapter {
    /// `A: [rank x in]` starts random, `B: [out x rank]` starts at zero, so a
    /// fresh adapter leaves the base layer's behavior unchanged.
    pub fn new(in_dim: usize, out_dim: usize, rank: usize, scale: f64, rng: &mut SplitRng) -> Result<Self> {
        if rank == 0 || rank >= in_dim.min(out_dim) {
            return Err(Error::invalid_argument(format!(
                "adapter rank {rank} must be in 1..min({in_dim}, {out_dim})"
            )));
        }
        Ok(Self {
            a: Param::new("lora.a", Init::Xavier.tensor(&[rank, in_dim], in_dim, rank, rng)),
            b: Param::new("lora.b", Tensor::zeros(&[out_dim, rank])),
            rank,
            scale,
        })
    }

    pub fn from_tensors(a: Tensor, b: Tensor, scale: f64) -> Result<Self> {
        if a.rank() != 2 || b.rank() != 2 || a.shape()[0] != b.shape()[1] {
            return Err(Error::ShapeMismatch {
                context: "lora adapter",
                lhs: a.shape().to_vec(),
                rhs: b.shape().to_vec(),
            });
        }
        let rank = a.shape()[0];
        let (in_dim, out_dim) = (a.shape()[1], b.shape()[0]);
        if rank >= in_dim.min(out_dim) {
            return Err(Error::invalid_argument(format!(
                "adapter rank {rank} must be below min({in_dim}, {out_dim})"
            )));
        }
        Ok(Self { a: Param::new("lora.a", a), b: Param::new("lora.b", b), rank, scale })
    }

    pub fn params(&self) -> Vec<Param> {
        vec![self.a.clone(), self.b.clone()]
    }
}

/// Base layer plus adapter: `W x + b + scale * B (A x)`.
///
/// Fine-tuning trains only the adapter; freeze the base with
/// [`LinearLayer::set_trainable`] and hand the optimizer
/// [`LoraAdapter::params`].
pub fn lora_forward(tape: &Tape, base: &LinearLayer, adapter: &LoraAdapter, x: &Var) -> Result<Var> {
    if adapter.a.shape()[1] != base.in_dim() || adapter.b.shape()[0] != base.out_dim() {
        return Err(Error::ShapeMismatch {
            context: "lora forward",
            lhs: adapter.a.shape(),
            rhs: base.w.shape(),
        });
    }
    let y = base.forward(tape, x)?;
    let a = tape.param(&adapter.a);
    let b = tape.param(&adapter.b);
    let corr = match x.shape().as_slice() {
        [d] => {
            let col = x.reshape(&[*d, 1])?;
            b.matmul(&a.matmul(&col)?)?.reshape(&[base.out_dim()])?
        }
        _ => x.matmul(&a.transpose()?)?.matmul(&b.transpose()?)?,
    };
    y.add(&corr.mul_scalar(adapter.scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::grad_check;
    use approx::assert_relative_eq;

    #[test]
    fn identity_and_constant_layers() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::from_slice(&[1.5, -2.0]));

        let id = LinearLayer::from_tensors(Tensor::eye(2), Tensor::zeros(&[2])).unwrap();
        assert_eq!(id.forward(&tape, &x).unwrap().value().data(), &[1.5, -2.0]);

        let constant =
            LinearLayer::from_tensors(Tensor::zeros(&[2, 2]), Tensor::from_slice(&[7.0, 7.0])).unwrap();
        assert_eq!(constant.forward(&tape, &x).unwrap().value().data(), &[7.0, 7.0]);
    }

    #[test]
    fn hand_case() {
        // W=[[1,2]], b=[3], x=[4,5] -> [17]
        let layer = LinearLayer::from_tensors(
            Tensor::new(&[1, 2], vec![1.0, 2.0]).unwrap(),
            Tensor::from_slice(&[3.0]),
        )
        .unwrap();
        let tape = Tape::new();
        let x = tape.leaf(Tensor::from_slice(&[4.0, 5.0]));
        assert_eq!(layer.forward(&tape, &x).unwrap().value().data(), &[17.0]);
    }

    #[test]
    fn batch_rows_match_single_vectors() {
        let mut rng = SplitRng::new(5);
        let layer = LinearLayer::new(3, 2, Init::Xavier, &mut rng);
        let tape = Tape::new();
        let rows = Tensor::from_rows(&[vec![0.1, 0.2, 0.3], vec![-1.0, 0.5, 2.0]]).unwrap();
        let batch = layer.forward(&tape, &tape.leaf(rows.clone())).unwrap().value();
        for r in 0..2 {
            let single = layer
                .forward(&tape, &tape.leaf(Tensor::from_slice(rows.row(r))))
                .unwrap()
                .value();
            for c in 0..2 {
                assert_relative_eq!(batch.row(r)[c], single.data()[c], max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn rejects_wrong_input_length() {
        let mut rng = SplitRng::new(0);
        let layer = LinearLayer::new(3, 2, Init::Xavier, &mut rng);
        let tape = Tape::new();
        let x = tape.leaf(Tensor::from_slice(&[1.0, 2.0]));
        assert!(layer.forward(&tape, &x).is_err());
    }

    #[test]
    fn two_linear_layers_collapse_to_one() {
        // L2(L1(x)) == (W2 W1) x + (W2 b1 + b2) within 1e-12
        let mut rng = SplitRng::new(42);
        for _ in 0..10 {
            let l1 = LinearLayer::new(4, 3, Init::Xavier, &mut rng);
            let l2 = LinearLayer::new(3, 5, Init::Xavier, &mut rng);
            let w = l2.w.value().matmul(&l1.w.value()).unwrap();
            let b_col = l2
                .w
                .value()
                .matmul(&l1.b.value().reshape(&[3, 1]).unwrap())
                .unwrap()
                .reshape(&[5])
                .unwrap();
            let b = b_col.broadcast_zip(&l2.b.value(), |x, y| x + y).unwrap();
            let collapsed = LinearLayer::from_tensors(w, b).unwrap();

            let tape = Tape::new();
            let x = tape.leaf(Tensor::rand_uniform(&[4], -2.0, 2.0, &mut rng));
            let stacked = l2.forward(&tape, &l1.forward(&tape, &x).unwrap()).unwrap();
            let single = collapsed.forward(&tape, &x).unwrap();
            assert!(stacked.value().max_abs_diff(&single.value()) < 1e-12);
        }
    }

    #[test]
    fn gradient_check_linear() {
        let mut rng = SplitRng::new(9);
        for _ in 0..5 {
            let w0 = Tensor::rand_uniform(&[3, 4], -1.0, 1.0, &mut rng);
            let b0 = Tensor::rand_uniform(&[3], -1.0, 1.0, &mut rng);
            let x0 = Tensor::rand_uniform(&[4], -2.0, 2.0, &mut rng);
            let report = grad_check(
                |_, vars| linear_forward(&vars[0], &vars[1], &vars[2])?.powi(2).sum_all(),
                &[w0, b0, x0],
                1e-5,
            )
            .unwrap();
            assert!(report.within(1e-4), "{report:?}");
        }
    }

    #[test]
    fn lora_is_inert_when_b_zero_or_scale_zero() {
        let mut rng = SplitRng::new(2);
        let base = LinearLayer::new(4, 3, Init::Xavier, &mut rng);
        let fresh = LoraAdapter::new(4, 3, 2, 1.0, &mut rng).unwrap();
        let tape = Tape::new();
        let x = tape.leaf(Tensor::rand_uniform(&[4], -1.0, 1.0, &mut rng));
        let plain = base.forward(&tape, &x).unwrap().value();
        let adapted = lora_forward(&tape, &base, &fresh, &x).unwrap().value();
        assert_eq!(plain.data(), adapted.data());

        let mut nonzero = LoraAdapter::new(4, 3, 2, 0.0, &mut rng).unwrap();
        nonzero.b.set_value(Tensor::ones(&[3, 2]));
        nonzero.scale = 0.0;
        let adapted = lora_forward(&tape, &base, &nonzero, &x).unwrap().value();
        assert_eq!(plain.data(), adapted.data());
    }

    #[test]
    fn lora_rank_one_outer_product_correction() {
        // A = [1, 2], B = [1; -1] (rank 1): correction = scale * B A x
        let base =
            LinearLayer::from_tensors(Tensor::eye(2), Tensor::zeros(&[2])).unwrap();
        let adapter = LoraAdapter::from_tensors(
            Tensor::new(&[1, 2], vec![1.0, 2.0]).unwrap(),
            Tensor::new(&[2, 1], vec![1.0, -1.0]).unwrap(),
            0.5,
        )
        .unwrap();
        let tape = Tape::new();
        let x = tape.leaf(Tensor::from_slice(&[3.0, 4.0]));
        // Ax = 11, BAx = [11, -11], scaled = [5.5, -5.5], plus x
        let y = lora_forward(&tape, &base, &adapter, &x).unwrap().value();
        assert_eq!(y.data(), &[8.5, -1.5]);
    }

    #[test]
    fn lora_rejects_full_rank() {
        let mut rng = SplitRng::new(3);
        assert!(LoraAdapter::new(4, 3, 3, 1.0, &mut rng).is_err());
        assert!(LoraAdapter::new(4, 3, 0, 1.0, &mut rng).is_err());
    }
}
