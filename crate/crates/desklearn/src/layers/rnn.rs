//! Vanilla recurrent cell with tanh state update.

use crate::autograd::{Param, Tape, Var};
use crate::error::{Error, Result};
use crate::rng::SplitRng;
use crate::tensor::Tensor;

use super::{linear::linear_forward, Init};

/// `h_t = tanh(W_x x_t + W_h h_{t-1} + b)`.
pub struct RnnCell {
    pub w_x: Param,
    pub w_h: Param,
    pub b: Param,
}

impl RnnCell {
    pub fn new(input_dim: usize, hidden_dim: usize, init: Init, rng: &mut SplitRng) -> Self {
        Self {
            w_x: Param::new("rnn.w_x", init.tensor(&[hidden_dim, input_dim], input_dim, hidden_dim, rng)),
            w_h: Param::new("rnn.w_h", init.tensor(&[hidden_dim, hidden_dim], hidden_dim, hidden_dim, rng)),
            b: Param::new("rnn.b", Tensor::zeros(&[hidden_dim])),
        }
    }

    pub fn from_tensors(w_x: Tensor, w_h: Tensor, b: Tensor) -> Result<Self> {
        let h = w_x.shape().first().copied().unwrap_or(0);
        if w_x.rank() != 2 || w_h.shape() != [h, h] || b.shape() != [h] {
            return Err(Error::ShapeMismatch {
                context: "rnn cell",
                lhs: w_x.shape().to_vec(),
                rhs: w_h.shape().to_vec(),
            });
        }
        Ok(Self {
            w_x: Param::new("rnn.w_x", w_x),
            w_h: Param::new("rnn.w_h", w_h),
            b: Param::new("rnn.b", b),
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_h.shape()[0]
    }

    pub fn params(&self) -> Vec<Param> {
        vec![self.w_x.clone(), self.w_h.clone(), self.b.clone()]
    }

    pub fn step(&self, tape: &Tape, h_prev: &Var, x_t: &Var) -> Result<Var> {
        let w_x = tape.param(&self.w_x);
        let w_h = tape.param(&self.w_h);
        let b = tape.param(&self.b);
        rnn_step(&w_x, &w_h, &b, h_prev, x_t)
    }

    /// Unroll across a sequence on one tape, so `backward` runs
    /// backpropagation through time. With `truncate = Some(k)`, the hidden
    /// state is detached every `k` steps, cutting gradient flow there.
    pub fn unroll(
        &self,
        tape: &Tape,
        h0: &Var,
        inputs: &[Tensor],
        truncate: Option<usize>,
    ) -> Result<Vec<Var>> {
        if truncate == Some(0) {
            return Err(Error::invalid_argument("truncation length must be positive"));
        }
        let mut states = Vec::with_capacity(inputs.len());
        let mut h = h0.clone();
        for (t, x) in inputs.iter().enumerate() {
            if let Some(k) = truncate {
                if t > 0 && t % k == 0 {
                    h = h.detach();
                }
            }
            h = self.step(tape, &h, &tape.leaf(x.clone()))?;
            states.push(h.clone());
        }
        Ok(states)
    }
}

/// One recurrent update from explicit weight vars.
pub fn rnn_step(w_x: &Var, w_h: &Var, b: &Var, h_prev: &Var, x_t: &Var) -> Result<Var> {
    let hidden = w_h.shape()[0];
    let from_x = linear_forward(w_x, b, x_t)?;
    let from_h = w_h.matmul(&h_prev.reshape(&[hidden, 1])?)?.reshape(&[hidden])?;
    from_x.add(&from_h)?.tanh()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::grad_check;

    #[test]
    fn zero_weights_give_zero_state() {
        let cell = RnnCell::from_tensors(Tensor::zeros(&[2, 3]), Tensor::zeros(&[2, 2]), Tensor::zeros(&[2]))
            .unwrap();
        let tape = Tape::new();
        let h = tape.leaf(Tensor::from_slice(&[0.5, -0.5]));
        let x = tape.leaf(Tensor::from_slice(&[1.0, 2.0, 3.0]));
        let h1 = cell.step(&tape, &h, &x).unwrap().value();
        assert_eq!(h1.data(), &[0.0, 0.0]);
    }

    #[test]
    fn zero_recurrent_weights_ignore_history() {
        let mut rng = SplitRng::new(8);
        let cell = RnnCell::new(3, 2, Init::Xavier, &mut rng);
        cell.w_h.set_value(Tensor::zeros(&[2, 2]));
        let tape = Tape::new();
        let x = tape.leaf(Tensor::from_slice(&[1.0, 2.0, 3.0]));
        let a = cell.step(&tape, &tape.leaf(Tensor::from_slice(&[9.0, -9.0])), &x).unwrap();
        let b = cell.step(&tape, &tape.leaf(Tensor::zeros(&[2])), &x).unwrap();
        assert_eq!(a.value().data(), b.value().data());
    }

    #[test]
    fn two_step_unroll_matches_finite_differences() {
        let mut rng = SplitRng::new(12);
        let wx0 = Tensor::rand_uniform(&[2, 3], -0.7, 0.7, &mut rng);
        let wh0 = Tensor::rand_uniform(&[2, 2], -0.7, 0.7, &mut rng);
        let b0 = Tensor::rand_uniform(&[2], -0.3, 0.3, &mut rng);
        let x1 = Tensor::rand_uniform(&[3], -1.0, 1.0, &mut rng);
        let x2 = Tensor::rand_uniform(&[3], -1.0, 1.0, &mut rng);
        let report = grad_check(
            |tape, vars| {
                let h0 = tape.leaf(Tensor::zeros(&[2]));
                let h1 = rnn_step(&vars[0], &vars[1], &vars[2], &h0, &vars[3])?;
                let h2 = rnn_step(&vars[0], &vars[1], &vars[2], &h1, &vars[4])?;
                h2.powi(2).sum_all()
            },
            &[wx0, wh0, b0, x1, x2],
            1e-5,
        )
        .unwrap();
        assert!(report.within(1e-4), "{report:?}");
    }

    #[test]
    fn truncation_detaches_history() {
        let mut rng = SplitRng::new(3);
        let cell = RnnCell::new(1, 1, Init::Xavier, &mut rng);
        let tape = Tape::new();
        let h0 = tape.leaf(Tensor::zeros(&[1]));
        let xs: Vec<Tensor> = (0..4).map(|i| Tensor::from_slice(&[i as f64 * 0.1])).collect();
        let states = cell.unroll(&tape, &h0, &xs, Some(2)).unwrap();
        let loss = states.last().unwrap().powi(2).sum_all().unwrap();
        tape.backward(&loss).unwrap();
        // the first input precedes the cut at t=2, so it gets no gradient path
        assert_eq!(states.len(), 4);
        assert!(h0.grad().is_none());
    }
}
