//! Batch and layer normalization.

use std::cell::RefCell;

use crate::autograd::{Param, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Normalize each feature using statistics across the batch; keeps
    /// running averages for inference.
    Batch,
    /// Normalize each sample across its features; batch-independent.
    Layer,
}

/// Standardize `[batch, features]` rows per feature using batch statistics,
/// then scale and shift. Returns the output together with the batch mean and
/// (biased) variance used.
pub fn batch_norm_train(x: &Var, gamma: &Var, beta: &Var, eps: f64) -> Result<(Var, Tensor, Tensor)> {
    let mu = x.mean_axis(0)?;
    let centered = x.sub(&mu)?;
    let var = centered.powi(2).mean_axis(0)?;
    let y = centered.div(&var.add_scalar(eps).sqrt())?.mul(gamma)?.add(beta)?;
    Ok((y, mu.value(), var.value()))
}

/// Standardize rows per feature with fixed statistics (inference path).
pub fn batch_norm_infer(
    x: &Var,
    gamma: &Var,
    beta: &Var,
    mean: &Tensor,
    var: &Tensor,
    eps: f64,
) -> Result<Var> {
    let tape = x.tape();
    let mu = tape.constant(mean.clone());
    let denom = tape.constant(var.map(|v| (v + eps).sqrt()));
    x.sub(&mu)?.div(&denom)?.mul(gamma)?.add(beta)
}

/// Standardize each row across its features, then scale and shift.
pub fn layer_norm(x: &Var, gamma: &Var, beta: &Var, eps: f64) -> Result<Var> {
    let rows = x.shape()[0];
    let mu = x.mean_axis(1)?.reshape(&[rows, 1])?;
    let centered = x.sub(&mu)?;
    let var = centered.powi(2).mean_axis(1)?.reshape(&[rows, 1])?;
    centered.div(&var.add_scalar(eps).sqrt())?.mul(gamma)?.add(beta)
}

/// `(x - mean) / sqrt(var + eps) * gamma + beta`.
///
/// Inputs are `[batch, features]` rows (a bare `[features]` vector works in
/// layer mode). Batch mode in training requires at least two rows and
/// updates running statistics with momentum 0.1; inference uses the running
/// values.
pub struct NormLayer {
    pub gamma: Param,
    pub beta: Param,
    pub eps: f64,
    pub mode: NormMode,
    pub momentum: f64,
    running: RefCell<(Tensor, Tensor)>,
}

impl NormLayer {
    pub fn new(features: usize, mode: NormMode) -> Self {
        Self {
            gamma: Param::new("norm.gamma", Tensor::ones(&[features])),
            beta: Param::new("norm.beta", Tensor::zeros(&[features])),
            eps: 1e-5,
            mode,
            momentum: 0.1,
            running: RefCell::new((Tensor::zeros(&[features]), Tensor::ones(&[features]))),
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.shape()[0]
    }

    pub fn params(&self) -> Vec<Param> {
        vec![self.gamma.clone(), self.beta.clone()]
    }

    pub fn running_stats(&self) -> (Tensor, Tensor) {
        self.running.borrow().clone()
    }

    pub fn forward(&self, tape: &Tape, x: &Var, training: bool) -> Result<Var> {
        let shape = x.shape();
        let x2 = match (shape.as_slice(), self.mode) {
            ([f], NormMode::Layer) if *f == self.features() => x.reshape(&[1, *f])?,
            ([_, f], _) if *f == self.features() => x.clone(),
            _ => {
                return Err(Error::ShapeMismatch {
                    context: "normalize",
                    lhs: shape,
                    rhs: vec![self.features()],
                })
            }
        };
        let gamma = tape.param(&self.gamma);
        let beta = tape.param(&self.beta);

        let scaled = match self.mode {
            NormMode::Batch => {
                if training {
                    if x2.shape()[0] < 2 {
                        return Err(Error::invalid_argument(
                            "batch normalization in training needs a batch of at least 2",
                        ));
                    }
                    let (y, mu, var) = batch_norm_train(&x2, &gamma, &beta, self.eps)?;
                    self.update_running(&mu, &var);
                    y
                } else {
                    let (rm, rv) = self.running_stats();
                    batch_norm_infer(&x2, &gamma, &beta, &rm, &rv, self.eps)?
                }
            }
            NormMode::Layer => layer_norm(&x2, &gamma, &beta, self.eps)?,
        };
        if shape.len() == 1 {
            scaled.reshape(&[self.features()])
        } else {
            Ok(scaled)
        }
    }

    fn update_running(&self, mu: &Tensor, var: &Tensor) {
        let mut running = self.running.borrow_mut();
        let m = self.momentum;
        running.0 = running.0.broadcast_zip(mu, |r, b| (1.0 - m) * r + m * b).expect("shape");
        running.1 = running.1.broadcast_zip(var, |r, b| (1.0 - m) * r + m * b).expect("shape");
    }
}
