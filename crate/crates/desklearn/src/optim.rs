//! Parameter-update rules: plain gradient descent, momentum, and Adam.
//!
//! An [`Optimizer`] owns per-parameter state buffers keyed by position, so
//! it must be fed the same parameter list, in the same order, on every step.
//! `step_params` consumes the gradients a `backward` pass wrote into
//! [`Param`]s; `step_tensors` is the raw rule for callers managing tensors
//! themselves. Updates are deterministic functions of the state.

use crate::autograd::Param;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    Sgd,
    /// Velocity accumulation `v <- beta*v + g`, update `theta <- theta - lr*v`.
    Momentum { beta: f64 },
    /// First/second-moment estimates with bias correction.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Rule {
    pub fn adam_default() -> Rule {
        Rule::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

pub struct Optimizer {
    rule: Rule,
    lr: f64,
    /// Optional global-norm gradient clipping applied before the update.
    max_grad_norm: Option<f64>,
    velocity: Vec<Tensor>,
    second_moment: Vec<Tensor>,
    step_count: u64,
}

impl Optimizer {
    pub fn new(rule: Rule, lr: f64) -> Result<Self> {
        if lr < 0.0 {
            return Err(Error::invalid_argument(format!("negative learning rate {lr}")));
        }
        match rule {
            Rule::Momentum { beta } if !(0.0..1.0).contains(&beta) => {
                return Err(Error::invalid_argument(format!("momentum beta {beta} not in [0,1)")));
            }
            Rule::Adam { beta1, beta2, eps }
                if (!(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0) => {
                    return Err(Error::invalid_argument("bad Adam constants"));
                }
            _ => {}
        }
        Ok(Self {
            rule,
            lr,
            max_grad_norm: None,
            velocity: Vec::new(),
            second_moment: Vec::new(),
            step_count: 0,
        })
    }

    pub fn sgd(lr: f64) -> Result<Self> {
        Self::new(Rule::Sgd, lr)
    }

    pub fn momentum(lr: f64, beta: f64) -> Result<Self> {
        Self::new(Rule::Momentum { beta }, lr)
    }

    pub fn adam(lr: f64) -> Result<Self> {
        Self::new(Rule::adam_default(), lr)
    }

    pub fn with_grad_clip(mut self, max_norm: f64) -> Self {
        self.max_grad_norm = Some(max_norm);
        self
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    fn ensure_buffers(&mut self, params: &[Tensor]) {
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
            self.second_moment = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        }
    }

    /// Apply one update to `params` given matching `grads`.
    pub fn step_tensors(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::invalid_argument(format!(
                "{} params but {} grads",
                params.len(),
                grads.len()
            )));
        }
        for (p, g) in params.iter().zip(grads.iter()) {
            if p.shape() != g.shape() {
                return Err(Error::ShapeMismatch {
                    context: "optimizer step",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
        }
        self.ensure_buffers(params);
        if self.velocity.len() != params.len() {
            return Err(Error::invalid_argument(
                "parameter list changed between optimizer steps",
            ));
        }

        let clipped: Option<Vec<Tensor>> = self.max_grad_norm.and_then(|max_norm| {
            let total: f64 =
                grads.iter().map(|g| g.data().iter().map(|v| v * v).sum::<f64>()).sum();
            let norm = total.sqrt();
            (norm > max_norm).then(|| {
                let scale = max_norm / norm;
                grads.iter().map(|g| g.map(|v| v * scale)).collect()
            })
        });
        let grads: &[Tensor] = clipped.as_deref().unwrap_or(grads);

        self.step_count += 1;
        match self.rule {
            Rule::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                        *pv -= self.lr * gv;
                    }
                }
            }
            Rule::Momentum { beta } => {
                for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.velocity) {
                    for ((pv, gv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
                        *vv = beta * *vv + gv;
                        *pv -= self.lr * *vv;
                    }
                }
            }
            Rule::Adam { beta1, beta2, eps } => {
                let t = self.step_count as i32;
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                for (((p, g), m), s) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.velocity)
                    .zip(&mut self.second_moment)
                {
                    for (((pv, gv), mv), sv) in
                        p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(s.data_mut())
                    {
                        *mv = beta1 * *mv + (1.0 - beta1) * gv;
                        *sv = beta2 * *sv + (1.0 - beta2) * gv * gv;
                        let m_hat = *mv / bc1;
                        let s_hat = *sv / bc2;
                        *pv -= self.lr * m_hat / (s_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }

    /// Consume the gradients accumulated on `params` (missing gradients are
    /// treated as zero) and update their values in place.
    pub fn step_params(&mut self, params: &[Param]) -> Result<()> {
        let mut values: Vec<Tensor> = params.iter().map(Param::value).collect();
        let grads: Vec<Tensor> = params
            .iter()
            .zip(&values)
            .map(|(p, v)| p.take_grad().unwrap_or_else(|| Tensor::zeros(v.shape())))
            .collect();
        self.step_tensors(&mut values, &grads)?;
        for (p, v) in params.iter().zip(values) {
            p.set_value(v);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalars(v: f64) -> Vec<Tensor> {
        vec![Tensor::scalar(v)]
    }

    #[test]
    fn sgd_substitution() {
        // theta=1, g=2, lr=0.1 -> 0.8
        let mut opt = Optimizer::sgd(0.1).unwrap();
        let mut p = scalars(1.0);
        opt.step_tensors(&mut p, &scalars(2.0)).unwrap();
        assert_eq!(p[0].item().unwrap(), 0.8);
    }

    #[test]
    fn zero_lr_and_zero_grad_leave_params_unchanged() {
        let mut opt = Optimizer::sgd(0.0).unwrap();
        let mut p = scalars(1.5);
        opt.step_tensors(&mut p, &scalars(3.0)).unwrap();
        assert_eq!(p[0].item().unwrap(), 1.5);

        let mut opt = Optimizer::sgd(0.1).unwrap();
        opt.step_tensors(&mut p, &scalars(0.0)).unwrap();
        assert_eq!(p[0].item().unwrap(), 1.5);
    }

    #[test]
    fn momentum_zero_beta_is_bit_identical_to_sgd() {
        let mut sgd = Optimizer::sgd(0.137).unwrap();
        let mut mom = Optimizer::momentum(0.137, 0.0).unwrap();
        let mut a = vec![Tensor::from_slice(&[1.0, -2.0, 0.3])];
        let mut b = a.clone();
        for g in [0.7, -0.1, 2.0] {
            let grads = vec![Tensor::from_slice(&[g, g * 0.5, -g])];
            sgd.step_tensors(&mut a, &grads).unwrap();
            mom.step_tensors(&mut b, &grads).unwrap();
        }
        for (x, y) in a[0].data().iter().zip(b[0].data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn momentum_hand_recurrence() {
        // constant g over 2 steps, beta=0.9, lr=1: total displacement g + 1.9g
        let mut opt = Optimizer::momentum(1.0, 0.9).unwrap();
        let mut p = scalars(0.0);
        let g = scalars(1.0);
        opt.step_tensors(&mut p, &g).unwrap();
        opt.step_tensors(&mut p, &g).unwrap();
        assert!((p[0].item().unwrap() - (-2.9)).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut opt = Optimizer::adam(0.01).unwrap();
        let mut p = scalars(1.0);
        opt.step_tensors(&mut p, &scalars(12.3)).unwrap();
        // bias correction cancels the magnitude up to eps
        assert!((p[0].item().unwrap() - (1.0 - 0.01)).abs() < 1e-6);

        let mut opt = Optimizer::adam(0.01).unwrap();
        let mut p = scalars(1.0);
        opt.step_tensors(&mut p, &scalars(-0.004)).unwrap();
        assert!((p[0].item().unwrap() - (1.0 + 0.01)).abs() < 1e-4);
    }

    #[test]
    fn adam_zero_grad_at_first_step_is_noop() {
        let mut opt = Optimizer::adam(0.1).unwrap();
        let mut p = scalars(2.0);
        opt.step_tensors(&mut p, &scalars(0.0)).unwrap();
        assert_eq!(p[0].item().unwrap(), 2.0);
    }

    #[test]
    fn all_rules_descend_a_quadratic() {
        // f(theta) = theta^2 from theta=1, lr=0.1, 100 steps -> |theta| < 1e-2.
        // Momentum and Adam overshoot locally, so only SGD is monotone per step;
        // all three must strictly reduce f over the run.
        for rule in [Rule::Sgd, Rule::Momentum { beta: 0.9 }, Rule::adam_default()] {
            let mut opt = Optimizer::new(rule, 0.1).unwrap();
            let mut p = scalars(1.0);
            for _ in 0..100 {
                let theta = p[0].item().unwrap();
                opt.step_tensors(&mut p, &scalars(2.0 * theta)).unwrap();
            }
            let theta = p[0].item().unwrap();
            assert!(theta.abs() < 1e-2, "{rule:?} ended at {theta}");
            assert!(theta * theta < 1.0);
        }
    }

    #[test]
    fn sgd_descends_monotonically_on_quadratic() {
        let mut opt = Optimizer::sgd(0.1).unwrap();
        let mut p = scalars(1.0);
        let mut last = f64::INFINITY;
        for _ in 0..100 {
            let theta = p[0].item().unwrap();
            assert!(theta * theta < last);
            last = theta * theta;
            opt.step_tensors(&mut p, &scalars(2.0 * theta)).unwrap();
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut opt = Optimizer::sgd(0.1).unwrap();
        let mut p = vec![Tensor::zeros(&[2])];
        let g = vec![Tensor::zeros(&[3])];
        assert!(opt.step_tensors(&mut p, &g).is_err());
    }

    #[test]
    fn grad_clip_rescales_to_max_norm() {
        let mut opt = Optimizer::sgd(1.0).unwrap().with_grad_clip(1.0);
        let mut p = vec![Tensor::from_slice(&[0.0, 0.0])];
        opt.step_tensors(&mut p, &[Tensor::from_slice(&[3.0, 4.0])]).unwrap();
        // norm 5 clipped to 1 -> step is (-0.6, -0.8)
        assert!((p[0].data()[0] + 0.6).abs() < 1e-12);
        assert!((p[0].data()[1] + 0.8).abs() < 1e-12);
    }

    #[test]
    fn step_params_consumes_gradients() {
        let p = Param::new("w", Tensor::scalar(1.0));
        p.accumulate_grad(&Tensor::scalar(2.0));
        let mut opt = Optimizer::sgd(0.1).unwrap();
        opt.step_params(std::slice::from_ref(&p)).unwrap();
        assert_eq!(p.value().item().unwrap(), 0.8);
        assert!(p.grad().is_none());
    }
}
