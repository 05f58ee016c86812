//! Denoising diffusion: the forward noising process, the noise-prediction
//! loss, ancestral (DDPM) and deterministic (DDIM) sampling, and
//! classifier-free guidance blending.

use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::losses::mse;
use crate::rng::SplitRng;
use crate::tensor::Tensor;

/// Variance schedule `beta_1..beta_T` with derived `alpha_t = 1 - beta_t`
/// and cumulative products `alpha_bar_t`. Timesteps are 1-based.
#[derive(Debug, Clone)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::invalid_argument("schedule needs at least one step"));
        }
        if let Some(&bad) = betas.iter().find(|b| !(0.0..1.0).contains(*b) || **b == 0.0) {
            return Err(Error::invalid_argument(format!(
                "betas must lie strictly inside (0, 1), got {bad}"
            )));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(betas.len());
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        Ok(Self { betas, alphas, alpha_bars })
    }

    /// Linear schedule from 1e-4 to 0.02 over `t` steps.
    pub fn linear(t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::invalid_argument("schedule needs at least one step"));
        }
        let (lo, hi) = (1e-4, 0.02);
        let betas = (0..t)
            .map(|i| {
                if t == 1 {
                    lo
                } else {
                    lo + (hi - lo) * i as f64 / (t - 1) as f64
                }
            })
            .collect();
        Self::new(betas)
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t - 1]
    }
}

/// One forward noising step: `sqrt(1 - beta_t) x_prev + sqrt(beta_t) eps`.
pub fn ddpm_forward_step(x_prev: &Tensor, beta_t: f64, eps: &Tensor) -> Result<Tensor> {
    if !(0.0..=1.0).contains(&beta_t) || beta_t == 0.0 {
        return Err(Error::invalid_argument(format!(
            "beta must lie in (0, 1], got {beta_t}"
        )));
    }
    if x_prev.shape() != eps.shape() {
        return Err(Error::ShapeMismatch {
            context: "ddpm_forward_step",
            lhs: x_prev.shape().to_vec(),
            rhs: eps.shape().to_vec(),
        });
    }
    x_prev.broadcast_zip(eps, |x, e| (1.0 - beta_t).sqrt() * x + beta_t.sqrt() * e)
}

/// Jump straight to step `t` of the forward process:
/// `sqrt(alpha_bar_t) x_0 + sqrt(1 - alpha_bar_t) eps`.
pub fn q_sample(x0: &Tensor, t: usize, eps: &Tensor, schedule: &NoiseSchedule) -> Result<Tensor> {
    if t == 0 || t > schedule.len() {
        return Err(Error::invalid_argument(format!(
            "timestep {t} outside schedule of length {}",
            schedule.len()
        )));
    }
    let ab = schedule.alpha_bar(t);
    x0.broadcast_zip(eps, |x, e| ab.sqrt() * x + (1.0 - ab).sqrt() * e)
}

/// Noise-prediction training loss: mean squared error between the true and
/// predicted noise.
pub fn ddpm_loss(eps: &Var, eps_pred: &Var) -> Result<Var> {
    mse(eps_pred, eps)
}

/// Noise predictor: `eps_theta(x_t, t)` as plain tensors.
pub type NoisePredictor<'a> = dyn FnMut(&Tensor, usize) -> Result<Tensor> + 'a;

/// Ancestral sampling: start from standard-normal `x_T` and walk
/// `t = T..1` with
/// `x_{t-1} = (x_t - beta_t / sqrt(1 - alpha_bar_t) * eps_theta) / sqrt(alpha_t) + sqrt(beta_t) z`,
/// with no noise added at the final step.
pub fn ddpm_sample(
    model: &mut NoisePredictor,
    schedule: &NoiseSchedule,
    shape: &[usize],
    rng: &mut SplitRng,
) -> Result<Tensor> {
    let mut x = Tensor::randn(shape, rng);
    for t in (1..=schedule.len()).rev() {
        let eps = model(&x, t)?;
        if eps.shape() != x.shape() {
            return Err(Error::ShapeMismatch {
                context: "noise predictor output",
                lhs: x.shape().to_vec(),
                rhs: eps.shape().to_vec(),
            });
        }
        let (beta, alpha, ab) = (schedule.beta(t), schedule.alpha(t), schedule.alpha_bar(t));
        let coef = beta / (1.0 - ab).sqrt();
        x = x.broadcast_zip(&eps, |xv, ev| (xv - coef * ev) / alpha.sqrt())?;
        if t > 1 {
            let z = Tensor::randn(shape, rng);
            x = x.broadcast_zip(&z, |xv, zv| xv + beta.sqrt() * zv)?;
        }
    }
    Ok(x)
}

/// Deterministic DDIM sampling over a descending subset of timesteps with
/// `eta = 0`: predict `x_0 = (x_t - sqrt(1 - alpha_bar_t) eps) / sqrt(alpha_bar_t)`,
/// then re-noise to the next retained step (or finish at the prediction).
pub fn ddim_sample(
    model: &mut NoisePredictor,
    schedule: &NoiseSchedule,
    steps: &[usize],
    x_start: Tensor,
) -> Result<Tensor> {
    if steps.is_empty() {
        return Err(Error::invalid_argument("ddim needs at least one timestep"));
    }
    for w in steps.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::invalid_argument("ddim steps must be strictly descending"));
        }
    }
    if steps[0] > schedule.len() || *steps.last().expect("non-empty") == 0 {
        return Err(Error::invalid_argument(format!(
            "ddim steps must lie in 1..={}",
            schedule.len()
        )));
    }
    let mut x = x_start;
    for (i, &t) in steps.iter().enumerate() {
        let eps = model(&x, t)?;
        let ab = schedule.alpha_bar(t);
        let x0_pred = x.broadcast_zip(&eps, |xv, ev| (xv - (1.0 - ab).sqrt() * ev) / ab.sqrt())?;
        match steps.get(i + 1) {
            Some(&t_next) => {
                let ab_next = schedule.alpha_bar(t_next);
                x = x0_pred
                    .broadcast_zip(&eps, |x0, ev| ab_next.sqrt() * x0 + (1.0 - ab_next).sqrt() * ev)?;
            }
            None => x = x0_pred,
        }
    }
    Ok(x)
}

/// Default classifier-free guidance weight (pure conditional prediction).
pub const DEFAULT_GUIDANCE_WEIGHT: f64 = 1.0;

/// Classifier-free guidance blend:
/// `eps_uncond + w (eps_cond - eps_uncond)`.
pub fn cfg_blend(eps_uncond: &Tensor, eps_cond: &Tensor, w: f64) -> Result<Tensor> {
    if eps_uncond.shape() != eps_cond.shape() {
        return Err(Error::ShapeMismatch {
            context: "cfg_blend",
            lhs: eps_uncond.shape().to_vec(),
            rhs: eps_cond.shape().to_vec(),
        });
    }
    eps_uncond.broadcast_zip(eps_cond, |u, c| u + w * (c - u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::Tape;
    use crate::rng::SplitRng;
    use approx::assert_relative_eq;

    #[test]
    fn schedule_validation_and_monotonicity() {
        assert!(NoiseSchedule::new(vec![]).is_err());
        assert!(NoiseSchedule::new(vec![0.0]).is_err());
        assert!(NoiseSchedule::new(vec![1.0]).is_err());
        let s = NoiseSchedule::linear(100).unwrap();
        assert_eq!(s.len(), 100);
        assert_relative_eq!(s.beta(1), 1e-4, max_relative = 1e-12);
        assert_relative_eq!(s.beta(100), 0.02, max_relative = 1e-12);
        for t in 2..=100 {
            assert!(s.alpha_bar(t) < s.alpha_bar(t - 1), "alpha_bar must strictly decrease");
        }
    }

    #[test]
    fn forward_step_limits() {
        let x = Tensor::from_slice(&[1.0, -2.0]);
        let eps = Tensor::from_slice(&[0.5, 0.5]);
        // beta -> 0: x_t -> x_prev
        let tiny = ddpm_forward_step(&x, 1e-10, &eps).unwrap();
        assert!(tiny.max_abs_diff(&x) < 1e-4);
        // beta = 1: pure noise
        let all = ddpm_forward_step(&x, 1.0, &eps).unwrap();
        assert_eq!(all.data(), eps.data());
        assert!(ddpm_forward_step(&x, 0.0, &eps).is_err());
        assert!(ddpm_forward_step(&x, 1.5, &eps).is_err());
    }

    #[test]
    fn forward_step_variance_matches_beta() {
        // x_prev = 0 makes x_t = sqrt(beta) * eps with variance beta
        let mut rng = SplitRng::new(10);
        let beta = 0.3;
        let x = Tensor::zeros(&[1]);
        let n = 20_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let eps = Tensor::randn(&[1], &mut rng);
            let v = ddpm_forward_step(&x, beta, &eps).unwrap().data()[0];
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        // variance of the sample-variance estimator ~ 2 var^2 / n
        let sigma = (2.0 * beta * beta / n as f64).sqrt();
        assert!((var - beta).abs() < 3.0 * sigma, "var {var} vs beta {beta}");
    }

    #[test]
    fn q_sample_composes_single_steps() {
        let schedule = NoiseSchedule::new(vec![0.1, 0.2, 0.3]).unwrap();
        let x0 = Tensor::from_slice(&[2.0]);
        let zero = Tensor::zeros(&[1]);
        // with eps = 0 both routes give sqrt(alpha_bar_t) x0
        let mut x = x0.clone();
        for t in 1..=3 {
            x = ddpm_forward_step(&x, schedule.beta(t), &zero).unwrap();
            let jumped = q_sample(&x0, t, &zero, &schedule).unwrap();
            assert_relative_eq!(x.data()[0], jumped.data()[0], max_relative = 1e-12);
        }
        assert!(q_sample(&x0, 0, &zero, &schedule).is_err());
        assert!(q_sample(&x0, 4, &zero, &schedule).is_err());
    }

    #[test]
    fn loss_cases() {
        let tape = Tape::new();
        let eps = tape.leaf(Tensor::from_slice(&[1.0, 2.0]));
        let zero = tape.leaf(Tensor::zeros(&[2]));
        assert_eq!(ddpm_loss(&eps, &eps).unwrap().item().unwrap(), 0.0);
        // predictor outputs zero -> mean eps^2
        assert_eq!(ddpm_loss(&eps, &zero).unwrap().item().unwrap(), 2.5);
        // hand 2-vector: eps=[1,2], pred=[2,0] -> ((1)^2 + (2)^2)/2
        let pred = tape.leaf(Tensor::from_slice(&[2.0, 0.0]));
        assert_eq!(ddpm_loss(&eps, &pred).unwrap().item().unwrap(), 2.5);
    }

    #[test]
    fn single_step_perfect_predictor_recovers_point_mass() {
        // data distribution concentrated at 0: the exact noise for x_t is
        // x_t / sqrt(1 - alpha_bar), and one reverse step lands on 0
        let schedule = NoiseSchedule::new(vec![0.5]).unwrap();
        let ab = schedule.alpha_bar(1);
        let mut model = |x: &Tensor, _t: usize| Ok(x.map(|v| v / (1.0 - ab).sqrt()));
        let mut rng = SplitRng::new(11);
        let sample = ddpm_sample(&mut model, &schedule, &[2], &mut rng).unwrap();
        assert!(sample.data().iter().all(|v| v.abs() < 1e-12), "{sample:?}");
    }

    #[test]
    fn zero_predictor_with_tiny_betas_rescales_noise() {
        let betas = vec![1e-8; 10];
        let schedule = NoiseSchedule::new(betas).unwrap();
        let mut model = |_: &Tensor, _: usize| Ok(Tensor::zeros(&[2]));
        let mut rng = SplitRng::new(12);
        let sample = ddpm_sample(&mut model, &schedule, &[2], &mut rng).unwrap();
        // reconstruct x_T from the same seed
        let mut check_rng = SplitRng::new(12);
        let x_t = Tensor::randn(&[2], &mut check_rng);
        let scale: f64 = (1..=10).map(|t| schedule.alpha(t).sqrt()).product();
        for (s, x) in sample.data().iter().zip(x_t.data()) {
            assert!((s - x / scale).abs() < 1e-2, "{s} vs {}", x / scale);
        }
    }

    #[test]
    fn ddpm_sampling_is_seed_reproducible() {
        let schedule = NoiseSchedule::linear(20).unwrap();
        let mut model = |x: &Tensor, _t: usize| Ok(x.map(|v| v * 0.1));
        let mut a = SplitRng::new(5);
        let mut b = SplitRng::new(5);
        let s1 = ddpm_sample(&mut model, &schedule, &[3], &mut a).unwrap();
        let s2 = ddpm_sample(&mut model, &schedule, &[3], &mut b).unwrap();
        for (x, y) in s1.data().iter().zip(s2.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn ddim_full_steps_recover_point_mass_mean() {
        // point mass at c: the exact predictor makes every x0 prediction c
        let c = 1.5;
        let schedule = NoiseSchedule::linear(10).unwrap();
        let mut model = |x: &Tensor, t: usize| {
            let ab = schedule.alpha_bar(t);
            Ok(x.map(|v| (v - ab.sqrt() * c) / (1.0 - ab).sqrt()))
        };
        let steps: Vec<usize> = (1..=10).rev().collect();
        let mut rng = SplitRng::new(13);
        let x_t = Tensor::randn(&[2], &mut rng);
        let out = ddim_sample(&mut model, &schedule, &steps, x_t).unwrap();
        for v in out.data() {
            assert_relative_eq!(*v, c, max_relative = 1e-9);
        }
    }

    #[test]
    fn ddim_is_deterministic_and_validates_steps() {
        let schedule = NoiseSchedule::linear(50).unwrap();
        let mut model = |x: &Tensor, _t: usize| Ok(x.map(|v| v * 0.05));
        let start = Tensor::from_slice(&[0.7, -0.2]);
        let steps = vec![50, 40, 30, 20, 10, 1];
        let a = ddim_sample(&mut model, &schedule, &steps, start.clone()).unwrap();
        let b = ddim_sample(&mut model, &schedule, &steps, start.clone()).unwrap();
        assert_eq!(a.data(), b.data());

        assert!(ddim_sample(&mut model, &schedule, &[], start.clone()).is_err());
        assert!(ddim_sample(&mut model, &schedule, &[10, 10], start.clone()).is_err());
        assert!(ddim_sample(&mut model, &schedule, &[60, 10], start.clone()).is_err());
        assert!(ddim_sample(&mut model, &schedule, &[10, 0], start).is_err());
    }

    #[test]
    fn ddim_subset_uses_fewer_model_calls() {
        let schedule = NoiseSchedule::linear(100).unwrap();
        let mut rng = SplitRng::new(14);

        let mut ddpm_calls = 0usize;
        let mut counting = |x: &Tensor, _t: usize| {
            ddpm_calls += 1;
            Ok(x.map(|v| v * 0.01))
        };
        ddpm_sample(&mut counting, &schedule, &[1], &mut rng).unwrap();
        assert_eq!(ddpm_calls, 100);

        let mut ddim_calls = 0usize;
        let mut counting = |x: &Tensor, _t: usize| {
            ddim_calls += 1;
            Ok(x.map(|v| v * 0.01))
        };
        let steps: Vec<usize> = (1..=10).map(|i| i * 10).rev().collect();
        ddim_sample(&mut counting, &schedule, &steps, Tensor::randn(&[1], &mut rng)).unwrap();
        assert_eq!(ddim_calls, 10);
        assert!(ddpm_calls >= 10 * ddim_calls);
    }

    #[test]
    fn cfg_blend_cases() {
        let u = Tensor::from_slice(&[1.0, 0.0]);
        let c = Tensor::from_slice(&[3.0, -2.0]);
        assert_eq!(cfg_blend(&u, &c, 0.0).unwrap().data(), u.data());
        assert_eq!(cfg_blend(&u, &c, 1.0).unwrap().data(), c.data());
        // w = 2 extrapolates to 2c - u
        assert_eq!(cfg_blend(&u, &c, 2.0).unwrap().data(), &[5.0, -4.0]);
        let bad = Tensor::from_slice(&[1.0]);
        assert!(cfg_blend(&u, &bad, 1.0).is_err());
    }
}
