//! Variational-autoencoder pieces: reparameterized sampling, the closed-form
//! Gaussian KL, and the (negated) evidence lower bound.

use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::rng::SplitRng;
use crate::tensor::Tensor;

/// Encoder outputs for one latent: mean and log-variance vars of equal shape.
pub struct VaeMoments {
    pub mu: Var,
    pub logvar: Var,
}

impl VaeMoments {
    pub fn new(mu: Var, logvar: Var) -> Result<Self> {
        if mu.shape() != logvar.shape() {
            return Err(Error::ShapeMismatch {
                context: "vae moments",
                lhs: mu.shape(),
                rhs: logvar.shape(),
            });
        }
        Ok(Self { mu, logvar })
    }

    /// `sigma = exp(logvar / 2)`.
    pub fn sigma(&self) -> Var {
        self.logvar.mul_scalar(0.5).exp()
    }
}

/// `z = mu + exp(logvar/2) ⊙ eps`. The noise enters as a constant, so
/// gradients flow to `mu` and `logvar` but not to `eps`.
pub fn vae_reparameterize(moments: &VaeMoments, eps: &Tensor) -> Result<Var> {
    if eps.shape() != moments.mu.shape() {
        return Err(Error::ShapeMismatch {
            context: "reparameterize",
            lhs: moments.mu.shape(),
            rhs: eps.shape().to_vec(),
        });
    }
    let eps = moments.mu.tape().constant(eps.clone());
    moments.mu.add(&moments.sigma().mul(&eps)?)
}

/// Reparameterize with freshly drawn standard-normal noise; returns the
/// latent and the noise that produced it.
pub fn vae_reparameterize_with(moments: &VaeMoments, rng: &mut SplitRng) -> Result<(Var, Tensor)> {
    let eps = Tensor::randn(&moments.mu.shape(), rng);
    Ok((vae_reparameterize(moments, &eps)?, eps))
}

/// Closed-form KL divergence from `N(mu, exp(logvar))` to the standard
/// normal: `0.5 * sum(exp(logvar) + mu^2 - 1 - logvar)`. Non-negative, zero
/// exactly at `mu = 0, logvar = 0`.
pub fn vae_kl(mu: &Var, logvar: &Var) -> Result<Var> {
    if mu.shape() != logvar.shape() {
        return Err(Error::ShapeMismatch {
            context: "vae_kl",
            lhs: mu.shape(),
            rhs: logvar.shape(),
        });
    }
    Ok(logvar
        .exp()
        .add(&mu.powi(2))?
        .add_scalar(-1.0)
        .sub(logvar)?
        .sum_all()?
        .mul_scalar(0.5))
}

/// Negated ELBO for minimization: `recon_loss + kl_weight * vae_kl`.
pub fn vae_elbo_loss(recon_loss: &Var, mu: &Var, logvar: &Var, kl_weight: f64) -> Result<Var> {
    if kl_weight < 0.0 {
        return Err(Error::invalid_argument(format!(
            "kl_weight must be non-negative, got {kl_weight}"
        )));
    }
    recon_loss.add(&vae_kl(mu, logvar)?.mul_scalar(kl_weight))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::{grad_check, Tape};
    use crate::rng::SplitRng;
    use approx::assert_relative_eq;

    #[test]
    fn zero_noise_returns_the_mean() {
        let tape = Tape::new();
        let m = VaeMoments::new(
            tape.leaf(Tensor::from_slice(&[1.0, -2.0])),
            tape.leaf(Tensor::from_slice(&[0.3, 0.7])),
        )
        .unwrap();
        let z = vae_reparameterize(&m, &Tensor::zeros(&[2])).unwrap();
        assert_eq!(z.value().data(), &[1.0, -2.0]);
    }

    #[test]
    fn unit_sigma_adds_noise_directly() {
        let tape = Tape::new();
        let m = VaeMoments::new(
            tape.leaf(Tensor::from_slice(&[1.0, 2.0])),
            tape.leaf(Tensor::zeros(&[2])),
        )
        .unwrap();
        let z = vae_reparameterize(&m, &Tensor::from_slice(&[0.5, -0.5])).unwrap();
        assert_eq!(z.value().data(), &[1.5, 1.5]);
    }

    #[test]
    fn gradient_of_z_wrt_mu_is_identity() {
        let eps = Tensor::from_slice(&[0.3, -0.9]);
        let report = grad_check(
            |_, vars| {
                let m = VaeMoments::new(vars[0].clone(), vars[1].clone())?;
                vae_reparameterize(&m, &eps)?.sum_all()
            },
            &[Tensor::from_slice(&[0.1, 0.2]), Tensor::from_slice(&[-0.4, 0.8])],
            1e-5,
        )
        .unwrap();
        assert!(report.within(1e-4), "{report:?}");
        // d(sum z)/d mu = ones exactly
        let tape = Tape::new();
        let mu = tape.leaf(Tensor::from_slice(&[0.1, 0.2]));
        let lv = tape.leaf(Tensor::from_slice(&[-0.4, 0.8]));
        let m = VaeMoments::new(mu.clone(), lv).unwrap();
        let z = vae_reparameterize(&m, &eps).unwrap();
        tape.backward(&z.sum_all().unwrap()).unwrap();
        assert_eq!(mu.grad().unwrap().data(), &[1.0, 1.0]);
    }

    #[test]
    fn kl_anchor_values() {
        let tape = Tape::new();
        let zero = tape.leaf(Tensor::from_slice(&[0.0]));
        assert_eq!(vae_kl(&zero, &zero).unwrap().item().unwrap(), 0.0);

        let one = tape.leaf(Tensor::from_slice(&[1.0]));
        assert_relative_eq!(
            vae_kl(&one, &zero).unwrap().item().unwrap(),
            0.5,
            max_relative = 1e-15
        );
    }

    #[test]
    fn kl_non_negative_on_random_moments() {
        let mut rng = SplitRng::new(13);
        let tape = Tape::new();
        for _ in 0..200 {
            let mu = tape.leaf(Tensor::rand_uniform(&[3], -2.0, 2.0, &mut rng));
            let lv = tape.leaf(Tensor::rand_uniform(&[3], -2.0, 2.0, &mut rng));
            assert!(vae_kl(&mu, &lv).unwrap().item().unwrap() >= 0.0);
        }
    }

    #[test]
    fn kl_matches_monte_carlo_estimate() {
        // estimate E_q[log q(z) - log p(z)] by sampling z = mu + sigma*eps
        let mut rng = SplitRng::new(99);
        let (mu, logvar): (f64, f64) = (0.7, -0.5);
        let sigma = (0.5 * logvar).exp();
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let z = mu + sigma * rng.normal();
            // log q(z) - log p(z) with q = N(mu, sigma^2), p = N(0,1)
            let lq = -0.5 * ((z - mu) / sigma).powi(2) - sigma.ln();
            let lp = -0.5 * z * z;
            let v = lq - lp;
            sum += v;
            sum_sq += v * v;
        }
        let mc = sum / n as f64;
        let se = ((sum_sq / n as f64 - mc * mc) / n as f64).sqrt();

        let tape = Tape::new();
        let kl = vae_kl(
            &tape.leaf(Tensor::from_slice(&[mu])),
            &tape.leaf(Tensor::from_slice(&[logvar])),
        )
        .unwrap()
        .item()
        .unwrap();
        assert!((kl - mc).abs() < 3.0 * se, "closed form {kl}, MC {mc} ± {se}");
    }

    #[test]
    fn elbo_is_additive() {
        let tape = Tape::new();
        let recon = tape.leaf(Tensor::scalar(2.0));
        let mu = tape.leaf(Tensor::from_slice(&[1.0]));
        let lv = tape.leaf(Tensor::from_slice(&[0.0]));
        // kl_weight = 0 -> recon only
        assert_eq!(
            vae_elbo_loss(&recon, &mu, &lv, 0.0).unwrap().item().unwrap(),
            2.0
        );
        // perfect reconstruction at the prior -> 0
        let zero_recon = tape.leaf(Tensor::scalar(0.0));
        let zero = tape.leaf(Tensor::from_slice(&[0.0]));
        assert_eq!(
            vae_elbo_loss(&zero_recon, &zero, &zero, 1.0).unwrap().item().unwrap(),
            0.0
        );
        // additivity
        let total = vae_elbo_loss(&recon, &mu, &lv, 2.0).unwrap().item().unwrap();
        let kl = vae_kl(&mu, &lv).unwrap().item().unwrap();
        assert_relative_eq!(total, 2.0 + 2.0 * kl, max_relative = 1e-15);
        assert!(vae_elbo_loss(&recon, &mu, &lv, -1.0).is_err());
    }
}
