//! 2-D variational autoencoder trained on a toy mixture.

use crate::autograd::{Param, Tape, Var};
use crate::error::Result;
use crate::generative::{two_moons, vae_elbo_loss, vae_reparameterize, write_points_csv, VaeMoments};
use crate::layers::{Init, LinearLayer};
use crate::losses::mse;
use crate::optim::Optimizer;
use crate::rng::SplitRng;
use crate::tensor::Tensor;

use super::{ExperimentConfig, ExperimentRun};

#[derive(Debug, Clone)]
pub struct Vae2dOptions {
    pub epochs: usize,
    pub n_points: usize,
    pub batch: usize,
    pub hidden: usize,
    pub lr: f64,
    pub kl_weight: f64,
}

impl Default for Vae2dOptions {
    fn default() -> Self {
        Self { epochs: 20, n_points: 256, batch: 32, hidden: 16, lr: 7e-4, kl_weight: 0.5 }
    }
}

struct Vae {
    enc1: LinearLayer,
    enc2: LinearLayer,
    dec1: LinearLayer,
    dec2: LinearLayer,
}

impl Vae {
    fn new(hidden: usize, rng: &mut SplitRng) -> Self {
        Self {
            enc1: LinearLayer::new(2, hidden, Init::Xavier, rng),
            enc2: LinearLayer::new(hidden, 4, Init::Xavier, rng),
            dec1: LinearLayer::new(2, hidden, Init::Xavier, rng),
            dec2: LinearLayer::new(hidden, 2, Init::Xavier, rng),
        }
    }

    fn params(&self) -> Vec<Param> {
        [&self.enc1, &self.enc2, &self.dec1, &self.dec2]
            .iter()
            .flat_map(|l| l.params())
            .collect()
    }

    fn encode(&self, tape: &Tape, x: &Var) -> Result<VaeMoments> {
        let h = self.enc1.forward(tape, x)?.tanh()?;
        let out = self.enc2.forward(tape, &h)?;
        let mu = out.narrow(1, 0, 2)?;
        let logvar = out.narrow(1, 2, 2)?;
        VaeMoments::new(mu, logvar)
    }

    fn decode(&self, tape: &Tape, z: &Var) -> Result<Var> {
        let h = self.dec1.forward(tape, z)?.tanh()?;
        self.dec2.forward(tape, &h)
    }

    fn batch_loss(&self, tape: &Tape, batch: &Tensor, kl_weight: f64, rng: &mut SplitRng) -> Result<Var> {
        let rows = batch.shape()[0] as f64;
        let x = tape.leaf(batch.clone());
        let moments = self.encode(tape, &x)?;
        let eps = Tensor::randn(&moments.mu.shape(), rng);
        let z = vae_reparameterize(&moments, &eps)?;
        let recon = self.decode(tape, &z)?;
        let recon_loss = mse(&recon, &x)?;
        // vae_kl sums over the whole batch; scale to a per-sample weight
        vae_elbo_loss(&recon_loss, &moments.mu, &moments.logvar, kl_weight / rows)
    }
}

/// Train a small VAE on a 2-D two-moons mixture, log the epoch ELBO loss
/// (evaluated on the full dataset with fixed noise, so the estimator itself
/// adds no jitter), and export reconstructed samples from the prior.
pub fn run_vae2d(config: &ExperimentConfig, opts: &Vae2dOptions) -> Result<ExperimentRun> {
    let mut rng = SplitRng::new(config.seed);
    let mut data_rng = rng.split();
    let mut noise_rng = rng.split();
    let mut eval_rng = rng.split();
    let points = two_moons(opts.n_points, 0.05, &mut data_rng);
    let eval_eps = Tensor::randn(&[opts.n_points, 2], &mut eval_rng);
    let vae = Vae::new(opts.hidden, &mut rng);
    let params = vae.params();
    let mut opt = Optimizer::adam(opts.lr)?;

    let evaluate = |vae: &Vae| -> Result<f64> {
        let tape = Tape::new();
        let x = tape.leaf(points.clone());
        let moments = vae.encode(&tape, &x)?;
        let z = vae_reparameterize(&moments, &eval_eps)?;
        let recon = vae.decode(&tape, &z)?;
        let recon_loss = mse(&recon, &x)?;
        vae_elbo_loss(
            &recon_loss,
            &moments.mu,
            &moments.logvar,
            opts.kl_weight / opts.n_points as f64,
        )?
        .item()
    };

    let mut run = ExperimentRun::new();
    let mut order: Vec<usize> = (0..opts.n_points).collect();
    let mut epoch_losses = vec![evaluate(&vae)?];
    run.log(0, "elbo_loss", epoch_losses[0]);
    for epoch in 0..opts.epochs {
        noise_rng.shuffle(&mut order);
        for chunk in order.chunks(opts.batch) {
            let rows: Vec<Vec<f64>> = chunk.iter().map(|&i| points.row(i).to_vec()).collect();
            let batch = Tensor::from_rows(&rows)?;
            let tape = Tape::new();
            let loss = vae.batch_loss(&tape, &batch, opts.kl_weight, &mut noise_rng)?;
            tape.backward(&loss)?;
            opt.step_params(&params)?;
        }
        let epoch_loss = evaluate(&vae)?;
        run.log(epoch as u64 + 1, "elbo_loss", epoch_loss);
        epoch_losses.push(epoch_loss);
    }

    let monotone = epoch_losses.windows(2).all(|w| w[1] < w[0]);
    run.set("initial_elbo_loss", epoch_losses[0]);
    run.set("final_elbo_loss", *epoch_losses.last().expect("epochs >= 1"));
    run.set("monotone_decrease", monotone);
    run.set("seed", config.seed);

    // decode prior samples for inspection
    if let Some(dir) = &config.out_dir {
        let tape = Tape::new();
        let z = tape.leaf(Tensor::randn(&[200, 2], &mut noise_rng));
        let decoded = vae.decode(&tape, &z)?.value();
        std::fs::create_dir_all(dir)?;
        write_points_csv(&decoded, dir.join("samples.csv"))?;
    }
    run.finish(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elbo_decreases_monotonically_over_epochs() {
        let config = ExperimentConfig::new("vae2d", 0);
        let run = run_vae2d(&config, &Vae2dOptions::default()).unwrap();
        let losses = run.series("elbo_loss");
        assert!(losses.len() >= 2);
        for w in losses.windows(2) {
            assert!(w[1] < w[0], "epoch loss must strictly decrease: {} -> {}", w[0], w[1]);
        }
        assert_eq!(run.value("monotone_decrease"), None); // stored as bool
        assert_eq!(run.summary()["monotone_decrease"], serde_json::Value::Bool(true));
    }
}
