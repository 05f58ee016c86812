//! 2-D denoising diffusion: train a noise predictor and sample with both
//! ancestral (DDPM) and deterministic (DDIM) updates.

use crate::autograd::{Param, Tape, Var};
use crate::error::Result;
use crate::generative::{ddim_sample, ddpm_loss, ddpm_sample, q_sample, two_moons, write_points_csv, NoiseSchedule};
use crate::layers::{Init, LinearLayer};
use crate::optim::Optimizer;
use crate::rng::SplitRng;
use crate::tensor::Tensor;

use super::{ExperimentConfig, ExperimentRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffusionDataset {
    /// A point mass at the origin.
    Origin,
    /// The two-moons mixture.
    Moons,
}

#[derive(Debug, Clone)]
pub struct Ddpm2dOptions {
    pub dataset: DiffusionDataset,
    pub timesteps: usize,
    pub steps: usize,
    pub batch: usize,
    pub hidden: usize,
    pub lr: f64,
    pub n_samples: usize,
}

impl Default for Ddpm2dOptions {
    fn default() -> Self {
        Self {
            dataset: DiffusionDataset::Origin,
            timesteps: 50,
            steps: 1200,
            batch: 64,
            hidden: 32,
            lr: 2e-3,
            n_samples: 500,
        }
    }
}

/// Noise predictor: a tanh MLP on `[x_0, x_1, t/T]` rows.
struct NoiseMlp {
    l1: LinearLayer,
    l2: LinearLayer,
    l3: LinearLayer,
    timesteps: usize,
}

impl NoiseMlp {
    fn new(hidden: usize, timesteps: usize, rng: &mut SplitRng) -> Self {
        Self {
            l1: LinearLayer::new(3, hidden, Init::Xavier, rng),
            l2: LinearLayer::new(hidden, hidden, Init::Xavier, rng),
            l3: LinearLayer::new(hidden, 2, Init::Xavier, rng),
            timesteps,
        }
    }

    fn params(&self) -> Vec<Param> {
        [&self.l1, &self.l2, &self.l3].iter().flat_map(|l| l.params()).collect()
    }

    fn forward(&self, tape: &Tape, rows: &Var) -> Result<Var> {
        let h = self.l1.forward(tape, rows)?.tanh()?;
        let h = self.l2.forward(tape, &h)?.tanh()?;
        self.l3.forward(tape, &h)
    }

    /// Plain-tensor prediction for the samplers.
    fn predict(&self, x: &Tensor, t: usize) -> Result<Tensor> {
        let tape = Tape::new();
        let row = Tensor::new(
            &[1, 3],
            vec![x.data()[0], x.data()[1], t as f64 / self.timesteps as f64],
        )?;
        self.forward(&tape, &tape.leaf(row))?.value().reshape(&[2])
    }
}

fn draw_x0(dataset: DiffusionDataset, moons: &Tensor, rng: &mut SplitRng) -> [f64; 2] {
    match dataset {
        DiffusionDataset::Origin => [0.0, 0.0],
        DiffusionDataset::Moons => {
            let row = moons.row(rng.below(moons.shape()[0]));
            [row[0], row[1]]
        }
    }
}

/// Train the noise predictor on the chosen dataset, then draw ancestral
/// samples (and one DDIM sample over a 10-step subset for comparison).
pub fn run_ddpm2d(config: &ExperimentConfig, opts: &Ddpm2dOptions) -> Result<ExperimentRun> {
    let mut rng = SplitRng::new(config.seed);
    let mut sample_rng = rng.split();
    let schedule = NoiseSchedule::linear(opts.timesteps)?;
    let moons = two_moons(512, 0.05, &mut rng);
    let model = NoiseMlp::new(opts.hidden, opts.timesteps, &mut rng);
    let params = model.params();
    let mut opt = Optimizer::adam(opts.lr)?;

    let mut run = ExperimentRun::new();
    let mut final_loss = f64::NAN;
    for step in 0..opts.steps {
        let mut inputs = Vec::with_capacity(opts.batch * 3);
        let mut targets = Vec::with_capacity(opts.batch * 2);
        for _ in 0..opts.batch {
            let x0 = draw_x0(opts.dataset, &moons, &mut rng);
            let t = 1 + rng.below(opts.timesteps);
            let eps = Tensor::randn(&[2], &mut rng);
            let x_t = q_sample(&Tensor::from_slice(&x0), t, &eps, &schedule)?;
            inputs.extend_from_slice(&[
                x_t.data()[0],
                x_t.data()[1],
                t as f64 / opts.timesteps as f64,
            ]);
            targets.extend_from_slice(eps.data());
        }
        let tape = Tape::new();
        let rows = tape.leaf(Tensor::new(&[opts.batch, 3], inputs)?);
        let eps_true = tape.leaf(Tensor::new(&[opts.batch, 2], targets)?);
        let pred = model.forward(&tape, &rows)?;
        let loss = ddpm_loss(&eps_true, &pred)?;
        final_loss = loss.item()?;
        if step % 20 == 0 {
            run.log(step as u64, "loss", final_loss);
        }
        tape.backward(&loss)?;
        opt.step_params(&params)?;
    }

    // ancestral samples
    let mut predictor = |x: &Tensor, t: usize| model.predict(x, t);
    let mut norms = 0.0;
    let mut samples = Vec::with_capacity(opts.n_samples);
    for _ in 0..opts.n_samples {
        let s = ddpm_sample(&mut predictor, &schedule, &[2], &mut sample_rng)?;
        norms += s.l2_norm();
        samples.push(s.into_data());
    }
    let mean_norm = norms / opts.n_samples as f64;

    // deterministic DDIM over a 10-step subset
    let stride = (opts.timesteps / 10).max(1);
    let subset: Vec<usize> = (1..=opts.timesteps).rev().step_by(stride).collect();
    let start = Tensor::randn(&[2], &mut sample_rng);
    let ddim = ddim_sample(&mut predictor, &schedule, &subset, start)?;

    run.set("final_loss", final_loss);
    run.set("mean_sample_norm", mean_norm);
    run.set("ddim_steps", subset.len() as u64);
    run.set("ddim_sample_norm", ddim.l2_norm());
    run.set("seed", config.seed);

    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir)?;
        let flat: Vec<f64> = samples.into_iter().flatten().collect();
        let pts = Tensor::new(&[opts.n_samples, 2], flat)?;
        write_points_csv(&pts, dir.join("samples.csv"))?;
    }
    run.finish(config)
}
