//! Denoising diffusion on 2-D points: forward noising, noise-prediction
//! training, ancestral and DDIM sampling, and classifier-free guidance
//! blending.
//!
//! ```sh
//! cargo run -p desklearn --example diffusion_2d
//! ```

use desklearn::experiments::{run_ddpm2d, Ddpm2dOptions, DiffusionDataset, ExperimentConfig};
use desklearn::generative::{cfg_blend, ddpm_forward_step, q_sample, NoiseSchedule};
use desklearn::rng::SplitRng;
use desklearn::tensor::Tensor;

fn main() -> desklearn::Result<()> {
    let mut rng = SplitRng::new(0);
    let schedule = NoiseSchedule::linear(50)?;
    println!(
        "linear schedule: beta_1 = {}, beta_T = {}, alpha_bar_T = {:.4}",
        schedule.beta(1),
        schedule.beta(50),
        schedule.alpha_bar(50)
    );

    // forward process: one step at a time, or jumped with alpha_bar
    let x0 = Tensor::from_slice(&[1.0, -1.0]);
    let eps = Tensor::randn(&[2], &mut rng);
    let x1 = ddpm_forward_step(&x0, schedule.beta(1), &eps)?;
    let x25 = q_sample(&x0, 25, &eps, &schedule)?;
    println!("x_1  = {:?}", x1.data());
    println!("x_25 = {:?} (same noise, jumped)", x25.data());

    // guidance blends conditional and unconditional predictions
    let uncond = Tensor::from_slice(&[1.0, 0.0]);
    let cond = Tensor::from_slice(&[3.0, -2.0]);
    for w in [0.0, 1.0, 2.0] {
        println!("cfg_blend w={w}: {:?}", cfg_blend(&uncond, &cond, w)?.data());
    }

    // train on a point mass at the origin; samples should land near it
    println!("\ntraining a noise predictor on a point mass at the origin...");
    let config = ExperimentConfig::new("ddpm2d", 0);
    let opts = Ddpm2dOptions { n_samples: 200, ..Default::default() };
    let run = run_ddpm2d(&config, &opts)?;
    println!("final training loss : {:.4}", run.value("final_loss").unwrap());
    println!("mean sample norm    : {:.4} (ancestral, 200 samples)", run.value("mean_sample_norm").unwrap());
    println!(
        "DDIM with {} steps  : sample norm {:.4}",
        run.value("ddim_steps").unwrap(),
        run.value("ddim_sample_norm").unwrap()
    );

    // the two-moons variant exercises a non-degenerate dataset
    let config = ExperimentConfig::new("ddpm2d", 1);
    let opts = Ddpm2dOptions {
        dataset: DiffusionDataset::Moons,
        steps: 300,
        n_samples: 20,
        ..Default::default()
    };
    let run = run_ddpm2d(&config, &opts)?;
    println!("\ntwo-moons run: final loss {:.4}", run.value("final_loss").unwrap());
    Ok(())
}
