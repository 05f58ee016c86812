//! A 2-D variational autoencoder on the two-moons mixture: the negated
//! ELBO falls epoch over epoch, and the closed-form Gaussian KL matches
//! its definition.
//!
//! ```sh
//! cargo run -p desklearn --example vae_2d
//! ```

use desklearn::autograd::Tape;
use desklearn::experiments::{run_vae2d, ExperimentConfig, Vae2dOptions};
use desklearn::generative::{
    corrupt_gaussian, vae_kl, vae_reparameterize, VaeMoments, DEFAULT_CORRUPTION_SIGMA,
};
use desklearn::rng::SplitRng;
use desklearn::tensor::Tensor;

fn main() -> desklearn::Result<()> {
    // denoising-style corruption: the input a DAE would reconstruct from
    let mut rng = SplitRng::new(1);
    let clean = Tensor::from_slice(&[1.0, -1.0]);
    let noisy = corrupt_gaussian(&clean, DEFAULT_CORRUPTION_SIGMA, &mut rng)?;
    println!("clean {:?} -> corrupted {:?}\n", clean.data(), noisy.data());

    // the reparameterization trick: z = mu + sigma * eps
    let tape = Tape::new();
    let moments = VaeMoments::new(
        tape.leaf(Tensor::from_slice(&[1.0, -1.0])),
        tape.leaf(Tensor::from_slice(&[0.0, 0.0])),
    )?;
    let z = vae_reparameterize(&moments, &Tensor::from_slice(&[0.5, 0.5]))?;
    println!("z = mu + sigma*eps = {:?}", z.value().data());
    println!(
        "KL(N(1,1) || N(0,1)) per dim = {}",
        vae_kl(&moments.mu, &moments.logvar)?.item()? / 2.0
    );

    let config = ExperimentConfig::new("vae2d", 0);
    let run = run_vae2d(&config, &Vae2dOptions::default())?;
    println!("\nepoch ELBO losses:");
    for (e, v) in run.series("elbo_loss").iter().enumerate() {
        println!("  epoch {e:2}: {v:.4}");
    }
    println!(
        "monotone decrease: {}",
        run.summary()["monotone_decrease"]
    );
    Ok(())
}
