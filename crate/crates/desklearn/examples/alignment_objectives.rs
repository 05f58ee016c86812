//! Preference-learning objectives: the pairwise reward loss, PPO clipping,
//! KL penalties, DPO, reward tilting, and a tabular DPO trainer.
//!
//! ```sh
//! cargo run -p desklearn --example alignment_objectives
//! ```

use desklearn::alignment::{
    kl_penalty, ppo_clipped_objective, reward_pairwise_loss, tilt_policy, DpoConfig, PpoConfig,
    TabularDpoTrainer,
};
use desklearn::autograd::Tape;
use desklearn::losses::Distribution;
use desklearn::tensor::Tensor;

fn main() -> desklearn::Result<()> {
    println!("pairwise reward loss -ln sigmoid(margin):");
    for margin in [-2.0, 0.0, 1.0, 4.0] {
        println!("  margin {margin:4}: {:.4}", reward_pairwise_loss(margin, 0.0));
    }

    let cfg = PpoConfig::new(0.2, 0.0)?;
    println!("\nPPO clipped surrogate at eps = 0.2:");
    for (r, a) in [(1.0, 2.0), (1.5, 1.0), (0.5, -1.0), (1.1, 1.0)] {
        let tape = Tape::new();
        let ratio = tape.leaf(Tensor::from_slice(&[r]));
        let obj = ppo_clipped_objective(&ratio, &Tensor::from_slice(&[a]), &cfg)?;
        tape.backward(&obj)?;
        println!(
            "  r = {r:3}, A = {a:4}: objective {:6.2}, d/dr = {:4}",
            obj.item()?,
            ratio.grad().unwrap().data()[0]
        );
    }

    println!(
        "\nKL penalty (mean log-ratio) for a drifted policy: {:.4}",
        kl_penalty(&[-1.0, -2.0, -0.5], &[-1.3, -2.3, -0.8])?
    );

    // reward tilting: pi* ∝ base * exp(beta R)
    let base = Distribution::from_slice(&[0.5, 0.5])?;
    let tilted = tilt_policy(&base, &[1.0, 0.0], 1.0)?;
    println!("tilt uniform by R=(1,0), beta=1: {:?}", tilted.row(0));

    // a tabular policy learns to prefer the winning actions
    let mut trainer = TabularDpoTrainer::new(4, DpoConfig::new(1.0)?, 0.5)?;
    let pairs = vec![(0usize, 1usize), (0, 2), (3, 1)];
    println!("\ntabular DPO trainer (action 0 and 3 are preferred):");
    for step in 0..=200 {
        if step % 40 == 0 {
            println!(
                "  step {step:3}: mean margin {:.4}",
                trainer.mean_margin(&pairs)
            );
        }
        if step < 200 {
            trainer.step(&pairs)?;
        }
    }
    println!("  final log-probs: {:?}", trainer.log_probs().data().iter().map(|v| (v * 1e3).round() / 1e3).collect::<Vec<_>>());
    Ok(())
}
