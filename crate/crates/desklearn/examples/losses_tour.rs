//! The loss cabinet: information-theoretic quantities, classification and
//! regression losses, distillation, contrastive, adversarial, and
//! semi-supervised signals.
//!
//! ```sh
//! cargo run -p desklearn --example losses_tour
//! ```

use desklearn::autograd::Tape;
use desklearn::losses::{
    binary_cross_entropy, clip_contrastive_loss, cross_entropy_dist, cross_entropy_loss,
    distillation_loss, entropy, entropy_min_loss, gan_losses, kl_divergence, l1, mse,
    pseudo_label, Distribution, LabeledBatch, LogBase,
};
use desklearn::tensor::Tensor;

fn main() -> desklearn::Result<()> {
    let uniform = Distribution::from_slice(&[0.25; 4])?;
    let skewed = Distribution::from_slice(&[0.7, 0.1, 0.1, 0.1])?;
    println!("H(uniform over 4) = {} bits", entropy(&uniform, LogBase::Two));
    println!("H(skewed)         = {:.4} bits", entropy(&skewed, LogBase::Two));
    println!(
        "H(uniform, skewed) = {:.4} bits  (cross-entropy >= entropy)",
        cross_entropy_dist(&uniform, &skewed, LogBase::Two)?
    );
    println!(
        "KL(uniform || skewed) = {:.4} bits",
        kl_divergence(&uniform, &skewed, LogBase::Two)?
    );

    // a confident wrong prediction is punished hard: -ln(0.001) ~ 6.9
    let p = 0.001f64;
    let batch = LabeledBatch::new(Tensor::from_rows(&[vec![p.ln(), (1.0 - p).ln()]])?, vec![0])?;
    println!("\nCE loss at true-class prob 0.001 = {:.3} nats", cross_entropy_loss(&batch)?);

    let tape = Tape::new();
    let a = tape.leaf(Tensor::from_slice(&[1.0, 3.0]));
    let b = tape.leaf(Tensor::from_slice(&[2.0, 5.0]));
    println!("\nmse([1,3],[2,5]) = {}", mse(&a, &b)?.item()?);
    println!("l1 ([1,3],[2,5]) = {}", l1(&a, &b)?.item()?);

    let targets = tape.leaf(Tensor::from_slice(&[1.0, 0.0]));
    let preds = tape.leaf(Tensor::from_slice(&[0.9, 0.2]));
    println!("bce([1,0],[.9,.2]) = {:.4}", binary_cross_entropy(&targets, &preds)?.item()?);

    let teacher = Distribution::new(Tensor::from_rows(&[vec![0.8, 0.2]])?)?;
    let student = tape.leaf(Tensor::from_rows(&[vec![0.0, 0.0]])?);
    println!(
        "\ndistillation KL(teacher || uniform student), T=1: {:.4} nats",
        distillation_loss(&teacher, &student, 1.0)?.item()?
    );

    let sims = tape.leaf(Tensor::from_rows(&[vec![10.0, 0.0], vec![0.0, 10.0]])?);
    println!("CLIP loss, sharp diagonal similarities: {:.2e}", clip_contrastive_loss(&sims)?.item()?);

    let half = tape.leaf(Tensor::from_slice(&[0.5]));
    let losses = gan_losses(&half, &half)?;
    println!(
        "\nGAN at D = 0.5 everywhere: d_loss = {:.4} (2 ln 2), g_loss = {:.4} (ln 2)",
        losses.d_loss.item()?,
        losses.g_loss.item()?
    );

    let unlabeled = tape.leaf(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.2, 0.1]])?);
    println!("entropy-minimization signal: {:.4} nats", entropy_min_loss(&unlabeled)?.item()?);
    println!("pseudo-label [0.97, 0.03] at tau 0.9: {:?}", pseudo_label(&[0.97, 0.03], 0.9)?);
    println!("pseudo-label [0.60, 0.40] at tau 0.9: {:?}", pseudo_label(&[0.6, 0.4], 0.9)?);
    Ok(())
}
