//! SGD, momentum, and Adam descending the same quadratic bowl.
//!
//! ```sh
//! cargo run -p desklearn --example optimizers
//! ```

use desklearn::optim::{Optimizer, Rule};
use desklearn::tensor::Tensor;

fn main() -> desklearn::Result<()> {
    for rule in [Rule::Sgd, Rule::Momentum { beta: 0.9 }, Rule::adam_default()] {
        let mut opt = Optimizer::new(rule, 0.1)?;
        let mut theta = vec![Tensor::scalar(1.0)];
        print!("{rule:?}\n  theta:");
        for step in 0..100 {
            if step % 20 == 0 {
                print!(" {:+.4}", theta[0].item()?);
            }
            let t = theta[0].item()?;
            opt.step_tensors(&mut theta, &[Tensor::scalar(2.0 * t)])?;
        }
        println!(" -> {:+.6} after 100 steps", theta[0].item()?);
    }
    Ok(())
}
