//! XOR needs a nonlinearity: a stack of linear layers tops out at 3/4
//! accuracy, a small tanh MLP fits all four points.
//!
//! ```sh
//! cargo run -p desklearn --example train_xor
//! ```

use desklearn::experiments::{run_xor, ExperimentConfig, XorOptions};

fn main() -> desklearn::Result<()> {
    for seed in 0..3 {
        let config = ExperimentConfig::new("xor", seed);
        let run = run_xor(&config, &XorOptions::default())?;
        println!(
            "seed {seed}: linear accuracy {:.2}, MLP accuracy {:.2} (fit at step {:?})",
            run.value("linear_accuracy").unwrap(),
            run.value("mlp_accuracy").unwrap(),
            run.value("mlp_steps_to_fit"),
        );
    }
    Ok(())
}
