//! XOR separability experiment: a purely linear stack cannot fit XOR, a
//! small nonlinear MLP can.

use crate::autograd::{Param, Tape, Var};
use crate::error::Result;
use crate::layers::{Init, LinearLayer};
use crate::losses::binary_cross_entropy;
use crate::optim::Optimizer;
use crate::rng::SplitRng;
use crate::tensor::Tensor;

use super::{ExperimentConfig, ExperimentRun};

#[derive(Debug, Clone)]
pub struct XorOptions {
    pub steps: usize,
    pub lr: f64,
    pub hidden: usize,
}

impl Default for XorOptions {
    fn default() -> Self {
        Self { steps: 2000, lr: 0.05, hidden: 8 }
    }
}

fn xor_data() -> (Tensor, Tensor) {
    let inputs = Tensor::from_rows(&[
        vec![0.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0],
        vec![1.0, 1.0],
    ])
    .expect("4x2");
    let targets = Tensor::new(&[4, 1], vec![0.0, 1.0, 1.0, 0.0]).expect("4x1");
    (inputs, targets)
}

fn accuracy(probs: &Tensor, targets: &Tensor) -> f64 {
    let correct = probs
        .data()
        .iter()
        .zip(targets.data())
        .filter(|(p, t)| (**p > 0.5) == (**t > 0.5))
        .count();
    correct as f64 / targets.numel() as f64
}

struct TwoLayer {
    l1: LinearLayer,
    l2: LinearLayer,
    nonlinear: bool,
}

impl TwoLayer {
    fn forward(&self, tape: &Tape, x: &Var) -> Result<Var> {
        let mut h = self.l1.forward(tape, x)?;
        if self.nonlinear {
            h = h.tanh()?;
        }
        Ok(self.l2.forward(tape, &h)?.sigmoid())
    }

    fn params(&self) -> Vec<Param> {
        let mut p = self.l1.params();
        p.extend(self.l2.params());
        p
    }
}

fn train(
    model: &TwoLayer,
    steps: usize,
    lr: f64,
    run: &mut ExperimentRun,
    label: &str,
) -> Result<(f64, f64, Option<u64>)> {
    let (inputs, targets) = xor_data();
    let mut opt = Optimizer::adam(lr)?;
    let mut final_loss = f64::NAN;
    let mut fit_step = None;
    for step in 0..steps {
        let tape = Tape::new();
        let x = tape.leaf(inputs.clone());
        let t = tape.leaf(targets.clone());
        let probs = model.forward(&tape, &x)?;
        let loss = binary_cross_entropy(&t, &probs)?;
        final_loss = loss.item()?;
        if step % 100 == 0 {
            run.log(step as u64, format!("{label}_loss"), final_loss);
        }
        if fit_step.is_none() && accuracy(&probs.value(), &targets) == 1.0 {
            fit_step = Some(step as u64);
        }
        tape.backward(&loss)?;
        opt.step_params(&model.params())?;
    }
    let tape = Tape::new();
    let probs = model.forward(&tape, &tape.leaf(inputs))?;
    Ok((accuracy(&probs.value(), &targets), final_loss, fit_step))
}

/// Train a linear-only two-layer net and a `2-hidden-1` tanh MLP on the
/// four XOR points and report both accuracies.
pub fn run_xor(config: &ExperimentConfig, opts: &XorOptions) -> Result<ExperimentRun> {
    let mut rng = SplitRng::new(config.seed);
    let mut run = ExperimentRun::new();

    let linear = TwoLayer {
        l1: LinearLayer::new(2, 2, Init::Xavier, &mut rng),
        l2: LinearLayer::new(2, 1, Init::Xavier, &mut rng),
        nonlinear: false,
    };
    let (lin_acc, lin_loss, _) = train(&linear, opts.steps, opts.lr, &mut run, "linear")?;

    let mlp = TwoLayer {
        l1: LinearLayer::new(2, opts.hidden, Init::Xavier, &mut rng),
        l2: LinearLayer::new(opts.hidden, 1, Init::Xavier, &mut rng),
        nonlinear: true,
    };
    let (mlp_acc, mlp_loss, fit_step) = train(&mlp, opts.steps, opts.lr, &mut run, "mlp")?;

    run.set("linear_accuracy", lin_acc);
    run.set("linear_final_loss", lin_loss);
    run.set("mlp_accuracy", mlp_acc);
    run.set("mlp_final_loss", mlp_loss);
    run.set("seed", config.seed);
    if let Some(s) = fit_step {
        run.set("mlp_steps_to_fit", s);
    }
    run.finish(config)
}
