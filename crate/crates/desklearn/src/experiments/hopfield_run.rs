//! Hopfield recall experiment: store random patterns, corrupt one, and
//! measure how often settling recovers the original.

use crate::classic::{corrupt_pattern, random_pattern, HopfieldNet};
use crate::error::Result;
use crate::rng::SplitRng;

use super::{ExperimentConfig, ExperimentRun};

#[derive(Debug, Clone)]
pub struct HopfieldOptions {
    pub neurons: usize,
    pub patterns: usize,
    pub flipped_bits: usize,
    pub trials: usize,
    pub max_sweeps: usize,
}

impl Default for HopfieldOptions {
    fn default() -> Self {
        Self { neurons: 100, patterns: 10, flipped_bits: 10, trials: 200, max_sweeps: 100 }
    }
}

/// Store random bipolar patterns by the Hebbian rule and measure recall
/// success from corrupted probes.
pub fn run_hopfield(config: &ExperimentConfig, opts: &HopfieldOptions) -> Result<ExperimentRun> {
    let mut rng = SplitRng::new(config.seed);
    let patterns: Vec<Vec<f64>> =
        (0..opts.patterns).map(|_| random_pattern(opts.neurons, &mut rng)).collect();
    let net = HopfieldNet::store(&patterns)?;

    let mut run = ExperimentRun::new();
    let mut successes = 0usize;
    for trial in 0..opts.trials {
        let target = &patterns[trial % patterns.len()];
        let probe = corrupt_pattern(target, opts.flipped_bits, &mut rng);
        let energy_before = net.energy(&probe)?;
        let settled = net.recall(&probe, opts.max_sweeps)?;
        let energy_after = net.energy(&settled)?;
        debug_assert!(energy_after <= energy_before + 1e-12);
        let ok = settled == *target;
        if ok {
            successes += 1;
        }
        run.log(trial as u64, "recall_success", if ok { 1.0 } else { 0.0 });
        run.log(trial as u64, "energy_drop", energy_before - energy_after);
    }
    let rate = successes as f64 / opts.trials as f64;
    run.set("neurons", opts.neurons as u64);
    run.set("patterns", opts.patterns as u64);
    run.set("flipped_bits", opts.flipped_bits as u64);
    run.set("trials", opts.trials as u64);
    run.set("success_rate", rate);
    run.set("seed", config.seed);
    run.finish(config)
}
