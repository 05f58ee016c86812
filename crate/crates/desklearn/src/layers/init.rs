//! Weight initialization.

use crate::rng::SplitRng;
use crate::tensor::Tensor;

/// Uniform fan-based initialization schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`. The default.
    Xavier,
    /// Uniform in `±sqrt(6 / fan_in)`, for ReLU stacks.
    He,
}

impl Init {
    pub fn bound(self, fan_in: usize, fan_out: usize) -> f64 {
        match self {
            Init::Xavier => (6.0 / (fan_in + fan_out) as f64).sqrt(),
            Init::He => (6.0 / fan_in as f64).sqrt(),
        }
    }

    pub fn tensor(self, shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut SplitRng) -> Tensor {
        let b = self.bound(fan_in, fan_out);
        Tensor::rand_uniform(shape, -b, b, rng)
    }
}
