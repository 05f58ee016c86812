//! Hopfield associative memory over bipolar states.

use crate::error::{Error, Result};
use crate::rng::SplitRng;
use crate::tensor::Tensor;

fn check_bipolar(s: &[f64]) -> Result<()> {
    if let Some(&bad) = s.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::invalid_argument(format!(
            "state entries must be +1 or -1, got {bad}"
        )));
    }
    Ok(())
}

/// Symmetric zero-diagonal weights plus a bias vector over `{-1, +1}^N`
/// states.
#[derive(Debug, Clone)]
pub struct HopfieldNet {
    w: Tensor,
    b: Tensor,
}

impl HopfieldNet {
    pub fn new(w: Tensor, b: Tensor) -> Result<Self> {
        if w.rank() != 2 || w.shape()[0] != w.shape()[1] || b.shape() != [w.shape()[0]] {
            return Err(Error::ShapeMismatch {
                context: "hopfield net",
                lhs: w.shape().to_vec(),
                rhs: b.shape().to_vec(),
            });
        }
        let n = w.shape()[0];
        for i in 0..n {
            if w.row(i)[i] != 0.0 {
                return Err(Error::invalid_argument(format!("diagonal entry {i} must be 0")));
            }
            for j in 0..i {
                if w.row(i)[j] != w.row(j)[i] {
                    return Err(Error::invalid_argument(format!(
                        "weights must be symmetric; ({i},{j}) differs"
                    )));
                }
            }
        }
        Ok(Self { w, b })
    }

    pub fn size(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn weights(&self) -> &Tensor {
        &self.w
    }

    pub fn bias(&self) -> &Tensor {
        &self.b
    }

    /// Hebbian storage: `W = (1/P) Σ_p ξ_p ξ_p^T` with a zeroed diagonal and
    /// zero bias.
    pub fn store(patterns: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = patterns.first() else {
            return Err(Error::invalid_argument("need at least one pattern"));
        };
        let n = first.len();
        let mut w = Tensor::zeros(&[n, n]);
        for p in patterns {
            if p.len() != n {
                return Err(Error::invalid_argument("patterns must share one length"));
            }
            check_bipolar(p)?;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        w.data_mut()[i * n + j] += p[i] * p[j];
                    }
                }
            }
        }
        let scale = 1.0 / patterns.len() as f64;
        for v in w.data_mut() {
            *v *= scale;
        }
        Self::new(w, Tensor::zeros(&[n]))
    }

    /// `E(s) = -1/2 Σ_ij w_ij s_i s_j + Σ_i b_i s_i`.
    pub fn energy(&self, s: &[f64]) -> Result<f64> {
        self.check_state(s)?;
        let n = self.size();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += self.w.row(i)[j] * s[i] * s[j];
            }
        }
        let linear: f64 = self.b.data().iter().zip(s).map(|(b, s)| b * s).sum();
        Ok(-0.5 * quad + linear)
    }

    fn check_state(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.size() {
            return Err(Error::invalid_argument(format!(
                "state length {} does not match network size {}",
                s.len(),
                self.size()
            )));
        }
        check_bipolar(s)
    }

    /// One asynchronous sweep in the given update order:
    /// `s_i <- sign(Σ_j w_ij s_j - b_i)` with `sign(0) = +1`.
    /// The order must visit every index exactly once.
    pub fn update_sweep(&self, s: &[f64], order: &[usize]) -> Result<Vec<f64>> {
        self.check_state(s)?;
        let n = self.size();
        let mut seen = vec![false; n];
        for &i in order {
            if i >= n || seen[i] {
                return Err(Error::invalid_argument(
                    "update order must visit every index exactly once",
                ));
            }
            seen[i] = true;
        }
        if order.len() != n {
            return Err(Error::invalid_argument(
                "update order must visit every index exactly once",
            ));
        }
        let mut state = s.to_vec();
        for &i in order {
            let field: f64 = (0..n).map(|j| self.w.row(i)[j] * state[j]).sum::<f64>()
                - self.b.data()[i];
            state[i] = if field >= 0.0 { 1.0 } else { -1.0 };
        }
        Ok(state)
    }

    /// Repeat ascending-order sweeps until the state stops changing or
    /// `max_sweeps` is reached; returns the final state.
    pub fn recall(&self, probe: &[f64], max_sweeps: usize) -> Result<Vec<f64>> {
        self.check_state(probe)?;
        let order: Vec<usize> = (0..self.size()).collect();
        let mut state = probe.to_vec();
        for _ in 0..max_sweeps {
            let next = self.update_sweep(&state, &order)?;
            if next == state {
                break;
            }
            state = next;
        }
        Ok(state)
    }
}

/// Flip `flips` distinct positions of a bipolar pattern.
pub fn corrupt_pattern(pattern: &[f64], flips: usize, rng: &mut SplitRng) -> Vec<f64> {
    let mut out = pattern.to_vec();
    let mut order: Vec<usize> = (0..pattern.len()).collect();
    rng.shuffle(&mut order);
    for &i in order.iter().take(flips) {
        out[i] = -out[i];
    }
    out
}

/// Draw a uniform random bipolar pattern.
pub fn random_pattern(n: usize, rng: &mut SplitRng) -> Vec<f64> {
    (0..n).map(|_| if rng.uniform() < 0.5 { -1.0 } else { 1.0 }).collect()
}
