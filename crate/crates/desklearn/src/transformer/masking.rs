//! Attention masks and masked-language-model corruption.

use crate::error::{Error, Result};
use crate::rng::SplitRng;

/// Boolean attention mask: `true` means the query row may attend to the key
/// column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    allowed: Vec<bool>,
    rows: usize,
    cols: usize,
}

impl Mask {
    pub fn new(rows: usize, cols: usize, allowed: Vec<bool>) -> Result<Self> {
        if allowed.len() != rows * cols {
            return Err(Error::invalid_argument(format!(
                "mask needs {rows}x{cols} entries, got {}",
                allowed.len()
            )));
        }
        Ok(Self { allowed, rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn allows(&self, row: usize, col: usize) -> bool {
        self.allowed[row * self.cols + col]
    }

    pub fn as_flat(&self) -> &[bool] {
        &self.allowed
    }

    /// Rows as 0/1 strings, e.g. `1100`.
    pub fn row_strings(&self) -> Vec<String> {
        (0..self.rows)
            .map(|r| {
                (0..self.cols)
                    .map(|c| if self.allows(r, c) { '1' } else { '0' })
                    .collect()
            })
            .collect()
    }
}

/// Lower-triangular look-ahead mask: position `i` may attend to `j <= i`.
pub fn causal_mask(n: usize) -> Result<Mask> {
    if n == 0 {
        return Err(Error::invalid_argument("causal mask needs n >= 1"));
    }
    let mut allowed = vec![false; n * n];
    for i in 0..n {
        for j in 0..=i {
            allowed[i * n + j] = true;
        }
    }
    Mask::new(n, n, allowed)
}

/// Default masking rate for masked-language-model corruption.
pub const MLM_RATE: f64 = 0.15;

/// `(position, original id)` pairs recording what was masked where.
pub type MlmTargets = Vec<(usize, usize)>;

/// Independently replace each token with `mask_id` at probability `rate`;
/// returns the corrupted ids and the `(position, original id)` targets.
pub fn mlm_mask(
    ids: &[usize],
    rate: f64,
    mask_id: usize,
    rng: &mut SplitRng,
) -> Result<(Vec<usize>, MlmTargets)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid_argument(format!("mask rate must be in [0,1), got {rate}")));
    }
    let mut masked = ids.to_vec();
    let mut targets = Vec::new();
    for (pos, slot) in masked.iter_mut().enumerate() {
        if rng.uniform() < rate {
            targets.push((pos, *slot));
            *slot = mask_id;
        }
    }
    Ok((masked, targets))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn causal_mask_matches_the_matrix() {
        let m = causal_mask(4).unwrap();
        assert_eq!(m.row_strings(), vec!["1000", "1100", "1110", "1111"]);
    }

    #[test]
    fn causal_mask_edge_cases() {
        assert!(causal_mask(0).is_err());
        let one = causal_mask(1).unwrap();
        assert_eq!(one.row_strings(), vec!["1"]);
        // row i has exactly i+1 allowed entries
        let m = causal_mask(7).unwrap();
        for i in 0..7 {
            let count = (0..7).filter(|&j| m.allows(i, j)).count();
            assert_eq!(count, i + 1);
        }
    }

    #[test]
    fn mlm_rate_zero_is_identity() {
        let mut rng = SplitRng::new(1);
        let ids = vec![3, 1, 4, 1, 5];
        let (masked, targets) = mlm_mask(&ids, 0.0, 99, &mut rng).unwrap();
        assert_eq!(masked, ids);
        assert!(targets.is_empty());
        assert!(mlm_mask(&ids, 1.0, 99, &mut rng).is_err());
    }

    #[test]
    fn mlm_targets_record_originals() {
        let mut rng = SplitRng::new(7);
        let ids: Vec<usize> = (0..50).collect();
        let (masked, targets) = mlm_mask(&ids, 0.5, 999, &mut rng).unwrap();
        for &(pos, orig) in &targets {
            assert_eq!(masked[pos], 999);
            assert_eq!(orig, ids[pos]);
        }
        for (i, &m) in masked.iter().enumerate() {
            if m != 999 {
                assert_eq!(m, ids[i]);
            }
        }
    }

    #[test]
    fn mlm_fraction_close_to_rate() {
        // Monte-Carlo: masked fraction within 3 sigma of the rate
        let mut rng = SplitRng::new(3);
        let ids: Vec<usize> = vec![0; 1000];
        let trials = 200;
        let mut total = 0usize;
        for _ in 0..trials {
            let (_, targets) = mlm_mask(&ids, MLM_RATE, 1, &mut rng).unwrap();
            total += targets.len();
        }
        let n = (ids.len() * trials) as f64;
        let frac = total as f64 / n;
        let sigma = (MLM_RATE * (1.0 - MLM_RATE) / n).sqrt();
        assert!((frac - MLM_RATE).abs() < 3.0 * sigma, "frac {frac}, sigma {sigma}");
    }
}
