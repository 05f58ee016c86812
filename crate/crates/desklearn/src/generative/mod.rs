//! Generative modeling at desk scale: denoising corruption, variational
//! autoencoder pieces, vector quantization, affine-coupling flows, and
//! diffusion with DDPM/DDIM samplers.

mod diffusion;
mod flow;
mod vae;
mod vq;

pub use diffusion::{
    cfg_blend, ddim_sample, ddpm_forward_step, ddpm_loss, ddpm_sample, q_sample,
    NoisePredictor, NoiseSchedule, DEFAULT_GUIDANCE_WEIGHT,
};
pub use flow::{flow_log_prob, CouplingLayer, CouplingNet, Flow};
pub use vae::{vae_elbo_loss, vae_kl, vae_reparameterize, vae_reparameterize_with, VaeMoments};
pub use vq::{vq_quantize, Codebook, VqOutput};

use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::SplitRng;
use crate::tensor::Tensor;

/// Default corruption scale for denoising autoencoders.
pub const DEFAULT_CORRUPTION_SIGMA: f64 = 0.1;

/// Additive Gaussian corruption `x + sigma * eps`.
pub fn corrupt_gaussian(x: &Tensor, sigma: f64, rng: &mut SplitRng) -> Result<Tensor> {
    if sigma < 0.0 {
        return Err(Error::invalid_argument(format!(
            "corruption sigma must be non-negative, got {sigma}"
        )));
    }
    let noise = Tensor::randn(x.shape(), rng);
    x.broadcast_zip(&noise, |v, n| v + sigma * n)
}

/// 2-D two-moons-like mixture: two interleaved half circles with Gaussian
/// jitter, `[n x 2]`.
pub fn two_moons(n: usize, noise: f64, rng: &mut SplitRng) -> Tensor {
    let mut data = Vec::with_capacity(n * 2);
    for i in 0..n {
        let t = rng.uniform() * std::f64::consts::PI;
        let (x, y) = if i % 2 == 0 {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        data.push(x + noise * rng.normal());
        data.push(y + noise * rng.normal());
    }
    Tensor::new(&[n, 2], data).expect("constructed length")
}

/// Write `[n x 2]` points as CSV, one `x,y` pair per row.
pub fn write_points_csv(points: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    if points.rank() != 2 || points.shape()[1] != 2 {
        return Err(Error::invalid_argument(format!(
            "expected [n x 2] points, got {:?}",
            points.shape()
        )));
    }
    let mut out = String::new();
    for r in 0..points.shape()[0] {
        let row = points.row(r);
        out.push_str(&format!("{},{}\n", row[0], row[1]));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read numeric CSV rows into an `[n x d]` tensor. Rows must agree on the
/// number of columns; a leading non-numeric header row is skipped.
pub fn read_points_csv(path: impl AsRef<Path>) -> Result<Tensor> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue, // header
            Err(e) => return Err(Error::Format(format!("line {}: {e}", i + 1))),
        }
    }
    if rows.is_empty() {
        return Err(Error::Format("no data rows".to_string()));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Format("rows have inconsistent column counts".to_string()));
    }
    Tensor::from_rows(&rows)
}
