//! k-means experiment: cluster CSV points (or the built-in line dataset)
//! and emit assignments and centroids.

use std::path::Path;

use crate::classic::{kmeans_fit, kmeans_inertia};
use crate::error::Result;
use crate::generative::read_points_csv;
use crate::rng::SplitRng;
use crate::tensor::Tensor;

use super::{ExperimentConfig, ExperimentRun};

#[derive(Debug, Clone)]
pub struct KMeansOptions {
    pub k: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self { k: 2, max_iter: 100, tol: 1e-9 }
    }
}

/// The four collinear points `{0, 1, 9, 10}`.
fn line_dataset() -> Tensor {
    Tensor::from_rows(&[vec![0.0], vec![1.0], vec![9.0], vec![10.0]]).expect("4x1")
}

/// Fit k-means to points from a CSV file (default: the built-in line) and
/// write assignments and centroids.
pub fn run_kmeans(
    config: &ExperimentConfig,
    points_csv: Option<&Path>,
    opts: &KMeansOptions,
) -> Result<ExperimentRun> {
    let points = match points_csv {
        Some(path) => read_points_csv(path)?,
        None => line_dataset(),
    };
    let mut rng = SplitRng::new(config.seed);
    let state = kmeans_fit(&points, opts.k, &mut rng, opts.max_iter, opts.tol)?;
    let inertia = kmeans_inertia(&state, &points);

    let mut run = ExperimentRun::new();
    for (i, &h) in state.history.iter().enumerate() {
        run.log(i as u64, "inertia", h);
    }
    run.set("k", opts.k as u64);
    run.set("iterations", state.iterations as u64);
    run.set("inertia", inertia);
    run.set("seed", config.seed);
    let centroids: Vec<Vec<f64>> =
        (0..opts.k).map(|c| state.centroids.row(c).to_vec()).collect();
    run.set("centroids", serde_json::to_value(&centroids)?);

    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir)?;
        let mut csv = String::from("point,cluster\n");
        for (i, &a) in state.assignments.iter().enumerate() {
            csv.push_str(&format!("{i},{a}\n"));
        }
        std::fs::write(dir.join("assignments.csv"), csv)?;
        let mut centroid_csv = String::new();
        for c in 0..opts.k {
            let row: Vec<String> = state.centroids.row(c).iter().map(f64::to_string).collect();
            centroid_csv.push_str(&row.join(","));
            centroid_csv.push('\n');
        }
        std::fs::write(dir.join("centroids.csv"), centroid_csv)?;
    }
    run.finish(config)
}
