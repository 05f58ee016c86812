//! Lloyd's k-means with seeded initialization and inertia tracking.

use crate::error::{Error, Result};
use crate::rng::SplitRng;
use crate::tensor::Tensor;

/// Fitted clustering: centroids, per-point assignments, and the inertia
/// after each iteration.
#[derive(Debug, Clone)]
pub struct KMeansState {
    pub k: usize,
    pub centroids: Tensor,
    pub assignments: Vec<usize>,
    pub iterations: usize,
    /// Inertia measured after each assignment step.
    pub history: Vec<f64>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid by Euclidean distance; ties pick the lowest index.
fn nearest(point: &[f64], centroids: &Tensor) -> usize {
    let mut best = f64::INFINITY;
    let mut arg = 0;
    for c in 0..centroids.shape()[0] {
        let d = squared_distance(point, centroids.row(c));
        if d < best {
            best = d;
            arg = c;
        }
    }
    arg
}

/// Sample k starting centroids: distinct indices, preferring points with
/// distinct coordinates so duplicated data does not collapse clusters.
fn init_centroids(points: &Tensor, k: usize, rng: &mut SplitRng) -> Tensor {
    let n = points.shape()[0];
    let d = points.shape()[1];
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for &i in &order {
        if chosen.len() == k {
            break;
        }
        if chosen.iter().all(|&j| points.row(j) != points.row(i)) {
            chosen.push(i);
        }
    }
    for &i in &order {
        if chosen.len() == k {
            break;
        }
        if !chosen.contains(&i) {
            chosen.push(i);
        }
    }
    let mut data = Vec::with_capacity(k * d);
    for &i in &chosen {
        data.extend_from_slice(points.row(i));
    }
    Tensor::new(&[k, d], data).expect("k rows of width d")
}

/// Alternate nearest-centroid assignment and centroid-mean updates until
/// assignments stabilize, centroids move at most `tol`, or `max_iter`.
/// A cluster left empty is re-seeded to the point farthest from its
/// previous centroid.
pub fn kmeans_fit(
    points: &Tensor,
    k: usize,
    rng: &mut SplitRng,
    max_iter: usize,
    tol: f64,
) -> Result<KMeansState> {
    if points.rank() != 2 {
        return Err(Error::invalid_argument(format!(
            "expected [n x d] points, got {:?}",
            points.shape()
        )));
    }
    let (n, d) = (points.shape()[0], points.shape()[1]);
    if k == 0 || n < k {
        return Err(Error::invalid_argument(format!(
            "need n >= k >= 1, got n = {n}, k = {k}"
        )));
    }
    let mut centroids = init_centroids(points, k, rng);
    let mut assignments = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_iter {
        iterations += 1;
        let previous = assignments.clone();
        for (i, slot) in assignments.iter_mut().enumerate() {
            *slot = nearest(points.row(i), &centroids);
        }
        history.push(inertia_of(points, &centroids, &assignments));

        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            for (j, v) in points.row(i).iter().enumerate() {
                sums[a * d + j] += v;
            }
        }
        let mut max_shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                // re-seed to the farthest point from this centroid
                let far = (0..n)
                    .max_by(|&a, &b| {
                        squared_distance(points.row(a), centroids.row(c))
                            .partial_cmp(&squared_distance(points.row(b), centroids.row(c)))
                            .expect("finite distances")
                    })
                    .expect("n >= 1");
                for j in 0..d {
                    sums[c * d + j] = points.row(far)[j];
                }
                counts[c] = 1;
            }
            for j in 0..d {
                let new = sums[c * d + j] / counts[c] as f64;
                max_shift = max_shift.max((new - centroids.row(c)[j]).abs());
                centroids.data_mut()[c * d + j] = new;
            }
        }

        if assignments == previous || max_shift <= tol {
            break;
        }
    }

    Ok(KMeansState { k, centroids, assignments, iterations, history })
}

fn inertia_of(points: &Tensor, centroids: &Tensor, assignments: &[usize]) -> f64 {
    assignments
        .iter()
        .enumerate()
        .map(|(i, &a)| squared_distance(points.row(i), centroids.row(a)))
        .sum()
}

/// Sum of squared distances from each point to its assigned centroid.
pub fn kmeans_inertia(state: &KMeansState, points: &Tensor) -> f64 {
    inertia_of(points, &state.centroids, &state.assignments)
}
