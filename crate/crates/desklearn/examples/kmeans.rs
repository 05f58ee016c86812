//! k-means clustering: assignments, centroid updates, and the
//! non-increasing inertia trace.
//!
//! ```sh
//! cargo run -p desklearn --example kmeans
//! ```

use desklearn::classic::{kmeans_fit, kmeans_inertia};
use desklearn::generative::two_moons;
use desklearn::rng::SplitRng;
use desklearn::tensor::Tensor;

fn main() -> desklearn::Result<()> {
    // the 4-point line splits into two tight pairs
    let line = Tensor::from_rows(&[vec![0.0], vec![1.0], vec![9.0], vec![10.0]])?;
    let mut rng = SplitRng::new(0);
    let state = kmeans_fit(&line, 2, &mut rng, 100, 1e-9)?;
    println!("line {{0,1,9,10}}, k=2:");
    println!("  centroids   : {:?}", state.centroids);
    println!("  assignments : {:?}", state.assignments);
    println!("  inertia     : {}", kmeans_inertia(&state, &line));

    // a larger 2-D mixture
    let points = two_moons(300, 0.08, &mut rng);
    let state = kmeans_fit(&points, 4, &mut rng, 100, 1e-9)?;
    println!("\ntwo moons, k=4: converged in {} iterations", state.iterations);
    println!("  inertia trace: {:?}", state.history.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>());
    for c in 0..4 {
        let count = state.assignments.iter().filter(|&&a| a == c).count();
        let row: Vec<f64> = state.centroids.row(c).iter().map(|v| (v * 100.0).round() / 100.0).collect();
        println!("  cluster {c}: {count:3} points at {row:?}");
    }
    Ok(())
}
