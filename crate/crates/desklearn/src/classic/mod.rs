//! Classic models: k-means clustering and Hopfield associative memory.

mod hopfield;
mod kmeans;

pub use hopfield::{corrupt_pattern, random_pattern, HopfieldNet};
pub use kmeans::{kmeans_fit, kmeans_inertia, KMeansState};
