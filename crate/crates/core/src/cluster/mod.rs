//! K-means++ clustering of jobs by resource usage and by arrival time.
//!
//! Seeding and refinement use squared Euclidean distance; silhouettes use
//! Euclidean distance. Every entry point is a pure function of its inputs
//! and the supplied random source.

mod classify;
mod kmeans;
mod silhouette;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classify::{
    cluster_arrivals, cluster_best_of, classify_jobs, label_classes, sweep_k, usage_points, ArrivalClusters, ClassSummary,
    ClusterExtent, JobClassification, MinMaxScaler,
};
pub use kmeans::{distinct_count, kmeanspp_seed, lloyd, lloyd_traced};
pub use silhouette::{silhouette, silhouette_summary, SilhouetteSummary};

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

/// A point in feature space, optionally tagged with the job it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: Vec<f64>,
    pub source_id: Option<u64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point { coords, source_id: None }
    }

    pub fn with_id(coords: Vec<f64>, id: u64) -> Self {
        Point { coords, source_id: Some(id) }
    }
}

/// Result of one clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centers: Vec<Vec<f64>>,
    /// Cluster index of each input point, in input order.
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squared distances.
    pub wcss: f64,
    pub iterations: usize,
    /// Mean silhouette; absent when fewer than two clusters are non-empty
    /// or it was not computed.
    pub silhouette_mean: Option<f64>,
    /// Whether the silhouette was computed on a subsample.
    #[serde(default)]
    pub silhouette_sampled: bool,
}

impl ClusterModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Tuning knobs shared by the higher-level clustering operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Seeded K-means++ + Lloyd runs per k; the lowest-wcss run wins.
    pub restarts: usize,
    pub max_iter: usize,
    /// Center-movement tolerance, in the (normalized) clustering space.
    pub tol: f64,
    /// Largest point count scored with exact silhouettes.
    pub silhouette_cap: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig { restarts: 10, max_iter: 300, tol: 1e-6, silhouette_cap: 50_000 }
    }
}
