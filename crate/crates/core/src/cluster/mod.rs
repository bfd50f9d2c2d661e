//! k-means clustering of signature vectors.
//!
//! Lloyd's algorithm with k-means++ seeding, repeated over independently
//! seeded restarts; restarts are ranked by mean Silhouette coefficient and
//! the number of clusters is chosen by sweeping k. Distances are Euclidean
//! on raw proportions and every tie goes to the lowest index.

mod lloyd;
mod silhouette;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::numeric::squared_distance;
use crate::signature::Signature;

pub use lloyd::{lloyd, lloyd_traced, LloydRun};
pub use silhouette::silhouette;
pub use sweep::{kmeans_best_of, sweep_k, KSweepEntry, KSweepReport, SweepOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    #[default]
    KMeansPlusPlus,
    /// k distinct points chosen uniformly at random.
    Uniform,
}

/// How the restart budget is spent during a k sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartScope {
    /// `restarts` runs at every k.
    #[default]
    PerK,
    /// `restarts` runs shared across the whole sweep (at least one per k).
    Total,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub convergence_tol: f64,
    pub seed: u64,
    #[serde(default)]
    pub init: Init,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansParams {
            k,
            restarts: 100,
            max_iters: 300,
            convergence_tol: 1e-6,
            seed,
            init: Init::KMeansPlusPlus,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.k == 0 || self.restarts == 0 || self.max_iters == 0 {
            return Err(crate::Error::Config(
                "k, restarts and max_iters must be positive".into(),
            ));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(crate::Error::Config("convergence_tol must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringModel {
    pub k: usize,
    pub centroids: Vec<Signature>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Unset for a bare Lloyd run.
    pub silhouette: Option<f64>,
    pub seed_used: u64,
    pub iterations_run: usize,
}

impl ClusteringModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for a in &self.assignments {
            sizes[*a] += 1;
        }
        sizes
    }
}

/// Index of the closest centroid by squared Euclidean distance.
pub fn nearest_centroid(point: &[f64], centroids: &[Signature]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}
