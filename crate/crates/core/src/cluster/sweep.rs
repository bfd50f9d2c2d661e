use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lloyd_traced, silhouette, ClusteringModel, KMeansParams, RestartScope};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::signature::Signature;

/// Best of `params.restarts` Lloyd runs by Silhouette.
///
/// Restart i is seeded with `derive_seed(params.seed, i)`. Ranking is by
/// highest Silhouette, then lowest inertia, then lowest restart index.
/// Restarts whose partition has no defined Silhouette (an unrepairable empty
/// cluster) rank last; the call fails only if every restart does.
pub fn kmeans_best_of(points: &[Signature], params: &KMeansParams) -> Result<ClusteringModel> {
    params.validate()?;
    if params.k > points.len() {
        return Err(Error::KExceedsPoints {
            k: params.k,
            n: points.len(),
        });
    }
    let runs: Vec<Result<ClusteringModel>> = (0..params.restarts as u64)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(params.seed, i);
            let run = lloyd_traced(
                points,
                params.k,
                seed,
                params.max_iters,
                params.convergence_tol,
                params.init,
            )?;
            let mut model = run.model;
            model.silhouette = Some(silhouette(points, &model.assignments)?);
            Ok(model)
        })
        .collect();

    let mut best: Option<ClusteringModel> = None;
    let mut first_err = None;
    for run in runs {
        match run {
            Ok(m) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        let (s, bs) = (m.silhouette.unwrap(), b.silhouette.unwrap());
                        s > bs || (s == bs && m.inertia < b.inertia)
                    }
                };
                if better {
                    best = Some(m);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one restart"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepEntry {
    pub k: usize,
    pub best_silhouette: f64,
    pub best_inertia: f64,
    pub winning_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepReport {
    pub entries: Vec<KSweepEntry>,
    pub selected_k: usize,
    pub requested_k_max: usize,
    pub effective_k_max: usize,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub report: KSweepReport,
    /// The winning model at `selected_k`.
    pub model: ClusteringModel,
}

/// Runs [`kmeans_best_of`] for every k in `k_min..=min(k_max, n - 1)` and
/// selects the k with the highest Silhouette (ties to the smaller k).
///
/// Each k uses base seed `derive_seed(template.seed, k)`.
pub fn sweep_k(
    points: &[Signature],
    k_min: usize,
    k_max: usize,
    template: &KMeansParams,
    scope: RestartScope,
) -> Result<SweepOutcome> {
    let n = points.len();
    let effective = k_max.min(n.saturating_sub(1));
    if effective < k_max {
        warn!("k_max {k_max} clamped to {effective} for {n} points");
    }
    let k_min = k_min.max(2);
    if k_min > effective {
        return Err(Error::EmptySweep {
            k_min,
            k_max: effective,
        });
    }
    let cells = effective - k_min + 1;
    let restarts = match scope {
        RestartScope::PerK => template.restarts,
        RestartScope::Total => (template.restarts / cells).max(1),
    };

    let mut entries = Vec::with_capacity(cells);
    let mut best: Option<ClusteringModel> = None;
    for k in k_min..=effective {
        let params = KMeansParams {
            k,
            restarts,
            seed: derive_seed(template.seed, k as u64),
            ..template.clone()
        };
        let model = kmeans_best_of(points, &params)?;
        let s = model.silhouette.expect("populated by kmeans_best_of");
        entries.push(KSweepEntry {
            k,
            best_silhouette: s,
            best_inertia: model.inertia,
            winning_seed: model.seed_used,
        });
        if best.as_ref().is_none_or(|b| s > b.silhouette.unwrap()) {
            best = Some(model);
        }
    }
    let model = best.expect("non-empty sweep");
    Ok(SweepOutcome {
        report: KSweepReport {
            entries,
            selected_k: model.k,
            requested_k_max: k_max,
            effective_k_max: effective,
        },
        model,
    })
}
