use rand::seq::index;
use rand::Rng;

use super::{ClusteringModel, Init};
use crate::error::{Error, Result};
use crate::numeric::{pairwise_sum, squared_distance};
use crate::rng::task_rng;
use crate::signature::Signature;
use crate::WORK_TYPE_COUNT;

/// A Lloyd run plus the inertia recorded after each iteration.
#[derive(Debug, Clone)]
pub struct LloydRun {
    pub model: ClusteringModel,
    pub inertia_trace: Vec<f64>,
}

pub fn lloyd(
    points: &[Signature],
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<ClusteringModel> {
    lloyd_traced(points, k, seed, max_iters, tol, Init::KMeansPlusPlus).map(|r| r.model)
}

/// Lloyd iterations until no assignment changes, the largest centroid move
/// drops below `tol`, or `max_iters` is reached.
///
/// A cluster that empties is re-seeded at the point farthest from its
/// current centroid (taken from a cluster with at least two members).
pub fn lloyd_traced(
    points: &[Signature],
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
    init: Init,
) -> Result<LloydRun> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::KExceedsPoints { k, n });
    }
    let mut rng = task_rng(seed);
    let mut centroids = match init {
        Init::KMeansPlusPlus => plus_plus(points, k, &mut rng),
        Init::Uniform => index::sample(&mut rng, n, k)
            .into_iter()
            .map(|i| points[i])
            .collect(),
    };

    let mut assignments = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let changed = assign(points, &centroids, &mut assignments);
        let repaired = repair_empty(points, &mut centroids, &mut assignments);

        let updated = means(points, &assignments, &centroids);
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        trace.push(inertia(points, &centroids, &assignments));
        if (!changed && !repaired) || shift < tol {
            break;
        }
    }

    Ok(LloydRun {
        model: ClusteringModel {
            k,
            inertia: *trace.last().expect("at least one iteration"),
            centroids,
            assignments,
            silhouette: None,
            seed_used: seed,
            iterations_run: iterations,
        },
        inertia_trace: trace,
    })
}

fn plus_plus(points: &[Signature], k: usize, rng: &mut impl Rng) -> Vec<Signature> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)]);
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total = pairwise_sum(&d2);
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, d) in d2.iter().enumerate() {
                if *d <= 0.0 {
                    continue;
                }
                acc += d;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total has a positive entry")
        } else {
            rng.random_range(0..n)
        };
        let c = points[next];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Nearest-centroid assignment; returns whether any label changed.
fn assign(points: &[Signature], centroids: &[Signature], assignments: &mut [usize]) -> bool {
    let mut changed = false;
    for (p, a) in points.iter().zip(assignments.iter_mut()) {
        let best = super::nearest_centroid(p, centroids);
        if *a != best {
            *a = best;
            changed = true;
        }
    }
    changed
}

fn repair_empty(
    points: &[Signature],
    centroids: &mut [Signature],
    assignments: &mut [usize],
) -> bool {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for a in assignments.iter() {
        sizes[*a] += 1;
    }
    let mut repaired = false;
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = 0.0;
        for (i, p) in points.iter().enumerate() {
            let own = assignments[i];
            if sizes[own] < 2 {
                continue;
            }
            let d = squared_distance(p, &centroids[own]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let Some(i) = far else { break };
        sizes[assignments[i]] -= 1;
        assignments[i] = c;
        sizes[c] = 1;
        centroids[c] = points[i];
        repaired = true;
    }
    repaired
}

/// Member means; an empty cluster keeps its previous centroid.
fn means(points: &[Signature], assignments: &[usize], previous: &[Signature]) -> Vec<Signature> {
    let k = previous.len();
    let mut sums = vec![[0.0; WORK_TYPE_COUNT]; k];
    let mut counts = vec![0usize; k];
    for (p, a) in points.iter().zip(assignments) {
        counts[*a] += 1;
        for (s, x) in sums[*a].iter_mut().zip(p) {
            *s += x;
        }
    }
    sums.into_iter()
        .zip(counts)
        .zip(previous)
        .map(|((s, c), prev)| {
            if c == 0 {
                *prev
            } else {
                s.map(|v| v / c as f64)
            }
        })
        .collect()
}

pub(crate) fn inertia(points: &[Signature], centroids: &[Signature], assignments: &[usize]) -> f64 {
    let d: Vec<f64> = points
        .iter()
        .zip(assignments)
        .map(|(p, a)| squared_distance(p, &centroids[*a]))
        .collect();
    pairwise_sum(&d)
}
