use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{euclidean, pairwise_sum};
use crate::signature::Signature;

/// Mean Silhouette coefficient of a labelled partition.
///
/// For point i with mean intra-cluster distance `c` and smallest mean
/// distance to another cluster `o`, `s(i) = (o - c) / max(c, o)`. Points in
/// singleton clusters score 0, as do points whose `c` and `o` are both 0.
/// Labels must be `0..k` with every cluster non-empty and `2 <= k <= n - 1`.
pub fn silhouette(points: &[Signature], assignments: &[usize]) -> Result<f64> {
    let n = points.len();
    if assignments.len() != n {
        return Err(Error::LengthMismatch(n, assignments.len()));
    }
    let k = assignments.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for a in assignments {
        sizes[*a] += 1;
    }
    if let Some(empty) = sizes.iter().position(|s| *s == 0) {
        return Err(Error::SilhouetteUndefined(format!("cluster {empty} is empty")));
    }
    if k < 2 || k + 1 > n {
        return Err(Error::SilhouetteUndefined(format!(
            "{k} clusters over {n} points"
        )));
    }

    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = assignments[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for (j, p) in points.iter().enumerate() {
                if j != i {
                    sums[assignments[j]] += euclidean(&points[i], p);
                }
            }
            let c = sums[own] / (sizes[own] - 1) as f64;
            let o = (0..k)
                .filter(|&j| j != own)
                .map(|j| sums[j] / sizes[j] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = c.max(o);
            if denom == 0.0 {
                0.0
            } else {
                (o - c) / denom
            }
        })
        .collect();
    Ok(pairwise_sum(&scores) / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> Vec<Signature> {
        xs.iter()
            .map(|x| {
                let mut s = [0.0; 8];
                s[0] = *x;
                s
            })
            .collect()
    }

    #[test]
    fn two_pairs_hand_value() {
        let pts = line(&[0.0, 1.0, 10.0, 11.0]);
        let s = silhouette(&pts, &[0, 0, 1, 1]).unwrap();
        let expected = (2.0 * 9.5 / 10.5 + 2.0 * 8.5 / 9.5) / 4.0;
        assert!((s - expected).abs() < 1e-15);
        assert!((s - 0.899749).abs() < 1e-6);
    }

    #[test]
    fn coincident_groups_score_one() {
        let pts = line(&[0.2, 0.2, 0.2, 0.9, 0.9]);
        assert_eq!(silhouette(&pts, &[0, 0, 0, 1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn undefined_cases() {
        let pts = line(&[0.0, 1.0, 2.0]);
        for labels in [&[0, 0, 0][..], &[0, 1, 2], &[0, 2, 2]] {
            assert!(matches!(
                silhouette(&pts, labels),
                Err(Error::SilhouetteUndefined(_))
            ));
        }
    }

    #[test]
    fn singletons_contribute_zero() {
        let pts = line(&[0.0, 1.0, 10.0]);
        let s = silhouette(&pts, &[0, 0, 1]).unwrap();
        let expected = (9.0 / 10.0 + 8.0 / 9.0) / 3.0;
        assert!((s - expected).abs() < 1e-15);
    }
}
