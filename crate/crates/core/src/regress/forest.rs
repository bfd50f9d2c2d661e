use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, TreeModel, TreeParams};
use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, task_rng};
use crate::signature::Signature;
use crate::WORK_TYPE_COUNT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features drawn (without replacement) as split candidates at each node.
    pub max_features: usize,
    pub bootstrap: bool,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_features: WORK_TYPE_COUNT.div_ceil(3),
            bootstrap: true,
            tree: TreeParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub params: ForestParams,
    pub seed: u64,
}

impl ForestModel {
    pub fn predict_row(&self, x: &Signature) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(x)).sum();
        sum / self.trees.len() as f64
    }
}

/// Bagged CART trees with per-node feature subsampling.
///
/// Tree t draws from `derive_seed(seed, t)`: first the bootstrap sample, then
/// one feature subset per node in depth-first order. A node whose sampled
/// features admit no valid split becomes a leaf.
pub fn fit_forest(data: &Dataset, params: &ForestParams, seed: u64) -> Result<ForestModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if params.n_trees == 0 {
        return Err(Error::Config("n_trees must be positive".into()));
    }
    if params.max_features == 0 || params.max_features > WORK_TYPE_COUNT {
        return Err(Error::Config(format!(
            "max_features must be in 1..={WORK_TYPE_COUNT}"
        )));
    }
    let n = data.len();
    let trees = (0..params.n_trees as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = task_rng(derive_seed(seed, t));
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut candidates = |_depth: usize| {
                let mut f = index::sample(&mut rng, WORK_TYPE_COUNT, params.max_features).into_vec();
                f.sort_unstable();
                f
            };
            grow(data, rows, &params.tree, &mut candidates)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestModel {
        trees,
        params: params.clone(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::fit_tree;

    fn data() -> Dataset {
        let rows: Vec<Signature> = (0..30)
            .map(|i| {
                let mut r = [0.0; 8];
                r[0] = (i as f64 * 0.37).fract();
                r[2] = (i as f64 * 0.61).fract();
                r[5] = 1.0 - r[0] * 0.5 - r[2] * 0.5;
                r
            })
            .collect();
        let y = rows
            .iter()
            .map(|r| 300.0 + if r[0] > 0.5 { 40.0 } else { 0.0 } + 10.0 * r[2])
            .collect();
        Dataset::from_xy(rows, y).unwrap()
    }

    #[test]
    fn degenerate_forest_equals_tree() {
        let d = data();
        let params = ForestParams {
            n_trees: 1,
            max_features: 8,
            bootstrap: false,
            tree: TreeParams::default(),
        };
        let f = fit_forest(&d, &params, 17).unwrap();
        let t = fit_tree(&d, &TreeParams::default()).unwrap();
        assert_eq!(f.trees[0], t);
        for r in &d.features {
            assert_eq!(f.predict_row(r), t.predict_row(r));
        }
    }

    #[test]
    fn constant_target_forest() {
        let mut d = data();
        d.targets = vec![250.0; d.len()];
        let f = fit_forest(&d, &ForestParams::default(), 3).unwrap();
        assert!(f.trees.iter().all(|t| t.nodes.len() == 1));
        assert_eq!(f.predict_row(&[0.5; 8]), 250.0);
    }

    #[test]
    fn seeded_forests_are_reproducible() {
        let d = data();
        let a = fit_forest(&d, &ForestParams::default(), 8).unwrap();
        let b = fit_forest(&d, &ForestParams::default(), 8).unwrap();
        let c = fit_forest(&d, &ForestParams::default(), 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_params() {
        let d = data();
        let bad = ForestParams {
            max_features: 9,
            ..Default::default()
        };
        assert!(fit_forest(&d, &bad, 0).is_err());
    }
}
