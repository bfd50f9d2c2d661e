use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{r_squared, Dataset, ForestParams, ModelKind, ModelParams, OlsParams, RegressionModel, TreeParams};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, task_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvScoring {
    /// R² over all out-of-fold predictions at once.
    #[default]
    Pooled,
    /// Mean of per-fold R². Falls back to [`CvScoring::Pooled`] when some
    /// fold has R² undefined (fewer than two rows or a constant target),
    /// which always happens under leave-one-out. Small folds make this
    /// noisy: a fold whose targets happen to be nearly constant can score
    /// far below zero.
    FoldMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    #[serde(default)]
    pub scoring: CvScoring,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            folds: 5,
            seed: 0,
            scoring: CvScoring::Pooled,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridScore {
    pub params: ModelParams,
    pub score: std::result::Result<f64, String>,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub best: ModelParams,
    /// Held-out R² of `best`.
    pub score: f64,
    pub grid: Vec<GridScore>,
    /// `best` refit on every row with the CV seed.
    pub model: RegressionModel,
    pub folds: Vec<Vec<usize>>,
}

/// Seeded shuffle cut into contiguous folds; the first `n % folds` folds get
/// one extra row.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut task_rng(derive_seed(seed, stream::FOLDS)));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(order[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Grid search by held-out R². The best grid point is the highest score,
/// ties going to the earlier point; grid points whose folds fail to fit are
/// skipped and the call errs only if all of them fail.
///
/// Fold f trains with seed `derive_seed(seed, f)`.
pub fn cross_validate(data: &Dataset, grid: &[ModelParams], options: &CvOptions) -> Result<CvOutcome> {
    if grid.is_empty() {
        return Err(Error::Config("empty parameter grid".into()));
    }
    let n = data.len();
    if options.folds < 2 {
        return Err(Error::Config("cross-validation needs at least 2 folds".into()));
    }
    if n < options.folds {
        return Err(Error::TooFewRows {
            rows: n,
            folds: options.folds,
        });
    }
    let folds = fold_assignment(n, options.folds, options.seed);

    let grid_scores: Vec<(ModelParams, Result<f64>)> = grid
        .par_iter()
        .map(|params| (params.clone(), score_point(data, params, &folds, options)))
        .collect();

    let mut best: Option<(usize, f64)> = None;
    let mut first_err = None;
    for (i, (_, s)) in grid_scores.iter().enumerate() {
        match s {
            Ok(v) if best.is_none_or(|(_, b)| *v > b) => best = Some((i, *v)),
            Ok(_) => {}
            Err(_) if first_err.is_none() => first_err = Some(i),
            Err(_) => {}
        }
    }
    let Some((best_idx, score)) = best else {
        let i = first_err.expect("non-empty grid");
        let (_, err) = grid_scores.into_iter().nth(i).unwrap();
        return Err(err.unwrap_err());
    };
    let best_params = grid_scores[best_idx].0.clone();
    let model = best_params.fit(data, options.seed)?;
    Ok(CvOutcome {
        best: best_params,
        score,
        grid: grid_scores
            .into_iter()
            .map(|(params, s)| GridScore {
                params,
                score: s.map_err(|e| e.to_string()),
            })
            .collect(),
        model,
        folds,
    })
}

fn score_point(data: &Dataset, params: &ModelParams, folds: &[Vec<usize>], options: &CvOptions) -> Result<f64> {
    let mut fold_scores = Vec::with_capacity(folds.len());
    let mut pooled_true = Vec::with_capacity(data.len());
    let mut pooled_pred = Vec::with_capacity(data.len());
    for (f, held) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, rows)| rows.iter().copied())
            .collect();
        let model = params.fit(&data.subset(&train), derive_seed(options.seed, f as u64))?;
        let y: Vec<f64> = held.iter().map(|&i| data.targets[i]).collect();
        let p: Vec<f64> = held
            .iter()
            .map(|&i| model.predict(&data.features[i]))
            .collect::<Result<_>>()?;
        fold_scores.push(r_squared(&y, &p));
        pooled_true.extend(y);
        pooled_pred.extend(p);
    }
    match options.scoring {
        CvScoring::FoldMean if fold_scores.iter().all(|s| s.is_ok()) => {
            let sum: f64 = fold_scores.into_iter().map(|s| s.unwrap()).sum();
            Ok(sum / folds.len() as f64)
        }
        _ => r_squared(&pooled_true, &pooled_pred),
    }
}

/// A tree depth limit; `"unlimited"` in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DepthLimit(pub Option<usize>);

impl Serialize for DepthLimit {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Some(d) => s.serialize_u64(d as u64),
            None => s.serialize_str("unlimited"),
        }
    }
}

impl<'de> Deserialize<'de> for DepthLimit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Depth(usize),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Depth(v) => Ok(DepthLimit(Some(v))),
            Raw::Word(w) if w == "unlimited" => Ok(DepthLimit(None)),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "expected a depth or \"unlimited\", got `{w}`"
            ))),
        }
    }
}

/// Hyperparameter grids per model kind. Expansion order is the listed order,
/// outer loop first, and that order breaks score ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub tree_max_depth: Vec<DepthLimit>,
    pub tree_min_samples_leaf: Vec<usize>,
    pub forest_n_trees: Vec<usize>,
    pub forest_max_features: Vec<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            tree_max_depth: vec![
                DepthLimit(Some(2)),
                DepthLimit(Some(4)),
                DepthLimit(Some(8)),
                DepthLimit(None),
            ],
            tree_min_samples_leaf: vec![1, 3, 5],
            forest_n_trees: vec![100],
            forest_max_features: vec![3],
        }
    }
}

impl GridConfig {
    pub fn expand(&self, kind: ModelKind) -> Vec<ModelParams> {
        match kind {
            ModelKind::Ols => vec![ModelParams::Ols(OlsParams::default())],
            ModelKind::Tree => self
                .tree_max_depth
                .iter()
                .flat_map(|d| {
                    self.tree_min_samples_leaf.iter().map(move |leaf| {
                        ModelParams::Tree(TreeParams {
                            max_depth: d.0,
                            min_samples_leaf: *leaf,
                            min_samples_split: 2,
                        })
                    })
                })
                .collect(),
            ModelKind::Forest => self
                .forest_n_trees
                .iter()
                .flat_map(|t| {
                    self.forest_max_features.iter().map(move |m| {
                        ModelParams::Forest(ForestParams {
                            n_trees: *t,
                            max_features: *m,
                            ..ForestParams::default()
                        })
                    })
                })
                .collect(),
        }
    }
}

pub fn default_grid(kind: ModelKind) -> Vec<ModelParams> {
    GridConfig::default().expand(kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition_rows() {
        let folds = fold_assignment(23, 5, 4);
        assert_eq!(folds.iter().map(Vec::len).collect::<Vec<_>>(), vec![5, 5, 5, 4, 4]);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert_eq!(folds, fold_assignment(23, 5, 4));
        assert_ne!(folds, fold_assignment(23, 5, 5));
    }

    #[test]
    fn default_grid_shape() {
        assert_eq!(default_grid(ModelKind::Ols).len(), 1);
        let tree = default_grid(ModelKind::Tree);
        assert_eq!(tree.len(), 12);
        assert_eq!(
            tree[0],
            ModelParams::Tree(TreeParams {
                max_depth: Some(2),
                min_samples_leaf: 1,
                min_samples_split: 2
            })
        );
        assert!(matches!(&tree[11], ModelParams::Tree(p) if p.max_depth.is_none() && p.min_samples_leaf == 5));
        let forest = default_grid(ModelKind::Forest);
        assert!(matches!(&forest[..], [ModelParams::Forest(p)] if p.n_trees == 100 && p.max_features == 3 && p.bootstrap));
    }

    #[test]
    fn depth_limit_toml() {
        #[derive(Serialize, Deserialize)]
        struct W {
            d: Vec<DepthLimit>,
        }
        let w: W = toml::from_str("d = [2, \"unlimited\"]").unwrap();
        assert_eq!(w.d, vec![DepthLimit(Some(2)), DepthLimit(None)]);
        assert!(toml::from_str::<W>("d = [\"deep\"]").is_err());
        assert_eq!(toml::to_string(&w).unwrap().trim(), "d = [2, \"unlimited\"]");
    }

    #[test]
    fn too_few_rows() {
        let d = Dataset::from_xy(vec![[0.1; 8]; 3], vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            cross_validate(&d, &default_grid(ModelKind::Tree), &CvOptions::default()),
            Err(Error::TooFewRows { rows: 3, folds: 5 })
        ));
    }
}
