use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ClusterSummary, RegressConfig, ZoneResponse};
use crate::error::{Error, Result};
use crate::regress::{cross_validate, CvOptions, Dataset, ModelKind, ModelParams, RegressionModel};
use crate::rng::derive_seed;
use crate::signature::SignatureMatrix;

pub const MODELS_FORMAT_VERSION: u32 = 1;

/// The contents of `models.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModels {
    pub format_version: u32,
    /// Retained clusters that have a model, ascending.
    pub clusters: Vec<ClusterModels>,
    #[serde(default)]
    pub pooled: Option<ClusterModels>,
}

impl TrainedModels {
    pub fn best_for(&self, cluster: usize) -> Option<&RegressionModel> {
        self.clusters
            .binary_search_by_key(&cluster, |c| c.cluster)
            .ok()
            .and_then(|i| self.clusters[i].best_model())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: TrainedModels = serde_json::from_str(text)?;
        if m.format_version != MODELS_FORMAT_VERSION {
            return Err(Error::parse(
                "models",
                format!("unsupported format_version {}", m.format_version),
            ));
        }
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModels {
    pub cluster: usize,
    pub training_rows: usize,
    pub best: ModelKind,
    pub fits: Vec<FittedModel>,
}

impl ClusterModels {
    pub fn best_model(&self) -> Option<&RegressionModel> {
        self.fits.iter().find(|f| f.kind == self.best).map(|f| &f.model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub kind: ModelKind,
    pub params: ModelParams,
    /// Held-out R² of `params`; `None` when it could not be computed.
    pub cv_r_squared: Option<f64>,
    pub model: RegressionModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalScope {
    Cluster(usize),
    Pooled,
}

impl std::fmt::Display for EvalScope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalScope::Cluster(c) => write!(f, "{c}"),
            EvalScope::Pooled => f.write_str("all"),
        }
    }
}

impl std::str::FromStr for EvalScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(EvalScope::Pooled);
        }
        s.parse()
            .map(EvalScope::Cluster)
            .map_err(|_| Error::parse("cluster id", format!("`{s}`")))
    }
}

/// One line of `eval_report.csv`. When `r_squared` is `None`, `params` holds
/// the reason instead of hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub scope: EvalScope,
    pub model: ModelKind,
    pub r_squared: Option<f64>,
    pub params: String,
}

/// Cross-validates and fits every configured model kind on each retained
/// cluster. The cluster's best kind is the highest held-out R², ties to the
/// earlier kind in `config.models`. If no kind has a defined score the first
/// of forest, tree, OLS that fits on all rows is used.
///
/// Cluster c uses CV seed `derive_seed(config.seed, c)`; the pooled model
/// uses `config.seed`.
pub fn train_models(
    matrix: &SignatureMatrix,
    assignments: &[usize],
    summaries: &[ClusterSummary],
    responses: &[ZoneResponse],
    config: &RegressConfig,
) -> Result<(TrainedModels, Vec<EvalRow>)> {
    let retained: Vec<usize> = summaries.iter().filter(|s| s.retained).map(|s| s.cluster).collect();

    let trainable = |z: usize| -> Option<f64> {
        let id = &matrix.zone_ids[z];
        let i = responses.binary_search_by(|r| r.zone_id.cmp(id)).ok()?;
        (!responses[i].excluded).then_some(responses[i].mean_response_s)
    };
    let dataset = |member: &dyn Fn(usize) -> bool| -> Result<Dataset> {
        let (mut x, mut y, mut ids) = (Vec::new(), Vec::new(), Vec::new());
        for z in 0..matrix.len() {
            if let Some(t) = trainable(z).filter(|_| member(z)) {
                x.push(matrix.rows[z]);
                y.push(t);
                ids.push(matrix.zone_ids[z].clone());
            }
        }
        Dataset::new(x, y, ids)
    };

    let per_cluster: Vec<(usize, Dataset)> = retained
        .iter()
        .map(|&c| Ok((c, dataset(&|z| assignments[z] == c)?)))
        .collect::<Result<_>>()?;
    let results: Vec<(Option<ClusterModels>, Vec<EvalRow>)> = per_cluster
        .par_iter()
        .map(|(c, data)| fit_scope(data, EvalScope::Cluster(*c), derive_seed(config.seed, *c as u64), config))
        .collect();

    let mut clusters = Vec::new();
    let mut eval = Vec::new();
    for (m, rows) in results {
        clusters.extend(m);
        eval.extend(rows);
    }
    let pooled = if config.pooled {
        let data = dataset(&|z| retained.contains(&assignments[z]))?;
        let (m, rows) = fit_scope(&data, EvalScope::Pooled, config.seed, config);
        eval.extend(rows);
        m
    } else {
        None
    };
    Ok((
        TrainedModels {
            format_version: MODELS_FORMAT_VERSION,
            clusters,
            pooled,
        },
        eval,
    ))
}

fn fit_scope(
    data: &Dataset,
    scope: EvalScope,
    seed: u64,
    config: &RegressConfig,
) -> (Option<ClusterModels>, Vec<EvalRow>) {
    let options = CvOptions {
        folds: config.folds,
        seed,
        scoring: config.scoring,
    };
    let mut fits = Vec::new();
    let mut eval = Vec::new();
    let mut best: Option<(ModelKind, f64)> = None;
    for &kind in &config.models {
        let grid = config.grid.expand(kind);
        match cross_validate(data, &grid, &options) {
            Ok(out) => {
                if best.is_none_or(|(_, b)| out.score > b) {
                    best = Some((kind, out.score));
                }
                eval.push(EvalRow {
                    scope,
                    model: kind,
                    r_squared: Some(out.score),
                    params: out.best.describe(),
                });
                fits.push(FittedModel {
                    kind,
                    params: out.best,
                    cv_r_squared: Some(out.score),
                    model: out.model,
                });
            }
            Err(e) => eval.push(EvalRow {
                scope,
                model: kind,
                r_squared: None,
                params: format!("error={e}"),
            }),
        }
    }
    if let Some((kind, _)) = best {
        let training_rows = data.len();
        let models = scope_models(scope, training_rows, kind, fits);
        return (Some(models), eval);
    }
    for kind in [ModelKind::Forest, ModelKind::Tree, ModelKind::Ols] {
        if !config.models.contains(&kind) || data.is_empty() {
            continue;
        }
        let params = config.grid.expand(kind).remove(0);
        if let Ok(model) = params.fit(data, seed) {
            let fit = FittedModel {
                kind,
                params,
                cv_r_squared: None,
                model,
            };
            return (Some(scope_models(scope, data.len(), kind, vec![fit])), eval);
        }
    }
    (None, eval)
}

fn scope_models(scope: EvalScope, training_rows: usize, best: ModelKind, fits: Vec<FittedModel>) -> ClusterModels {
    ClusterModels {
        cluster: match scope {
            EvalScope::Cluster(c) => c,
            EvalScope::Pooled => usize::MAX,
        },
        training_rows,
        best,
        fits,
    }
}
