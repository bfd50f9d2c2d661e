//! Regression from signatures to mean response time.
//!
//! Three model families are supported: ordinary least squares, CART
//! regression trees, and random forests of such trees. Models are scored by
//! held-out R² under seeded k-fold cross-validation.

mod cv;
mod forest;
mod metrics;
mod ols;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingestion::ZoneId;
use crate::signature::Signature;
use crate::WORK_TYPE_COUNT;

pub use cv::{
    cross_validate, default_grid, fold_assignment, CvOptions, CvOutcome, CvScoring, DepthLimit,
    GridConfig, GridScore,
};
pub use forest::{fit_forest, ForestModel, ForestParams};
pub use metrics::r_squared;
pub use ols::{fit_ols, OlsModel, OlsParams};
pub use tree::{fit_tree, Node, TreeModel, TreeParams};

/// Signature features with mean-response targets, one row per zone.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Signature>,
    pub targets: Vec<f64>,
    pub row_ids: Vec<ZoneId>,
}

impl Dataset {
    /// Checks shapes, finiteness and target non-negativity. Features are not
    /// required to lie on the simplex so that models can also be probed with
    /// arbitrary inputs.
    pub fn new(features: Vec<Signature>, targets: Vec<f64>, row_ids: Vec<ZoneId>) -> Result<Self> {
        if features.len() != targets.len() {
            return Err(Error::LengthMismatch(features.len(), targets.len()));
        }
        if row_ids.len() != targets.len() {
            return Err(Error::LengthMismatch(row_ids.len(), targets.len()));
        }
        if features.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidDataset("non-finite feature".into()));
        }
        if targets.iter().any(|y| !(y.is_finite() && *y >= 0.0)) {
            return Err(Error::InvalidDataset("targets must be finite and >= 0".into()));
        }
        Ok(Dataset {
            features,
            targets,
            row_ids,
        })
    }

    /// Dataset with placeholder row ids, for numerical work.
    pub fn from_xy(features: Vec<Signature>, targets: Vec<f64>) -> Result<Self> {
        let ids = (0..targets.len())
            .map(|i| format!("{:05}", i % 100_000).parse().expect("five digits"))
            .collect();
        Dataset::new(features, targets, ids)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: rows.iter().map(|&i| self.features[i]).collect(),
            targets: rows.iter().map(|&i| self.targets[i]).collect(),
            row_ids: rows.iter().map(|&i| self.row_ids[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ols,
    Tree,
    Forest,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Ols, ModelKind::Tree, ModelKind::Forest];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ols => "ols",
            ModelKind::Tree => "tree",
            ModelKind::Forest => "forest",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Ols => "Ordinary Least Squares",
            ModelKind::Tree => "Decision Tree",
            ModelKind::Forest => "Random Forest",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Ols(OlsParams),
    Tree(TreeParams),
    Forest(ForestParams),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Ols(_) => ModelKind::Ols,
            ModelParams::Tree(_) => ModelKind::Tree,
            ModelParams::Forest(_) => ModelKind::Forest,
        }
    }

    /// Fits on `data`; `seed` only matters for forests.
    pub fn fit(&self, data: &Dataset, seed: u64) -> Result<RegressionModel> {
        Ok(match self {
            ModelParams::Ols(p) => RegressionModel::Ols(fit_ols(data, p)?),
            ModelParams::Tree(p) => RegressionModel::Tree(fit_tree(data, p)?),
            ModelParams::Forest(p) => RegressionModel::Forest(fit_forest(data, p, seed)?),
        })
    }

    /// Compact single-line description used in reports.
    pub fn describe(&self) -> String {
        match self {
            ModelParams::Ols(p) => format!("drop_simplex_column={}", p.drop_simplex_column),
            ModelParams::Tree(p) => p.describe(),
            ModelParams::Forest(p) => format!(
                "n_trees={} max_features={} bootstrap={} {}",
                p.n_trees,
                p.max_features,
                p.bootstrap,
                p.tree.describe()
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressionModel {
    Ols(OlsModel),
    Tree(TreeModel),
    Forest(ForestModel),
}

impl RegressionModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            RegressionModel::Ols(_) => ModelKind::Ols,
            RegressionModel::Tree(_) => ModelKind::Tree,
            RegressionModel::Forest(_) => ModelKind::Forest,
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        let x = check_features(features)?;
        Ok(match self {
            RegressionModel::Ols(m) => m.predict_row(x),
            RegressionModel::Tree(m) => m.predict_row(x),
            RegressionModel::Forest(m) => m.predict_row(x),
        })
    }

    pub fn predict_all(&self, rows: &[Signature]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

/// Free-function form of [`RegressionModel::predict`].
pub fn predict(model: &RegressionModel, features: &[f64]) -> Result<f64> {
    model.predict(features)
}

fn check_features(features: &[f64]) -> Result<&Signature> {
    let x: &Signature = features.try_into().map_err(|_| {
        Error::InvalidFeatures(format!(
            "expected {WORK_TYPE_COUNT} features, got {}",
            features.len()
        ))
    })?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidFeatures("non-finite value".into()));
    }
    Ok(x)
}
