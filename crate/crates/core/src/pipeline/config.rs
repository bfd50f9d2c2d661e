use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cluster::{Init, RestartScope};
use crate::error::{Error, Result};
use crate::ingestion::{ColumnMapping, DateWindow};
use crate::regress::{CvScoring, GridConfig, ModelKind};

/// Everything a run needs. Loaded from TOML; see `mappings/README.md` in the
/// repository for an annotated example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub inputs: InputConfig,
    /// Where artifacts are written. Not part of the reproducible identity of
    /// a run, so it is left out of the manifest and the config hash.
    #[serde(default)]
    pub output: PathBuf,
    #[serde(default = "DateWindow::study_period")]
    pub window: DateWindow,
    #[serde(default)]
    pub ingest: IngestConfig,
    #[serde(default)]
    pub cluster: ClusterConfig,
    #[serde(default)]
    pub regress: RegressConfig,
    /// Clusters holding less than this share of all accepted incidents are
    /// left out of regression.
    #[serde(default = "default_exclusion")]
    pub exclusion_threshold: f64,
}

fn default_exclusion() -> f64 {
    0.03
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub permits: PathBuf,
    pub incidents: PathBuf,
    /// Column mapping file; the canonical schema when absent.
    #[serde(default)]
    pub mapping: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestConfig {
    /// Keep permits whose active interval overlaps the window instead of
    /// requiring the start date inside it.
    pub overlap_window: bool,
    /// Spill rejected rows to `ingest/*_rejected.csv`.
    pub quarantine_rejects: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub convergence_tol: f64,
    pub seed: u64,
    pub init: Init,
    pub restart_scope: RestartScope,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            k_min: 2,
            k_max: 100,
            restarts: 100,
            max_iters: 300,
            convergence_tol: 1e-6,
            seed: 42,
            init: Init::KMeansPlusPlus,
            restart_scope: RestartScope::PerK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegressConfig {
    pub models: Vec<ModelKind>,
    pub folds: usize,
    pub seed: u64,
    pub scoring: CvScoring,
    /// Zones with fewer incidents are flagged and kept out of training.
    pub min_incidents_per_zone: usize,
    /// Also train one model over every retained zone, reported as cluster `all`.
    pub pooled: bool,
    pub grid: GridConfig,
}

impl Default for RegressConfig {
    fn default() -> Self {
        RegressConfig {
            models: ModelKind::ALL.to_vec(),
            folds: 5,
            seed: 42,
            scoring: CvScoring::Pooled,
            min_incidents_per_zone: 10,
            pooled: false,
            grid: GridConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// A config with default parameters for the given inputs.
    pub fn new(permits: impl Into<PathBuf>, incidents: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            inputs: InputConfig {
                permits: permits.into(),
                incidents: incidents.into(),
                mapping: None,
            },
            output: output.into(),
            window: DateWindow::study_period(),
            ingest: IngestConfig::default(),
            cluster: ClusterConfig::default(),
            regress: RegressConfig::default(),
            exclusion_threshold: default_exclusion(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Recovers the config recorded in a run manifest. The output directory
    /// is not recorded and must be set by the caller.
    pub fn from_manifest(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let config = value
            .get("config")
            .ok_or_else(|| Error::parse(path.display().to_string(), "manifest has no config"))?;
        serde_json::from_value(config.clone()).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.permits.as_os_str().is_empty() || self.inputs.incidents.as_os_str().is_empty() {
            return Err(Error::Config("input paths must be non-empty".into()));
        }
        self.validate_params()
    }

    /// Everything [`PipelineConfig::validate`] checks except the input
    /// paths, for stages that start from existing artifacts.
    pub fn validate_params(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.output.as_os_str().is_empty() {
            return bad("output directory must be non-empty".into());
        }
        if self.window.start > self.window.end {
            return bad("window start is after window end".into());
        }
        let c = &self.cluster;
        if c.k_min < 2 || c.k_max < c.k_min {
            return bad(format!("invalid k range {}..={}", c.k_min, c.k_max));
        }
        if c.restarts == 0 || c.max_iters == 0 {
            return bad("restarts and max_iters must be positive".into());
        }
        if !(c.convergence_tol >= 0.0) {
            return bad("convergence_tol must be non-negative".into());
        }
        let r = &self.regress;
        if r.models.is_empty() {
            return bad("no model kinds selected".into());
        }
        if r.folds < 2 {
            return bad("folds must be at least 2".into());
        }
        if r.min_incidents_per_zone == 0 {
            return bad("min_incidents_per_zone must be positive".into());
        }
        for kind in &r.models {
            if r.grid.expand(*kind).is_empty() {
                return bad(format!("empty hyperparameter grid for {kind}"));
            }
        }
        if r.grid.forest_max_features.iter().any(|m| !(1..=crate::WORK_TYPE_COUNT).contains(m)) {
            return bad("forest_max_features must lie in 1..=8".into());
        }
        if r.grid.forest_n_trees.contains(&0) || r.grid.tree_min_samples_leaf.contains(&0) {
            return bad("n_trees and min_samples_leaf must be positive".into());
        }
        if !(0.0..1.0).contains(&self.exclusion_threshold) {
            return bad(format!(
                "exclusion_threshold {} outside [0, 1)",
                self.exclusion_threshold
            ));
        }
        Ok(())
    }

    pub fn mapping(&self) -> Result<ColumnMapping> {
        match &self.inputs.mapping {
            Some(p) => ColumnMapping::load(p),
            None => Ok(ColumnMapping::canonical()),
        }
    }

    /// The config as recorded in the manifest: everything but `output`.
    pub fn reproducible_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("struct").remove("output");
        v
    }

    /// SHA-256 of [`PipelineConfig::reproducible_json`].
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.reproducible_json()).expect("json");
        hex::encode(Sha256::digest(bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_toml_takes_defaults() {
        let c = PipelineConfig::from_toml_str(
            "output = \"out\"\n[inputs]\npermits = \"p.csv\"\nincidents = \"i.csv\"\n",
        )
        .unwrap();
        assert_eq!(c, PipelineConfig::new("p.csv", "i.csv", "out"));
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trips() {
        let mut c = PipelineConfig::new("p.csv", "i.csv", "out");
        c.regress.grid.tree_max_depth.push(crate::regress::DepthLimit(Some(3)));
        c.cluster.init = Init::Uniform;
        assert_eq!(PipelineConfig::from_toml_str(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn hash_ignores_output_only() {
        let a = PipelineConfig::new("p.csv", "i.csv", "out");
        let mut b = a.clone();
        b.output = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.cluster.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn rejects_bad_values() {
        let base = PipelineConfig::new("p.csv", "i.csv", "out");
        let mut c = base.clone();
        c.exclusion_threshold = 1.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = base.clone();
        c.cluster.k_max = 1;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.inputs.permits = PathBuf::new();
        assert!(c.validate().is_err());
        assert!(PipelineConfig::from_toml_str("bogus = 1\n[inputs]\npermits='a'\nincidents='b'").is_err());
    }
}
