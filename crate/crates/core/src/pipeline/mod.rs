//! End-to-end orchestration.
//!
//! Each stage is a plain function over immutable inputs. [`run_pipeline`]
//! chains them in memory and writes every artifact; the `stage_*` functions
//! in [`stages`] run one stage from the files of the previous one, and give
//! the same bytes.

mod artifacts;
mod config;
mod report;
mod run;
pub mod stages;
mod train;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cluster::{nearest_centroid, sweep_k, ClusteringModel, KMeansParams, KSweepReport};
use crate::error::{Error, Result};
use crate::ingestion::{IncidentRecord, ZoneId};
use crate::numeric::shifted_mean;
use crate::signature::{Signature, SignatureMatrix};
use crate::WORK_TYPE_COUNT;

pub use artifacts::{layout, ClusterMeta};
pub use config::{ClusterConfig, IngestConfig, InputConfig, PipelineConfig, RegressConfig};
pub use report::{render_reports, ReportInputs};
pub use run::{run_pipeline, Manifest, RowCounts, RunArtifacts, Volatile};
pub use train::{train_models, ClusterModels, EvalRow, EvalScope, FittedModel, TrainedModels, MODELS_FORMAT_VERSION};

/// Mean response time of one zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneResponse {
    pub zone_id: ZoneId,
    pub mean_response_s: f64,
    pub incidents: usize,
    /// Fewer than the minimum incident count; not used for training.
    pub excluded: bool,
}

/// Per-zone mean response over `incidents`, sorted by zone.
pub fn aggregate_response(incidents: &[IncidentRecord], min_count: usize) -> Vec<ZoneResponse> {
    let mut by_zone: BTreeMap<&ZoneId, Vec<f64>> = BTreeMap::new();
    for i in incidents {
        by_zone.entry(&i.zone_id).or_default().push(i.response_time_s);
    }
    by_zone
        .into_iter()
        .map(|(zone, times)| ZoneResponse {
            zone_id: zone.clone(),
            mean_response_s: shifted_mean(times.iter().copied()).expect("non-empty"),
            incidents: times.len(),
            excluded: times.len() < min_count,
        })
        .collect()
}

/// One row of the per-cluster response table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster: usize,
    pub zones: usize,
    pub incidents: usize,
    /// Share of every accepted incident, including those in zones without
    /// permits (which belong to no cluster).
    pub incident_share: f64,
    /// Mean over the cluster's incidents; `None` when it has none.
    pub mean_response_s: Option<f64>,
    pub retained: bool,
    /// Member zones meeting the per-zone incident minimum.
    pub training_zones: usize,
    pub mean_signature: Signature,
}

/// Groups incidents and zones by cluster and applies the exclusion rule: a
/// cluster is retained iff its incident share is at least `threshold`.
pub fn summarize_clusters(
    matrix: &SignatureMatrix,
    assignments: &[usize],
    k: usize,
    incidents: &[IncidentRecord],
    responses: &[ZoneResponse],
    threshold: f64,
) -> Result<Vec<ClusterSummary>> {
    if assignments.len() != matrix.len() {
        return Err(Error::ZoneMismatch(format!(
            "{} assignments for {} zones",
            assignments.len(),
            matrix.len()
        )));
    }
    let mut times: Vec<Vec<f64>> = vec![Vec::new(); k];
    for i in incidents {
        if let Some(z) = matrix.position(&i.zone_id) {
            times[assignments[z]].push(i.response_time_s);
        }
    }
    let total = incidents.len();
    let mut out = Vec::with_capacity(k);
    for (c, times) in times.iter().enumerate() {
        let members: Vec<usize> = (0..matrix.len()).filter(|&z| assignments[z] == c).collect();
        let mut mean_signature = [0.0; WORK_TYPE_COUNT];
        for (t, slot) in mean_signature.iter_mut().enumerate() {
            let col = members.iter().map(|&z| matrix.rows[z][t]);
            *slot = shifted_mean(col).unwrap_or(0.0);
        }
        let training_zones = members
            .iter()
            .filter(|&&z| {
                responses
                    .binary_search_by(|r| r.zone_id.cmp(&matrix.zone_ids[z]))
                    .is_ok_and(|i| !responses[i].excluded)
            })
            .count();
        let share = if total == 0 { 0.0 } else { times.len() as f64 / total as f64 };
        out.push(ClusterSummary {
            cluster: c,
            zones: members.len(),
            incidents: times.len(),
            incident_share: share,
            mean_response_s: shifted_mean(times.iter().copied()),
            retained: share >= threshold,
            training_zones,
            mean_signature,
        });
    }
    Ok(out)
}

/// Sweeps k over the signature matrix and returns the selected clustering.
pub fn cluster_zones(matrix: &SignatureMatrix, config: &ClusterConfig) -> Result<(KSweepReport, ClusteringModel)> {
    let template = KMeansParams {
        k: config.k_min,
        restarts: config.restarts,
        max_iters: config.max_iters,
        convergence_tol: config.convergence_tol,
        seed: config.seed,
        init: config.init,
    };
    let out = sweep_k(&matrix.rows, config.k_min, config.k_max, &template, config.restart_scope)?;
    Ok((out.report, out.model))
}

/// Outcome of [`predict_zone`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonePrediction {
    pub cluster: usize,
    /// `None` when the cluster has no trained model.
    pub predicted_s: Option<f64>,
}

impl ZonePrediction {
    pub fn status(&self) -> &'static str {
        if self.predicted_s.is_some() {
            "ok"
        } else {
            "no_model_for_cluster"
        }
    }
}

/// Assigns `signature` to its nearest centroid (lowest index on ties) and
/// applies that cluster's best model.
pub fn predict_zone(signature: &Signature, centroids: &[Signature], models: &TrainedModels) -> Result<ZonePrediction> {
    if centroids.is_empty() {
        return Err(Error::InvalidDataset("no centroids".into()));
    }
    if signature.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidFeatures("non-finite signature".into()));
    }
    let cluster = nearest_centroid(signature, centroids);
    let predicted_s = match models.best_for(cluster) {
        Some(m) => Some(m.predict(signature)?),
        None => None,
    };
    Ok(ZonePrediction { cluster, predicted_s })
}

/// [`predict_zone`] for every zone of `matrix`.
pub fn predict_all(
    matrix: &SignatureMatrix,
    centroids: &[Signature],
    models: &TrainedModels,
) -> Result<Vec<(ZoneId, ZonePrediction)>> {
    matrix
        .zone_ids
        .iter()
        .zip(&matrix.rows)
        .map(|(z, s)| Ok((z.clone(), predict_zone(s, centroids, models)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::{OlsModel, RegressionModel};
    use chrono::NaiveDate;

    fn incident(z: &str, t: f64) -> IncidentRecord {
        IncidentRecord {
            zone_id: z.parse().unwrap(),
            timestamp: NaiveDate::from_ymd_opt(2015, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap(),
            response_time_s: t,
        }
    }

    #[test]
    fn aggregate_means_and_flags() {
        let mut inc = vec![incident("10001", 300.0), incident("10001", 324.0)];
        inc.extend((0..3).map(|_| incident("10002", 100.0)));
        let r = aggregate_response(&inc, 2);
        assert_eq!(r[0].mean_response_s, 312.0);
        assert!(!r[0].excluded);
        let r = aggregate_response(&inc, 10);
        assert_eq!(r[1].incidents, 3);
        assert!(r[1].excluded);
        assert!(aggregate_response(&[], 10).is_empty());
    }

    fn constant_models(cluster: usize, value: f64) -> TrainedModels {
        let model = RegressionModel::Ols(OlsModel {
            coefficients: [0.0; 8],
            intercept: value,
        });
        TrainedModels {
            format_version: MODELS_FORMAT_VERSION,
            clusters: vec![ClusterModels {
                cluster,
                training_rows: 12,
                best: crate::regress::ModelKind::Ols,
                fits: vec![FittedModel {
                    kind: crate::regress::ModelKind::Ols,
                    params: crate::regress::ModelParams::Ols(Default::default()),
                    cv_r_squared: None,
                    model,
                }],
            }],
            pooled: None,
        }
    }

    #[test]
    fn prediction_at_a_centroid() {
        let a = [0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let b = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5];
        let models = constant_models(1, 288.0);
        let p = predict_zone(&b, &[a, b], &models).unwrap();
        assert_eq!(p, ZonePrediction { cluster: 1, predicted_s: Some(288.0) });
        let p = predict_zone(&a, &[a, b], &models).unwrap();
        assert_eq!(p.cluster, 0);
        assert_eq!(p.status(), "no_model_for_cluster");
    }

    #[test]
    fn equidistant_goes_to_lower_index() {
        let a = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let b = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let mid = [0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let p = predict_zone(&mid, &[a, b], &constant_models(0, 1.0)).unwrap();
        assert_eq!(p.cluster, 0);
        let p = predict_zone(&mid, &[b, a], &constant_models(0, 1.0)).unwrap();
        assert_eq!(p.cluster, 0);
    }

    #[test]
    fn exclusion_is_by_incident_share() {
        let matrix = SignatureMatrix::from_rows(vec![[0.125; 8]; 3]);
        let z = |i: usize| matrix.zone_ids[i].as_str().to_string();
        let mut inc: Vec<IncidentRecord> = (0..97).map(|_| incident(&z(0), 10.0)).collect();
        inc.extend((0..3).map(|_| incident(&z(2), 20.0)));
        let resp = aggregate_response(&inc, 10);
        let s = summarize_clusters(&matrix, &[0, 0, 1], 2, &inc, &resp, 0.03).unwrap();
        assert!(s[0].retained && s[1].retained);
        assert_eq!(s[1].incident_share, 0.03);
        assert_eq!(s[0].training_zones, 1);
        assert_eq!(s[1].training_zones, 0);
        let s = summarize_clusters(&matrix, &[0, 0, 1], 2, &inc, &resp, 0.031).unwrap();
        assert!(s[0].retained && !s[1].retained);
        assert_eq!(s[1].mean_response_s, Some(20.0));
    }
}
