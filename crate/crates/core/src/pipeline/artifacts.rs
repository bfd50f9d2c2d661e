//! Inter-stage files. Every float is written in shortest round-trip form and
//! every reader rebuilds exactly what its writer was given.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClusterSummary, EvalRow, TrainedModels, ZonePrediction, ZoneResponse};
use crate::cluster::{ClusteringModel, KSweepReport};
use crate::error::{Error, Result};
use crate::ingestion::{IngestReport, WorkType, ZoneId};
use crate::io::{field, finish, parse_f64, parse_usize, reader, writer};
use crate::numeric::fmt_f64;
use crate::signature::{Signature, SignatureMatrix};
use crate::WORK_TYPE_COUNT;

/// Paths of artifacts relative to the output directory.
pub mod layout {
    pub const PERMITS: &str = "ingest/permits.csv";
    pub const INCIDENTS: &str = "ingest/incidents.csv";
    pub const PERMITS_REPORT: &str = "ingest/permits_report.json";
    pub const INCIDENTS_REPORT: &str = "ingest/incidents_report.json";
    pub const PERMITS_REJECTED: &str = "ingest/permits_rejected.csv";
    pub const INCIDENTS_REJECTED: &str = "ingest/incidents_rejected.csv";
    pub const SIGNATURES: &str = "signatures.csv";
    pub const CLUSTERS: &str = "clusters.csv";
    pub const CLUSTERS_META: &str = "clusters_meta.json";
    pub const KSWEEP: &str = "ksweep.csv";
    pub const ZONE_RESPONSE: &str = "zone_response.csv";
    pub const CLUSTER_RESPONSE: &str = "cluster_response.csv";
    pub const EVAL_REPORT: &str = "eval_report.csv";
    pub const MODELS: &str = "models.json";
    pub const PREDICTIONS: &str = "predictions.csv";
    pub const TABLE1: &str = "reports/table1_signatures.csv";
    pub const TABLE2: &str = "reports/table2_cluster_response.csv";
    pub const TABLE3: &str = "reports/table3_r_squared.csv";
    pub const CLUSTER_SIGNATURES: &str = "reports/cluster_signatures.csv";
    pub const MANIFEST: &str = "manifest.json";
    pub const QUARANTINE: &str = "quarantine";
}

/// `clusters_meta.json`: the selected clustering minus its assignments,
/// which live in `clusters.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMeta {
    pub k: usize,
    pub silhouette: Option<f64>,
    pub inertia: f64,
    pub seed_used: u64,
    pub iterations_run: usize,
    pub centroids: Vec<Signature>,
    pub sweep: KSweepReport,
}

impl ClusterMeta {
    pub fn new(model: &ClusteringModel, sweep: &KSweepReport) -> Self {
        ClusterMeta {
            k: model.k,
            silhouette: model.silhouette,
            inertia: model.inertia,
            seed_used: model.seed_used,
            iterations_run: model.iterations_run,
            centroids: model.centroids.clone(),
            sweep: sweep.clone(),
        }
    }

    pub fn into_model(self, assignments: Vec<usize>) -> ClusteringModel {
        ClusteringModel {
            k: self.k,
            centroids: self.centroids,
            assignments,
            inertia: self.inertia,
            silhouette: self.silhouette,
            seed_used: self.seed_used,
            iterations_run: self.iterations_run,
        }
    }
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub(crate) fn write_models(path: &Path, models: &TrainedModels) -> Result<()> {
    write_json(path, models)
}

pub(crate) fn read_models(path: &Path) -> Result<TrainedModels> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TrainedModels::from_json(&text)
}

pub(crate) fn write_ingest_report(path: &Path, report: &IngestReport) -> Result<()> {
    write_json(path, report)
}

pub(crate) fn read_ingest_report(path: &Path) -> Result<IngestReport> {
    read_json(path)
}

pub(crate) fn write_clusters(dir: &Path, matrix: &SignatureMatrix, model: &ClusteringModel, sweep: &KSweepReport) -> Result<()> {
    let path = dir.join(layout::CLUSTERS);
    let mut w = writer(&path)?;
    w.write_record(["zone_id", "cluster"])?;
    for (z, c) in matrix.zone_ids.iter().zip(&model.assignments) {
        w.write_record([z.as_str(), &c.to_string()])?;
    }
    finish(w, &path)?;

    let path = dir.join(layout::KSWEEP);
    let mut w = writer(&path)?;
    w.write_record(["k", "best_silhouette", "best_inertia", "winning_seed"])?;
    for e in &sweep.entries {
        w.write_record([
            e.k.to_string(),
            fmt_f64(e.best_silhouette),
            fmt_f64(e.best_inertia),
            e.winning_seed.to_string(),
        ])?;
    }
    finish(w, &path)?;

    write_json(&dir.join(layout::CLUSTERS_META), &ClusterMeta::new(model, sweep))
}

/// Reads the clustering back and checks it covers exactly `matrix`'s zones.
pub(crate) fn read_clusters(dir: &Path, matrix: &SignatureMatrix) -> Result<(KSweepReport, ClusteringModel)> {
    let meta: ClusterMeta = read_json(&dir.join(layout::CLUSTERS_META))?;
    let path = dir.join(layout::CLUSTERS);
    let mut r = reader(&path)?;
    let mut zones = Vec::new();
    let mut assignments = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        zones.push(field(&rec, 0, &path)?.parse::<ZoneId>()?);
        let c = parse_usize(field(&rec, 1, &path)?, &path)?;
        if c >= meta.k {
            return Err(Error::parse(path.display().to_string(), format!("cluster {c} >= k")));
        }
        assignments.push(c);
    }
    if zones != matrix.zone_ids {
        return Err(Error::ZoneMismatch(
            "clusters.csv does not list the signature zones in order".into(),
        ));
    }
    let sweep = meta.sweep.clone();
    Ok((sweep, meta.into_model(assignments)))
}

pub(crate) fn write_zone_response(path: &Path, rows: &[ZoneResponse]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["zone_id", "mean_response_s", "incidents", "excluded"])?;
    for r in rows {
        w.write_record([
            r.zone_id.as_str(),
            &fmt_f64(r.mean_response_s),
            &r.incidents.to_string(),
            if r.excluded { "true" } else { "false" },
        ])?;
    }
    finish(w, path)
}

pub(crate) fn write_cluster_response(path: &Path, rows: &[ClusterSummary]) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec![
        "cluster",
        "zones",
        "incidents",
        "incident_share",
        "mean_response_s",
        "retained",
        "training_zones",
    ];
    header.extend(WorkType::ALL.iter().map(|t| t.name()));
    w.write_record(&header)?;
    for s in rows {
        let mut row = vec![
            s.cluster.to_string(),
            s.zones.to_string(),
            s.incidents.to_string(),
            fmt_f64(s.incident_share),
            s.mean_response_s.map(fmt_f64).unwrap_or_default(),
            s.retained.to_string(),
            s.training_zones.to_string(),
        ];
        row.extend(s.mean_signature.iter().map(|p| fmt_f64(*p)));
        w.write_record(&row)?;
    }
    finish(w, path)
}

pub(crate) fn read_cluster_response(path: &Path) -> Result<Vec<ClusterSummary>> {
    let mut r = reader(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i| field(&rec, i, path);
        let mut mean_signature = [0.0; WORK_TYPE_COUNT];
        for (t, v) in mean_signature.iter_mut().enumerate() {
            *v = parse_f64(f(7 + t)?, path)?;
        }
        let mean = f(4)?;
        out.push(ClusterSummary {
            cluster: parse_usize(f(0)?, path)?,
            zones: parse_usize(f(1)?, path)?,
            incidents: parse_usize(f(2)?, path)?,
            incident_share: parse_f64(f(3)?, path)?,
            mean_response_s: if mean.is_empty() { None } else { Some(parse_f64(mean, path)?) },
            retained: parse_bool(f(5)?, path)?,
            training_zones: parse_usize(f(6)?, path)?,
            mean_signature,
        });
    }
    Ok(out)
}

fn parse_bool(s: &str, path: &Path) -> Result<bool> {
    s.parse()
        .map_err(|_| Error::parse(path.display().to_string(), format!("bad flag `{s}`")))
}

pub(crate) fn write_eval(path: &Path, rows: &[EvalRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["cluster", "model", "r_squared", "params"])?;
    for e in rows {
        w.write_record([
            e.scope.to_string(),
            e.model.name().to_string(),
            e.r_squared.map(fmt_f64).unwrap_or_default(),
            e.params.clone(),
        ])?;
    }
    finish(w, path)
}

pub(crate) fn read_eval(path: &Path) -> Result<Vec<EvalRow>> {
    let mut r = reader(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let r2 = field(&rec, 2, path)?;
        out.push(EvalRow {
            scope: field(&rec, 0, path)?.parse()?,
            model: field(&rec, 1, path)?.parse()?,
            r_squared: if r2.is_empty() { None } else { Some(parse_f64(r2, path)?) },
            params: field(&rec, 3, path)?.to_string(),
        });
    }
    Ok(out)
}

pub(crate) fn write_predictions(path: &Path, rows: &[(ZoneId, ZonePrediction)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["zone_id", "cluster", "predicted_response_s", "status"])?;
    for (z, p) in rows {
        w.write_record([
            z.as_str(),
            &p.cluster.to_string(),
            &p.predicted_s.map(fmt_f64).unwrap_or_default(),
            p.status(),
        ])?;
    }
    finish(w, path)
}
