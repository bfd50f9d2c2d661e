use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::artifacts::{layout, write_json};
use super::stages::{self, Aggregated, Ingested};
use super::{EvalRow, PipelineConfig, TrainedModels, ZonePrediction};
use crate::cluster::{ClusteringModel, KSweepReport};
use crate::error::{Error, Result};
use crate::ingestion::ZoneId;
use crate::signature::SignatureMatrix;

/// Everything one run produced, as written to disk.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub ingested: Ingested,
    pub signatures: SignatureMatrix,
    pub sweep: KSweepReport,
    pub clustering: ClusteringModel,
    pub aggregated: Aggregated,
    pub models: TrainedModels,
    pub eval: Vec<EvalRow>,
    pub predictions: Vec<(ZoneId, ZonePrediction)>,
    pub manifest: Manifest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub library_version: String,
    /// SHA-256 of `config`.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub rows: RowCounts,
    /// SHA-256 of every other artifact, by relative path.
    pub artifacts: BTreeMap<String, String>,
    /// The only field that differs between identical runs.
    pub volatile: Volatile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowCounts {
    pub permits_read: usize,
    pub permits_accepted: usize,
    pub incidents_read: usize,
    pub incidents_accepted: usize,
    pub zones: usize,
    pub selected_k: usize,
    pub retained_clusters: usize,
    pub training_zones: usize,
    pub clusters_with_model: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Volatile {
    pub created_at: String,
    pub stage_millis: BTreeMap<String, u64>,
}

const STAGING: &str = ".staging";

/// Runs every stage and writes all artifacts to `config.output`.
///
/// Work happens in `output/.staging` and is moved into place on success; on
/// failure the partial artifacts move to `output/quarantine` alongside an
/// `error.txt` naming the failed stage, and the error is returned tagged
/// with that stage.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunArtifacts> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let out = &config.output;
    let staging = out.join(STAGING);
    reset_dir(&staging)?;
    match execute(config, &staging) {
        Ok(artifacts) => {
            publish(&staging, out)?;
            Ok(artifacts)
        }
        Err(e) => {
            if let Err(q) = quarantine(&staging, out, &e) {
                log::error!("could not quarantine partial artifacts: {q}");
            }
            Err(e)
        }
    }
}

fn execute(config: &PipelineConfig, dir: &Path) -> Result<RunArtifacts> {
    let mut timings = BTreeMap::new();
    let mut timed = |name: &'static str, start: Instant| {
        timings.insert(name.to_string(), start.elapsed().as_millis() as u64);
    };

    let t = Instant::now();
    let ingested = stages::ingest(config, dir).map_err(|e| e.in_stage("ingest"))?;
    timed("ingest", t);

    let t = Instant::now();
    let signatures = stages::signatures(dir, &ingested.permits).map_err(|e| e.in_stage("signatures"))?;
    timed("signatures", t);

    let t = Instant::now();
    let (sweep, clustering) =
        stages::cluster(dir, &signatures, &config.cluster).map_err(|e| e.in_stage("cluster"))?;
    timed("cluster", t);

    let t = Instant::now();
    let aggregated = stages::aggregate(dir, &signatures, &clustering, &ingested.incidents, config)
        .map_err(|e| e.in_stage("aggregate"))?;
    timed("aggregate", t);

    let t = Instant::now();
    let (models, eval) = stages::train(dir, &signatures, &clustering, &aggregated, &config.regress)
        .map_err(|e| e.in_stage("train"))?;
    timed("train", t);

    let t = Instant::now();
    let predictions = stages::predict(dir, &signatures, &clustering.centroids, &models)
        .map_err(|e| e.in_stage("predict"))?;
    timed("predict", t);

    let t = Instant::now();
    stages::report(dir, &signatures, &aggregated.clusters, &eval).map_err(|e| e.in_stage("report"))?;
    timed("report", t);

    let rows = RowCounts {
        permits_read: ingested.permit_report.rows_read,
        permits_accepted: ingested.permit_report.rows_accepted,
        incidents_read: ingested.incident_report.rows_read,
        incidents_accepted: ingested.incident_report.rows_accepted,
        zones: signatures.len(),
        selected_k: clustering.k,
        retained_clusters: aggregated.clusters.iter().filter(|c| c.retained).count(),
        training_zones: aggregated
            .clusters
            .iter()
            .filter(|c| c.retained)
            .map(|c| c.training_zones)
            .sum(),
        clusters_with_model: models.clusters.len(),
    };
    let manifest = Manifest {
        format_version: 1,
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.hash(),
        config: config.reproducible_json(),
        seeds: BTreeMap::from([
            ("cluster".to_string(), config.cluster.seed),
            ("regress".to_string(), config.regress.seed),
        ]),
        rows,
        artifacts: hash_tree(dir).map_err(|e| e.in_stage("manifest"))?,
        volatile: Volatile {
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            stage_millis: timings,
        },
    };
    write_json(&dir.join(layout::MANIFEST), &manifest).map_err(|e| e.in_stage("manifest"))?;

    Ok(RunArtifacts {
        ingested,
        signatures,
        sweep,
        clustering,
        aggregated,
        models,
        eval,
        predictions,
        manifest,
    })
}

/// SHA-256 of each file below `root`, keyed by `/`-separated relative path.
pub(crate) fn hash_tree(root: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for path in files_below(root)? {
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let rel = path
            .strip_prefix(root)
            .expect("below root")
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        out.insert(rel, hex::encode(Sha256::digest(bytes)));
    }
    Ok(out)
}

fn files_below(root: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push(path);
            }
        }
    }
    files.sort();
    Ok(files)
}

fn reset_dir(dir: &Path) -> Result<()> {
    remove(dir)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn remove(path: &Path) -> Result<()> {
    let r = if path.is_dir() {
        std::fs::remove_dir_all(path)
    } else if path.exists() {
        std::fs::remove_file(path)
    } else {
        return Ok(());
    };
    r.map_err(|e| Error::io(path, e))
}

fn publish(staging: &Path, out: &Path) -> Result<()> {
    remove(&out.join(layout::QUARANTINE))?;
    for entry in std::fs::read_dir(staging).map_err(|e| Error::io(staging, e))? {
        let entry = entry.map_err(|e| Error::io(staging, e))?;
        let target = out.join(entry.file_name());
        remove(&target)?;
        std::fs::rename(entry.path(), &target).map_err(|e| Error::io(&target, e))?;
    }
    std::fs::remove_dir(staging).map_err(|e| Error::io(staging, e))
}

fn quarantine(staging: &Path, out: &Path, err: &Error) -> Result<()> {
    let q = out.join(layout::QUARANTINE);
    remove(&q)?;
    std::fs::rename(staging, &q).map_err(|e| Error::io(&q, e))?;
    let stage = match err {
        Error::Stage { stage, .. } => stage,
        _ => "unknown",
    };
    let text = format!("stage: {stage}\nerror: {err}\n");
    std::fs::write(q.join("error.txt"), text).map_err(|e| Error::io(&q, e))
}
