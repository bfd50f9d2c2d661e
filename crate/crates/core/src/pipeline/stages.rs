//! Single stages over an artifact directory.
//!
//! Each stage writes its artifacts under `dir`; the matching `load_*`
//! function reads them back for the next stage. Chaining stages through the
//! files produces the same bytes as [`super::run_pipeline`].

use std::path::Path;

use super::artifacts::{self, layout};
use super::{
    aggregate_response, cluster_zones, predict_all, render_reports, summarize_clusters, train_models,
    ClusterConfig, ClusterSummary, EvalRow, PipelineConfig, RegressConfig, ReportInputs, TrainedModels,
    ZonePrediction, ZoneResponse,
};
use crate::cluster::{ClusteringModel, KSweepReport};
use crate::error::{Error, Result};
use crate::ingestion::{parse_incidents, parse_permits, IncidentRecord, IngestOptions, IngestReport, PermitRecord, ZoneId};
use crate::signature::{signatures_from_permits, Signature, SignatureMatrix};

/// Normalized, validated records and their ingest reports.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub permits: Vec<PermitRecord>,
    pub incidents: Vec<IncidentRecord>,
    pub permit_report: IngestReport,
    pub incident_report: IngestReport,
}

/// Aggregated responses and the per-cluster summary with exclusion flags.
#[derive(Debug, Clone)]
pub struct Aggregated {
    pub responses: Vec<ZoneResponse>,
    pub clusters: Vec<ClusterSummary>,
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn ingest(config: &PipelineConfig, dir: &Path) -> Result<Ingested> {
    let mapping = config.mapping()?;
    mkdir(&dir.join("ingest"))?;
    let spill = |name: &str| config.ingest.quarantine_rejects.then(|| dir.join(name));
    let (permits, permit_report) = parse_permits(
        &config.inputs.permits,
        &mapping,
        &config.window,
        &IngestOptions {
            overlap_window: config.ingest.overlap_window,
            quarantine: spill(layout::PERMITS_REJECTED),
        },
    )?;
    let (incidents, incident_report) = parse_incidents(
        &config.inputs.incidents,
        &mapping,
        &config.window,
        &IngestOptions {
            overlap_window: false,
            quarantine: spill(layout::INCIDENTS_REJECTED),
        },
    )?;
    crate::io::write_permits(&dir.join(layout::PERMITS), &permits)?;
    crate::io::write_incidents(&dir.join(layout::INCIDENTS), &incidents)?;
    artifacts::write_ingest_report(&dir.join(layout::PERMITS_REPORT), &permit_report)?;
    artifacts::write_ingest_report(&dir.join(layout::INCIDENTS_REPORT), &incident_report)?;
    log::info!(
        "ingested {}/{} permits, {}/{} incidents",
        permit_report.rows_accepted,
        permit_report.rows_read,
        incident_report.rows_accepted,
        incident_report.rows_read
    );
    Ok(Ingested {
        permits,
        incidents,
        permit_report,
        incident_report,
    })
}

pub fn load_ingested(dir: &Path) -> Result<Ingested> {
    Ok(Ingested {
        permits: load_permits(dir)?,
        incidents: load_incidents(dir)?,
        permit_report: artifacts::read_ingest_report(&dir.join(layout::PERMITS_REPORT))?,
        incident_report: artifacts::read_ingest_report(&dir.join(layout::INCIDENTS_REPORT))?,
    })
}

pub fn load_permits(dir: &Path) -> Result<Vec<PermitRecord>> {
    crate::io::read_permits(&dir.join(layout::PERMITS))
}

pub fn load_incidents(dir: &Path) -> Result<Vec<IncidentRecord>> {
    crate::io::read_incidents(&dir.join(layout::INCIDENTS))
}

pub fn signatures(dir: &Path, permits: &[PermitRecord]) -> Result<SignatureMatrix> {
    let matrix = signatures_from_permits(permits)?;
    crate::io::write_signatures(&dir.join(layout::SIGNATURES), &matrix)?;
    log::info!("{} zone signatures", matrix.len());
    Ok(matrix)
}

pub fn load_signatures(dir: &Path) -> Result<SignatureMatrix> {
    crate::io::read_signatures(&dir.join(layout::SIGNATURES))
}

pub fn cluster(dir: &Path, matrix: &SignatureMatrix, config: &ClusterConfig) -> Result<(KSweepReport, ClusteringModel)> {
    let (sweep, model) = cluster_zones(matrix, config)?;
    artifacts::write_clusters(dir, matrix, &model, &sweep)?;
    log::info!(
        "selected k = {} (silhouette {:?}) from k = {}..={}",
        model.k,
        model.silhouette,
        config.k_min,
        sweep.effective_k_max
    );
    Ok((sweep, model))
}

pub fn load_clusters(dir: &Path, matrix: &SignatureMatrix) -> Result<(KSweepReport, ClusteringModel)> {
    artifacts::read_clusters(dir, matrix)
}

/// Per-zone means and cluster exclusion. Fails with `no_incidents` when no
/// incident survived ingestion.
pub fn aggregate(
    dir: &Path,
    matrix: &SignatureMatrix,
    clustering: &ClusteringModel,
    incidents: &[IncidentRecord],
    config: &PipelineConfig,
) -> Result<Aggregated> {
    if incidents.is_empty() {
        return Err(Error::NoIncidents);
    }
    let responses = aggregate_response(incidents, config.regress.min_incidents_per_zone);
    let clusters = summarize_clusters(
        matrix,
        &clustering.assignments,
        clustering.k,
        incidents,
        &responses,
        config.exclusion_threshold,
    )?;
    artifacts::write_zone_response(&dir.join(layout::ZONE_RESPONSE), &responses)?;
    artifacts::write_cluster_response(&dir.join(layout::CLUSTER_RESPONSE), &clusters)?;
    for s in clusters.iter().filter(|s| !s.retained) {
        log::info!(
            "cluster {} excluded: {:.2}% of incidents",
            s.cluster,
            100.0 * s.incident_share
        );
    }
    Ok(Aggregated { responses, clusters })
}

pub fn train(
    dir: &Path,
    matrix: &SignatureMatrix,
    clustering: &ClusteringModel,
    aggregated: &Aggregated,
    config: &RegressConfig,
) -> Result<(TrainedModels, Vec<EvalRow>)> {
    let (models, eval) = train_models(
        matrix,
        &clustering.assignments,
        &aggregated.clusters,
        &aggregated.responses,
        config,
    )?;
    artifacts::write_models(&dir.join(layout::MODELS), &models)?;
    artifacts::write_eval(&dir.join(layout::EVAL_REPORT), &eval)?;
    Ok((models, eval))
}

pub fn load_models(dir: &Path) -> Result<TrainedModels> {
    artifacts::read_models(&dir.join(layout::MODELS))
}

pub fn load_eval(dir: &Path) -> Result<Vec<EvalRow>> {
    artifacts::read_eval(&dir.join(layout::EVAL_REPORT))
}

pub fn load_cluster_summaries(dir: &Path) -> Result<Vec<ClusterSummary>> {
    artifacts::read_cluster_response(&dir.join(layout::CLUSTER_RESPONSE))
}

/// Centroids from `clusters_meta.json`, without needing the zone list.
pub fn load_centroids(dir: &Path) -> Result<Vec<Signature>> {
    let meta: artifacts::ClusterMeta = artifacts::read_json(&dir.join(layout::CLUSTERS_META))?;
    Ok(meta.centroids)
}

pub fn predict(
    dir: &Path,
    matrix: &SignatureMatrix,
    centroids: &[Signature],
    models: &TrainedModels,
) -> Result<Vec<(ZoneId, ZonePrediction)>> {
    let rows = predict_all(matrix, centroids, models)?;
    artifacts::write_predictions(&dir.join(layout::PREDICTIONS), &rows)?;
    Ok(rows)
}

pub fn report(dir: &Path, matrix: &SignatureMatrix, clusters: &[ClusterSummary], eval: &[EvalRow]) -> Result<()> {
    render_reports(
        dir,
        &ReportInputs {
            signatures: matrix,
            clusters,
            eval,
        },
    )
}
