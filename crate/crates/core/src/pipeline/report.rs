use std::path::Path;

use super::artifacts::layout;
use super::{ClusterSummary, EvalRow, EvalScope};
use crate::error::Result;
use crate::ingestion::WorkType;
use crate::io::{finish, writer};
use crate::numeric::fmt_f64;
use crate::regress::ModelKind;
use crate::signature::{render_percent, SignatureMatrix};

pub struct ReportInputs<'a> {
    pub signatures: &'a SignatureMatrix,
    pub clusters: &'a [ClusterSummary],
    pub eval: &'a [EvalRow],
}

/// Writes the human-facing tables under `dir/reports/`. This is the only
/// place values are rounded.
pub fn render_reports(dir: &Path, inputs: &ReportInputs<'_>) -> Result<()> {
    let path = dir.join(layout::TABLE1);
    let mut w = writer(&path)?;
    let mut header = vec!["zone_id"];
    header.extend(WorkType::ALL.iter().map(|t| t.label()));
    header.push("Total Permits");
    w.write_record(&header)?;
    for sig in inputs.signatures.signatures() {
        let mut row = vec![sig.zone_id.to_string()];
        row.extend(sig.proportions.iter().map(|p| render_percent(*p)));
        row.push(sig.total_permits.to_string());
        w.write_record(&row)?;
    }
    finish(w, &path)?;

    let path = dir.join(layout::TABLE2);
    let mut w = writer(&path)?;
    w.write_record(["cluster", "zones", "incidents", "average_response_time_s"])?;
    for s in inputs.clusters.iter().filter(|s| s.retained) {
        w.write_record([
            s.cluster.to_string(),
            s.zones.to_string(),
            s.incidents.to_string(),
            s.mean_response_s.map_or_else(|| "n/a".into(), |m| format!("{m:.0}")),
        ])?;
    }
    finish(w, &path)?;

    let kinds: Vec<ModelKind> = ModelKind::ALL
        .into_iter()
        .filter(|k| inputs.eval.iter().any(|e| e.model == *k))
        .collect();
    let mut scopes: Vec<EvalScope> = Vec::new();
    for e in inputs.eval {
        if !scopes.contains(&e.scope) {
            scopes.push(e.scope);
        }
    }
    let path = dir.join(layout::TABLE3);
    let mut w = writer(&path)?;
    let mut header = vec!["cluster".to_string()];
    header.extend(kinds.iter().map(|k| k.label().to_string()));
    w.write_record(&header)?;
    for scope in scopes {
        let mut row = vec![scope.to_string()];
        for k in &kinds {
            let r2 = inputs
                .eval
                .iter()
                .find(|e| e.scope == scope && e.model == *k)
                .and_then(|e| e.r_squared);
            row.push(r2.map_or_else(|| "n/a".into(), |v| format!("{v:.2}")));
        }
        w.write_record(&row)?;
    }
    finish(w, &path)?;

    let path = dir.join(layout::CLUSTER_SIGNATURES);
    let mut w = writer(&path)?;
    let mut header = vec!["cluster", "retained"];
    header.extend(WorkType::ALL.iter().map(|t| t.name()));
    w.write_record(&header)?;
    for s in inputs.clusters {
        let mut row = vec![s.cluster.to_string(), s.retained.to_string()];
        row.extend(s.mean_signature.iter().map(|p| fmt_f64(*p)));
        w.write_record(&row)?;
    }
    finish(w, &path)
}
