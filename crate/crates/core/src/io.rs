//! On-disk schemas for records and signatures.
//!
//! Floats are written as the shortest decimal that parses back to the same
//! value, so every file here round-trips exactly.

use std::path::Path;

use crate::error::{Error, Result};
use crate::ingestion::{
    parse_incidents, parse_permits, ColumnMapping, DateWindow, IncidentRecord, IngestOptions,
    PermitRecord, WorkType, ZoneId,
};
use crate::numeric::fmt_f64;
use crate::signature::{Signature, SignatureMatrix};
use crate::synth::ZoneTruth;
use crate::WORK_TYPE_COUNT;

pub const SIGNATURE_HEADER: [&str; 10] = [
    "zone_id",
    "new_building",
    "foundation",
    "construction_equipment",
    "demolition",
    "alteration",
    "equipment_work",
    "plumbing",
    "signage",
    "total_permits",
];

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.f";

pub(crate) fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub(crate) fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Reader::from_reader(file))
}

pub(crate) fn field<'a>(rec: &'a csv::StringRecord, i: usize, path: &Path) -> Result<&'a str> {
    rec.get(i)
        .ok_or_else(|| Error::parse(path.display().to_string(), format!("missing column {i}")))
}

pub(crate) fn parse_f64(s: &str, path: &Path) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::parse(path.display().to_string(), format!("bad number `{s}`")))
}

pub(crate) fn parse_usize(s: &str, path: &Path) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::parse(path.display().to_string(), format!("bad count `{s}`")))
}

/// Writes permits in the canonical schema read by [`ColumnMapping::canonical`].
pub fn write_permits(path: &Path, permits: &[PermitRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "zone_id",
        "borough",
        "work_type",
        "work_subtype",
        "start_date",
        "expiration_date",
    ])?;
    for p in permits {
        w.write_record([
            p.zone_id.as_str(),
            p.borough.as_deref().unwrap_or(""),
            p.work_type.name(),
            p.work_subtype.as_deref().unwrap_or(""),
            &p.start_date.format("%Y-%m-%d").to_string(),
            &p.expiration_date
                .map(|d| d.format("%Y-%m-%d").to_string())
                .unwrap_or_default(),
        ])?;
    }
    finish(w, path)
}

pub fn write_incidents(path: &Path, incidents: &[IncidentRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["zone_id", "timestamp", "response_time_s"])?;
    for i in incidents {
        w.write_record([
            i.zone_id.as_str(),
            &i.timestamp.format(TIMESTAMP_FORMAT).to_string(),
            &fmt_f64(i.response_time_s),
        ])?;
    }
    finish(w, path)
}

/// Reads a canonical permit file; every row is expected to be valid.
pub fn read_permits(path: &Path) -> Result<Vec<PermitRecord>> {
    let (recs, report) = parse_permits(
        path,
        &ColumnMapping::canonical(),
        &DateWindow::unbounded(),
        &IngestOptions::default(),
    )?;
    expect_clean(path, report.rows_rejected)?;
    Ok(recs)
}

pub fn read_incidents(path: &Path) -> Result<Vec<IncidentRecord>> {
    let (recs, report) = parse_incidents(
        path,
        &ColumnMapping::canonical(),
        &DateWindow::unbounded(),
        &IngestOptions::default(),
    )?;
    expect_clean(path, report.rows_rejected)?;
    Ok(recs)
}

fn expect_clean(path: &Path, rejected: usize) -> Result<()> {
    if rejected > 0 {
        return Err(Error::parse(
            path.display().to_string(),
            format!("{rejected} rows failed validation in a normalized file"),
        ));
    }
    Ok(())
}

pub fn write_signatures(path: &Path, m: &SignatureMatrix) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SIGNATURE_HEADER)?;
    for sig in m.signatures() {
        let mut row = vec![sig.zone_id.to_string()];
        row.extend(sig.proportions.iter().map(|p| fmt_f64(*p)));
        row.push(sig.total_permits.to_string());
        w.write_record(&row)?;
    }
    finish(w, path)
}

pub fn read_signatures(path: &Path) -> Result<SignatureMatrix> {
    let mut r = reader(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SIGNATURE_HEADER {
        return Err(Error::parse(path.display().to_string(), "unexpected signature header"));
    }
    let mut m = SignatureMatrix::default();
    for rec in r.records() {
        let rec = rec?;
        let zone: ZoneId = field(&rec, 0, path)?.parse()?;
        let mut row: Signature = [0.0; WORK_TYPE_COUNT];
        for (t, v) in row.iter_mut().enumerate() {
            *v = parse_f64(field(&rec, t + 1, path)?, path)?;
        }
        if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::parse(
                path.display().to_string(),
                format!("zone {zone} is not a valid signature"),
            ));
        }
        let total = field(&rec, 9, path)?
            .parse::<u64>()
            .map_err(|e| Error::parse(path.display().to_string(), e))?;
        if let Some(last) = m.zone_ids.last() {
            if *last >= zone {
                return Err(Error::parse(
                    path.display().to_string(),
                    format!("zones not strictly sorted at {zone}"),
                ));
            }
        }
        m.zone_ids.push(zone);
        m.rows.push(row);
        m.totals.push(total);
    }
    Ok(m)
}

/// `zone_id,true_cluster,true_mean_response,<eight true proportions>`.
pub fn write_truth(path: &Path, truth: &[ZoneTruth]) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["zone_id", "true_cluster", "true_mean_response"];
    header.extend(WorkType::ALL.iter().map(|t| t.name()));
    w.write_record(&header)?;
    for t in truth {
        let mut row = vec![
            t.zone_id.to_string(),
            t.true_cluster.to_string(),
            fmt_f64(t.true_mean_response),
        ];
        row.extend(t.true_signature.iter().map(|p| fmt_f64(*p)));
        w.write_record(&row)?;
    }
    finish(w, path)
}

pub fn read_truth(path: &Path) -> Result<Vec<ZoneTruth>> {
    let mut r = reader(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut sig = [0.0; WORK_TYPE_COUNT];
        for (t, v) in sig.iter_mut().enumerate() {
            *v = parse_f64(field(&rec, 3 + t, path)?, path)?;
        }
        out.push(ZoneTruth {
            zone_id: field(&rec, 0, path)?.parse()?,
            true_cluster: parse_usize(field(&rec, 1, path)?, path)?,
            true_mean_response: parse_f64(field(&rec, 2, path)?, path)?,
            true_signature: sig,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::signatures_from_permits;
    use crate::synth::{generate, SyntheticSpec};

    #[test]
    fn synthetic_files_round_trip() {
        let spec = SyntheticSpec {
            n_zones: 12,
            n_clusters: 3,
            permits_per_zone: (20, 40),
            incidents_per_zone: (3, 6),
            ..SyntheticSpec::planted(4)
        };
        let city = generate(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (p, i, s, t) = (
            dir.path().join("p.csv"),
            dir.path().join("i.csv"),
            dir.path().join("s.csv"),
            dir.path().join("t.csv"),
        );
        write_permits(&p, &city.permits).unwrap();
        write_incidents(&i, &city.incidents).unwrap();
        write_truth(&t, &city.truth).unwrap();
        assert_eq!(read_permits(&p).unwrap(), city.permits);
        assert_eq!(read_incidents(&i).unwrap(), city.incidents);
        assert_eq!(read_truth(&t).unwrap(), city.truth);

        let m = signatures_from_permits(&city.permits).unwrap();
        write_signatures(&s, &m).unwrap();
        assert_eq!(read_signatures(&s).unwrap(), m);
        let header = std::fs::read_to_string(&s).unwrap();
        assert!(header.starts_with(
            "zone_id,new_building,foundation,construction_equipment,demolition,alteration,equipment_work,plumbing,signage,total_permits\n"
        ));
    }
}
