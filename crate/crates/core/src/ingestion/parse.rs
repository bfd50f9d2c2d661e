use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use csv::{ByteRecord, StringRecord};

use super::mapping::WorkTypeLookup;
use super::{ColumnMapping, DateWindow, IncidentRecord, IngestReport, PermitRecord, ZoneId};
use crate::error::{Error, Result};

/// Why a row was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RejectReason {
    MalformedRow,
    MissingField,
    NonAsciiKey,
    InvalidZone,
    UnknownWorkType,
    InvalidDate,
    InvertedDates,
    OutOfWindow,
    InvalidDuration,
    NegativeDuration,
    Filtered,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::MalformedRow => "malformed_row",
            RejectReason::MissingField => "missing_field",
            RejectReason::NonAsciiKey => "non_ascii_key",
            RejectReason::InvalidZone => "invalid_zone",
            RejectReason::UnknownWorkType => "unknown_work_type",
            RejectReason::InvalidDate => "invalid_date",
            RejectReason::InvertedDates => "inverted_dates",
            RejectReason::OutOfWindow => "out_of_window",
            RejectReason::InvalidDuration => "invalid_duration",
            RejectReason::NegativeDuration => "negative_duration",
            RejectReason::Filtered => "filtered",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Count a permit when its `[start, expiration]` interval overlaps the
    /// window instead of requiring the start date inside it.
    pub overlap_window: bool,
    /// Write every rejected row, with its reason, to this CSV file.
    pub quarantine: Option<PathBuf>,
}

pub fn parse_permits(
    path: &Path,
    mapping: &ColumnMapping,
    window: &DateWindow,
    options: &IngestOptions,
) -> Result<(Vec<PermitRecord>, IngestReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_permits_from_reader(file, mapping, window, options).map_err(|e| attach_path(e, path))
}

pub fn parse_incidents(
    path: &Path,
    mapping: &ColumnMapping,
    window: &DateWindow,
    options: &IngestOptions,
) -> Result<(Vec<IncidentRecord>, IngestReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_incidents_from_reader(file, mapping, window, options).map_err(|e| attach_path(e, path))
}

fn attach_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Csv(c) if c.is_io_error() => match c.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        },
        e => e,
    }
}

pub fn parse_permits_from_reader<R: Read>(
    reader: R,
    mapping: &ColumnMapping,
    window: &DateWindow,
    options: &IngestOptions,
) -> Result<(Vec<PermitRecord>, IngestReport)> {
    let cols = &mapping.permits;
    let lookup = mapping.work_type_lookup();
    let mut rows = RowSource::new(reader, mapping, options)?;
    let zone = rows.column("permits.zone_id", &cols.zone_id)?;
    let work_type = rows.column("permits.work_type", &cols.work_type)?;
    let start = rows.column("permits.start_date", &cols.start_date)?;
    let borough = rows.optional_column("permits.borough", cols.borough.as_deref())?;
    let subtype = rows.optional_column("permits.work_subtype", cols.work_subtype.as_deref())?;
    let expiration =
        rows.optional_column("permits.expiration_date", cols.expiration_date.as_deref())?;

    let mut out = Vec::new();
    rows.drive(|rec| {
        let zone_id = ZoneId::normalize(key_field(rec, zone)?).ok_or(RejectReason::InvalidZone)?;
        let raw_subtype = subtype.and_then(|i| text_field(rec, i));
        let work_type = resolve_work_type(&lookup, key_field(rec, work_type)?, raw_subtype.as_deref())?;
        let start_date = mapping
            .date_format
            .parse_date(key_field(rec, start)?)
            .ok_or(RejectReason::InvalidDate)?;
        let expiration_date = match expiration {
            Some(i) => match key_field(rec, i)?.trim() {
                "" => None,
                s => Some(
                    mapping
                        .date_format
                        .parse_date(s)
                        .ok_or(RejectReason::InvalidDate)?,
                ),
            },
            None => None,
        };
        if matches!(expiration_date, Some(exp) if exp < start_date) {
            return Err(RejectReason::InvertedDates);
        }
        let in_window = match (options.overlap_window, expiration_date) {
            (true, Some(exp)) => window.overlaps(start_date, exp),
            (true, None) => start_date <= window.end,
            (false, _) => window.contains(start_date),
        };
        if !in_window {
            return Err(RejectReason::OutOfWindow);
        }
        out.push(PermitRecord {
            zone_id,
            borough: borough.and_then(|i| text_field(rec, i)),
            work_type,
            work_subtype: raw_subtype,
            start_date,
            expiration_date,
        });
        Ok(())
    })?;
    Ok((out, rows.finish()?))
}

fn resolve_work_type(
    lookup: &WorkTypeLookup,
    raw: &str,
    subtype: Option<&str>,
) -> std::result::Result<super::WorkType, RejectReason> {
    lookup
        .resolve(raw, subtype)
        .ok_or(RejectReason::UnknownWorkType)
}

pub fn parse_incidents_from_reader<R: Read>(
    reader: R,
    mapping: &ColumnMapping,
    window: &DateWindow,
    options: &IngestOptions,
) -> Result<(Vec<IncidentRecord>, IngestReport)> {
    let cols = &mapping.incidents;
    let mut rows = RowSource::new(reader, mapping, options)?;
    let zone = rows.column("incidents.zone_id", &cols.zone_id)?;
    let timestamp = rows.column("incidents.timestamp", &cols.timestamp)?;
    let response = rows.column("incidents.response_time_s", &cols.response_time_s)?;
    let filter = match &cols.filter {
        Some(f) => Some((rows.column("incidents.filter.column", &f.column)?, &f.allow)),
        None => None,
    };

    let mut out = Vec::new();
    rows.drive(|rec| {
        if let Some((idx, allow)) = filter {
            let value = text_field(rec, idx).unwrap_or_default();
            if !allow.iter().any(|a| a.trim() == value) {
                return Err(RejectReason::Filtered);
            }
        }
        let zone_id = ZoneId::normalize(key_field(rec, zone)?).ok_or(RejectReason::InvalidZone)?;
        let ts = mapping
            .date_format
            .parse_timestamp(key_field(rec, timestamp)?)
            .ok_or(RejectReason::InvalidDate)?;
        let secs: f64 = key_field(rec, response)?
            .trim()
            .parse()
            .map_err(|_| RejectReason::InvalidDuration)?;
        if !secs.is_finite() {
            return Err(RejectReason::InvalidDuration);
        }
        if secs < 0.0 {
            return Err(RejectReason::NegativeDuration);
        }
        if !window.contains(ts.date()) {
            return Err(RejectReason::OutOfWindow);
        }
        out.push(IncidentRecord {
            zone_id,
            timestamp: ts,
            response_time_s: secs,
        });
        Ok(())
    })?;
    Ok((out, rows.finish()?))
}

/// Key fields must be present and pure ASCII.
fn key_field(rec: &ByteRecord, idx: usize) -> std::result::Result<&str, RejectReason> {
    let bytes = rec.get(idx).ok_or(RejectReason::MissingField)?;
    if !bytes.is_ascii() {
        return Err(RejectReason::NonAsciiKey);
    }
    // ASCII is valid UTF-8.
    Ok(std::str::from_utf8(bytes).expect("ascii"))
}

/// Free-text fields are decoded lossily; empty means absent.
fn text_field(rec: &ByteRecord, idx: usize) -> Option<String> {
    let s = String::from_utf8_lossy(rec.get(idx)?);
    let t = s.trim();
    (!t.is_empty()).then(|| t.to_string())
}

struct RowSource<R: Read> {
    reader: csv::Reader<R>,
    headers: Vec<String>,
    report: IngestReport,
    quarantine: Option<(PathBuf, csv::Writer<File>)>,
}

impl<R: Read> RowSource<R> {
    fn new(reader: R, mapping: &ColumnMapping, options: &IngestOptions) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(mapping.delimiter as u8)
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let headers: Vec<String> = reader
            .byte_headers()?
            .iter()
            .map(|h| String::from_utf8_lossy(h).trim().trim_start_matches('\u{feff}').to_string())
            .collect();
        let quarantine = match &options.quarantine {
            Some(path) => {
                let file = File::create(path).map_err(|e| Error::io(path, e))?;
                let mut w = csv::WriterBuilder::new().flexible(true).from_writer(file);
                let mut header = StringRecord::from(vec!["row", "reason"]);
                for h in &headers {
                    header.push_field(h);
                }
                w.write_record(&header)?;
                Some((path.clone(), w))
            }
            None => None,
        };
        Ok(RowSource {
            reader,
            headers,
            report: IngestReport::default(),
            quarantine,
        })
    }

    fn column(&self, field: &str, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name.trim())
            .ok_or_else(|| Error::MissingColumn {
                field: field.to_string(),
                column: name.to_string(),
            })
    }

    fn optional_column(&self, field: &str, name: Option<&str>) -> Result<Option<usize>> {
        name.map(|n| self.column(field, n)).transpose()
    }

    fn drive<F>(&mut self, mut accept: F) -> Result<()>
    where
        F: FnMut(&ByteRecord) -> std::result::Result<(), RejectReason>,
    {
        let mut rec = ByteRecord::new();
        loop {
            let outcome = match self.reader.read_byte_record(&mut rec) {
                Ok(false) => break,
                Ok(true) => accept(&rec),
                Err(e) if e.is_io_error() => return Err(e.into()),
                Err(_) => Err(RejectReason::MalformedRow),
            };
            self.report.rows_read += 1;
            match outcome {
                Ok(()) => self.report.rows_accepted += 1,
                Err(reason) => {
                    self.report.reject(reason);
                    if let Some((_, w)) = &mut self.quarantine {
                        let mut line = ByteRecord::new();
                        line.push_field(self.report.rows_read.to_string().as_bytes());
                        line.push_field(reason.as_str().as_bytes());
                        for f in rec.iter() {
                            line.push_field(f);
                        }
                        w.write_byte_record(&line)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Result<IngestReport> {
        if let Some((path, w)) = &mut self.quarantine {
            w.flush().map_err(|e| Error::io(path.as_path(), e))?;
        }
        debug_assert_eq!(
            self.report.rows_read,
            self.report.rows_accepted + self.report.rows_rejected
        );
        Ok(self.report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::WorkType;

    fn permits(csv: &str) -> Result<(Vec<PermitRecord>, IngestReport)> {
        parse_permits_from_reader(
            csv.as_bytes(),
            &ColumnMapping::canonical(),
            &DateWindow::study_period(),
            &IngestOptions::default(),
        )
    }

    fn incidents(csv: &str) -> Result<(Vec<IncidentRecord>, IngestReport)> {
        parse_incidents_from_reader(
            csv.as_bytes(),
            &ColumnMapping::canonical(),
            &DateWindow::study_period(),
            &IngestOptions::default(),
        )
    }

    const PERMIT_HEADER: &str =
        "zone_id,borough,work_type,work_subtype,start_date,expiration_date\n";

    #[test]
    fn three_row_permit_file() {
        let csv = format!(
            "{PERMIT_HEADER}10001,MANHATTAN,alteration,,2016-01-01,2017-01-01\n\
             ABCDE,MANHATTAN,alteration,,2016-01-01,\n\
             10002,MANHATTAN,plumbing,,2012-05-05,\n"
        );
        let (recs, report) = permits(&csv).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].work_type, WorkType::Alteration);
        assert_eq!(recs[0].zone_id.as_str(), "10001");
        assert_eq!((report.rows_read, report.rows_accepted, report.rows_rejected), (3, 1, 2));
        assert_eq!(report.rejected_for(RejectReason::InvalidZone), 1);
        assert_eq!(report.rejected_for(RejectReason::OutOfWindow), 1);
    }

    #[test]
    fn header_only_file() {
        let (recs, report) = permits(PERMIT_HEADER).unwrap();
        assert!(recs.is_empty());
        assert_eq!(report, IngestReport::default());
    }

    #[test]
    fn missing_mapped_column_is_fatal() {
        let err = permits("zone_id,work_type\n10001,plumbing\n").unwrap_err();
        assert!(matches!(err, Error::MissingColumn { ref column, .. } if column == "start_date"));
    }

    #[test]
    fn unknown_type_and_inverted_dates_reject() {
        let csv = format!(
            "{PERMIT_HEADER}10001,,landscaping,,2016-01-01,\n\
             10001,,plumbing,,2016-01-05,2016-01-01\n\
             10001,,plumbing,,2016-01-05\n"
        );
        let (recs, report) = permits(&csv).unwrap();
        assert_eq!(report.rejected_for(RejectReason::UnknownWorkType), 1);
        assert_eq!(report.rejected_for(RejectReason::InvertedDates), 1);
        assert_eq!(report.rejected_for(RejectReason::MissingField), 1);
        assert!(recs.is_empty());
    }

    #[test]
    fn non_ascii_keys_reject_but_free_text_is_lossy() {
        let mut bytes = PERMIT_HEADER.as_bytes().to_vec();
        bytes.extend_from_slice(b"10001,BRONX \xff,plumbing,,2016-01-01,\n");
        bytes.extend_from_slice("10001,,plumbing,,2016-01-0１,\n".as_bytes());
        let (recs, report) = parse_permits_from_reader(
            bytes.as_slice(),
            &ColumnMapping::canonical(),
            &DateWindow::study_period(),
            &IngestOptions::default(),
        )
        .unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].borough.as_deref(), Some("BRONX \u{fffd}"));
        assert_eq!(report.rejected_for(RejectReason::NonAsciiKey), 1);
    }

    #[test]
    fn overlap_window_extension() {
        let csv = format!("{PERMIT_HEADER}10001,,plumbing,,2012-06-01,2013-02-01\n");
        let (recs, _) = permits(&csv).unwrap();
        assert!(recs.is_empty());
        let (recs, _) = parse_permits_from_reader(
            csv.as_bytes(),
            &ColumnMapping::canonical(),
            &DateWindow::study_period(),
            &IngestOptions {
                overlap_window: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(recs.len(), 1);
    }

    #[test]
    fn incident_durations() {
        let csv = "zone_id,timestamp,response_time_s\n\
                   10014,2017-02-09T15:00:00,312\n\
                   10014,2017-02-09T15:00:00,-5\n\
                   10014,2017-02-09T15:00:00,NaN\n\
                   10014,2017-02-09T15:00:00,fast\n";
        let (recs, report) = incidents(csv).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].response_time_s, 312.0);
        assert_eq!(report.rejected_for(RejectReason::NegativeDuration), 1);
        assert_eq!(report.rejected_for(RejectReason::InvalidDuration), 2);
    }

    #[test]
    fn incident_filter_and_delimiter() {
        let mut mapping = ColumnMapping::canonical();
        mapping.delimiter = ';';
        mapping.incidents.filter = Some(crate::ingestion::IncidentFilter {
            column: "kind".into(),
            allow: vec!["fire".into()],
        });
        let csv = "zone_id;timestamp;response_time_s;kind\n\
                   10014;2017-02-09T15:00:00;312;fire\n\
                   10014;2017-02-09T15:00:00;200;medical\n";
        let (recs, report) = parse_incidents_from_reader(
            csv.as_bytes(),
            &mapping,
            &DateWindow::study_period(),
            &IngestOptions::default(),
        )
        .unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(report.rejected_for(RejectReason::Filtered), 1);
    }

    #[test]
    fn quarantine_spill() {
        let dir = tempfile::tempdir().unwrap();
        let q = dir.path().join("rejects.csv");
        let csv = format!("{PERMIT_HEADER}ABCDE,,plumbing,,2016-01-01,\n10001,,plumbing,,2016-01-01,\n");
        parse_permits_from_reader(
            csv.as_bytes(),
            &ColumnMapping::canonical(),
            &DateWindow::study_period(),
            &IngestOptions {
                quarantine: Some(q.clone()),
                ..Default::default()
            },
        )
        .unwrap();
        let text = std::fs::read_to_string(q).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("1,invalid_zone,ABCDE"));
    }

    #[test]
    fn unreadable_file_is_io_error() {
        let err = parse_permits(
            Path::new("/nonexistent/permits.csv"),
            &ColumnMapping::canonical(),
            &DateWindow::study_period(),
            &IngestOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
