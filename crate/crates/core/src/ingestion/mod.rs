//! Permit and incident ingestion.
//!
//! Raw open-data exports are mapped onto a small canonical data model by a
//! [`ColumnMapping`]. Rows that cannot be normalized are rejected and counted
//! in an [`IngestReport`]; only missing columns and I/O failures are fatal.
//!
//! Date filtering keeps a permit when its start date falls inside the window
//! and an incident when its timestamp does. Permit renewals are not
//! deduplicated: every row is one permit event.

mod mapping;
mod parse;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use mapping::{ColumnMapping, DateFormat, IncidentColumns, IncidentFilter, PermitColumns};
pub use parse::{
    parse_incidents, parse_incidents_from_reader, parse_permits, parse_permits_from_reader,
    IngestOptions, RejectReason,
};

pub const WORK_TYPE_COUNT: usize = 8;

/// The eight canonical permit work types, in signature column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkType {
    NewBuilding,
    Foundation,
    ConstructionEquipment,
    Demolition,
    Alteration,
    EquipmentWork,
    Plumbing,
    Signage,
}

impl WorkType {
    pub const ALL: [WorkType; WORK_TYPE_COUNT] = [
        WorkType::NewBuilding,
        WorkType::Foundation,
        WorkType::ConstructionEquipment,
        WorkType::Demolition,
        WorkType::Alteration,
        WorkType::EquipmentWork,
        WorkType::Plumbing,
        WorkType::Signage,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<WorkType> {
        Self::ALL.get(i).copied()
    }

    /// Snake-case name used in CSV headers and mapping files.
    pub fn name(self) -> &'static str {
        match self {
            WorkType::NewBuilding => "new_building",
            WorkType::Foundation => "foundation",
            WorkType::ConstructionEquipment => "construction_equipment",
            WorkType::Demolition => "demolition",
            WorkType::Alteration => "alteration",
            WorkType::EquipmentWork => "equipment_work",
            WorkType::Plumbing => "plumbing",
            WorkType::Signage => "signage",
        }
    }

    /// Human-readable column heading for rendered reports.
    pub fn label(self) -> &'static str {
        match self {
            WorkType::NewBuilding => "New Building",
            WorkType::Foundation => "Foundation Work",
            WorkType::ConstructionEquipment => "Construction Equipment",
            WorkType::Demolition => "Demolition",
            WorkType::Alteration => "Alteration",
            WorkType::EquipmentWork => "Equipment Work",
            WorkType::Plumbing => "Plumbing",
            WorkType::Signage => "Signage",
        }
    }
}

impl fmt::Display for WorkType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WorkType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WorkType::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::parse("work type", s))
    }
}

/// A five-digit zip code.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ZoneId(String);

impl ZoneId {
    /// Strips whitespace and truncates ZIP+4 (`12345-6789` or `123456789`).
    pub fn normalize(raw: &str) -> Option<ZoneId> {
        let s = raw.trim();
        let b = s.as_bytes();
        let digits = |x: &[u8]| x.iter().all(u8::is_ascii_digit);
        let ok = match b.len() {
            5 => digits(b),
            9 => digits(b),
            10 => digits(&b[..5]) && b[5] == b'-' && digits(&b[6..]),
            _ => false,
        };
        ok.then(|| ZoneId(s[..5].to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for ZoneId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        match ZoneId::normalize(&s) {
            Some(z) if z.0 == s => Ok(z),
            _ => Err(Error::parse("zone id", s)),
        }
    }
}

impl From<ZoneId> for String {
    fn from(z: ZoneId) -> String {
        z.0
    }
}

impl FromStr for ZoneId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ZoneId::try_from(s.to_string())
    }
}

/// Inclusive calendar-date interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if start > end {
            return Err(Error::Config(format!("date window {start} > {end}")));
        }
        Ok(DateWindow { start, end })
    }

    /// 2013-01-01 through 2017-12-31.
    pub fn study_period() -> Self {
        DateWindow {
            start: NaiveDate::from_ymd_opt(2013, 1, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2017, 12, 31).unwrap(),
        }
    }

    /// Every representable date; used when re-reading already-filtered files.
    pub fn unbounded() -> Self {
        DateWindow {
            start: NaiveDate::MIN,
            end: NaiveDate::MAX,
        }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }

    pub fn overlaps(&self, start: NaiveDate, end: NaiveDate) -> bool {
        start <= self.end && end >= self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermitRecord {
    pub zone_id: ZoneId,
    pub borough: Option<String>,
    pub work_type: WorkType,
    pub work_subtype: Option<String>,
    pub start_date: NaiveDate,
    pub expiration_date: Option<NaiveDate>,
}

impl PermitRecord {
    pub fn validate(&self) -> Result<()> {
        match self.expiration_date {
            Some(exp) if exp < self.start_date => Err(Error::parse(
                "permit",
                format!("start {} after expiration {exp}", self.start_date),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentRecord {
    pub zone_id: ZoneId,
    pub timestamp: NaiveDateTime,
    pub response_time_s: f64,
}

impl IncidentRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.response_time_s.is_finite() && self.response_time_s >= 0.0) {
            return Err(Error::parse("incident", "response time must be >= 0"));
        }
        Ok(())
    }
}

/// Row accounting for one ingested file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_accepted: usize,
    pub rows_rejected: usize,
    pub rejection_reasons: BTreeMap<String, usize>,
}

impl IngestReport {
    pub(crate) fn reject(&mut self, reason: RejectReason) {
        self.rows_rejected += 1;
        *self
            .rejection_reasons
            .entry(reason.as_str().to_string())
            .or_default() += 1;
    }

    pub fn rejected_for(&self, reason: RejectReason) -> usize {
        self.rejection_reasons
            .get(reason.as_str())
            .copied()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn work_type_indices_follow_column_order() {
        for (i, t) in WorkType::ALL.iter().enumerate() {
            assert_eq!(t.index(), i);
            assert_eq!(WorkType::from_index(i), Some(*t));
            assert_eq!(t.name().parse::<WorkType>().unwrap(), *t);
        }
        assert_eq!(WorkType::from_index(8), None);
    }

    #[test]
    fn zone_normalization() {
        let z = |s: &str| ZoneId::normalize(s).map(|z| z.0);
        assert_eq!(z(" 10001 "), Some("10001".into()));
        assert_eq!(z("10001-1234"), Some("10001".into()));
        assert_eq!(z("100011234"), Some("10001".into()));
        assert_eq!(z("ABCDE"), None);
        assert_eq!(z("1000"), None);
        assert_eq!(z("10001.0"), None);
        assert_eq!(z("10001-12"), None);
        assert_eq!(z("１0001"), None);
        assert!("10001-1234".parse::<ZoneId>().is_err());
    }

    #[test]
    fn window_bounds_are_inclusive() {
        let w = DateWindow::study_period();
        assert!(w.contains(NaiveDate::from_ymd_opt(2013, 1, 1).unwrap()));
        assert!(w.contains(NaiveDate::from_ymd_opt(2017, 12, 31).unwrap()));
        assert!(!w.contains(NaiveDate::from_ymd_opt(2018, 1, 1).unwrap()));
        assert!(DateWindow::new(w.end, w.start).is_err());
    }
}
