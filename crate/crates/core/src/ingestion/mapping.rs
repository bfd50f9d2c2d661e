use std::collections::BTreeMap;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};

use super::WorkType;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DateFormat {
    /// `YYYY-MM-DD`, optionally followed by `THH:MM:SS` or ` HH:MM:SS`.
    #[default]
    Iso,
    /// `MM/DD/YYYY`, optionally followed by a 24h or AM/PM time.
    Us,
}

impl DateFormat {
    /// Parses a date, ignoring any time-of-day suffix.
    pub fn parse_date(self, raw: &str) -> Option<NaiveDate> {
        let s = raw.trim();
        let date_part = s.split(['T', ' ']).next()?;
        let pattern = match self {
            DateFormat::Iso => "%Y-%m-%d",
            DateFormat::Us => "%m/%d/%Y",
        };
        NaiveDate::parse_from_str(date_part, pattern).ok()
    }

    /// Parses a timestamp; a bare date means midnight.
    pub fn parse_timestamp(self, raw: &str) -> Option<NaiveDateTime> {
        const ISO: &[&str] = &["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"];
        const US: &[&str] = &[
            "%m/%d/%Y %I:%M:%S %p",
            "%m/%d/%Y %I:%M %p",
            "%m/%d/%Y %H:%M:%S%.f",
            "%m/%d/%Y %H:%M",
        ];
        let s = raw.trim();
        let patterns = match self {
            DateFormat::Iso => ISO,
            DateFormat::Us => US,
        };
        patterns
            .iter()
            .find_map(|p| NaiveDateTime::parse_from_str(s, p).ok())
            .or_else(|| {
                let date = match self {
                    DateFormat::Iso => NaiveDate::parse_from_str(s, "%Y-%m-%d"),
                    DateFormat::Us => NaiveDate::parse_from_str(s, "%m/%d/%Y"),
                }
                .ok()?;
                Some(date.and_time(NaiveTime::MIN))
            })
    }
}

/// Source column names for the permit fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermitColumns {
    pub zone_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub borough: Option<String>,
    pub work_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub work_subtype: Option<String>,
    pub start_date: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expiration_date: Option<String>,
}

/// Source column names for the incident fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidentColumns {
    pub zone_id: String,
    pub timestamp: String,
    pub response_time_s: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<IncidentFilter>,
}

/// Keeps only incidents whose `column` value is one of `allow`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidentFilter {
    pub column: String,
    pub allow: Vec<String>,
}

/// How raw export columns and work-type codes map onto the canonical model.
///
/// Work-type keys are matched case-insensitively after trimming. A key of the
/// form `TYPE/SUBTYPE` takes precedence over a bare `TYPE` key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMapping {
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default)]
    pub date_format: DateFormat,
    pub permits: PermitColumns,
    pub incidents: IncidentColumns,
    pub work_types: BTreeMap<String, WorkType>,
}

fn default_delimiter() -> char {
    ','
}

impl ColumnMapping {
    /// Mapping for the normalized files this crate writes itself.
    pub fn canonical() -> Self {
        ColumnMapping {
            delimiter: ',',
            date_format: DateFormat::Iso,
            permits: PermitColumns {
                zone_id: "zone_id".into(),
                borough: Some("borough".into()),
                work_type: "work_type".into(),
                work_subtype: Some("work_subtype".into()),
                start_date: "start_date".into(),
                expiration_date: Some("expiration_date".into()),
            },
            incidents: IncidentColumns {
                zone_id: "zone_id".into(),
                timestamp: "timestamp".into(),
                response_time_s: "response_time_s".into(),
                filter: None,
            },
            work_types: WorkType::ALL
                .iter()
                .map(|t| (t.name().to_string(), *t))
                .collect(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let mapping: ColumnMapping =
            toml::from_str(s).map_err(|e| Error::Config(format!("column mapping: {e}")))?;
        mapping.validate()?;
        Ok(mapping)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delimiter.is_ascii() {
            return Err(Error::Config("delimiter must be a single ASCII character".into()));
        }
        let p = &self.permits;
        let i = &self.incidents;
        let required = [
            ("permits.zone_id", &p.zone_id),
            ("permits.work_type", &p.work_type),
            ("permits.start_date", &p.start_date),
            ("incidents.zone_id", &i.zone_id),
            ("incidents.timestamp", &i.timestamp),
            ("incidents.response_time_s", &i.response_time_s),
        ];
        for (field, column) in required {
            if column.trim().is_empty() {
                return Err(Error::Config(format!("{field} is mapped to an empty column name")));
            }
        }
        if self.work_types.is_empty() {
            return Err(Error::Config("work_types dictionary is empty".into()));
        }
        let mut seen = BTreeMap::new();
        for (key, t) in &self.work_types {
            if let Some(prev) = seen.insert(normalize_key(key), *t) {
                if prev != *t {
                    return Err(Error::Config(format!(
                        "work type key `{key}` maps to both {prev} and {t}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn work_type_lookup(&self) -> WorkTypeLookup {
        WorkTypeLookup(
            self.work_types
                .iter()
                .map(|(k, v)| (normalize_key(k), *v))
                .collect(),
        )
    }
}

fn normalize_key(k: &str) -> String {
    k.trim().to_uppercase()
}

pub(crate) struct WorkTypeLookup(BTreeMap<String, WorkType>);

impl WorkTypeLookup {
    pub(crate) fn resolve(&self, work_type: &str, subtype: Option<&str>) -> Option<WorkType> {
        let base = normalize_key(work_type);
        if let Some(sub) = subtype.map(normalize_key).filter(|s| !s.is_empty()) {
            if let Some(t) = self.0.get(&format!("{base}/{sub}")) {
                return Some(*t);
            }
        }
        self.0.get(&base).copied()
    }
}
