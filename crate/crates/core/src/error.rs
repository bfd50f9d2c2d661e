use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad classification used to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Internal,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 1,
            ErrorClass::Data => 2,
            ErrorClass::Internal => 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("mapped column `{column}` (for field `{field}`) not found in header")]
    MissingColumn { field: String, column: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed {what}: {detail}")]
    Parse { what: String, detail: String },
    #[error("empty_zone: zone {0} has no permits")]
    EmptyZone(String),
    #[error("duplicate_zone: zone {0} appears more than once")]
    DuplicateZone(String),
    #[error("k_exceeds_points: k = {k} but only {n} points")]
    KExceedsPoints { k: usize, n: usize },
    #[error("silhouette_undefined: {0}")]
    SilhouetteUndefined(String),
    #[error("empty_sweep: k_min {k_min} exceeds effective k_max {k_max}")]
    EmptySweep { k_min: usize, k_max: usize },
    #[error("singular_design: rank-deficient columns {columns:?}")]
    SingularDesign { columns: Vec<String> },
    #[error("empty_dataset")]
    EmptyDataset,
    #[error("invalid_features: {0}")]
    InvalidFeatures(String),
    #[error("zero_variance_target")]
    ZeroVarianceTarget,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("too_few_rows: {rows} rows for {folds} folds")]
    TooFewRows { rows: usize, folds: usize },
    #[error("cannot_separate: {0}")]
    CannotSeparate(String),
    #[error("zone set mismatch: {0}")]
    ZoneMismatch(String),
    #[error("no_incidents: no incident rows survived ingestion")]
    NoIncidents,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(what: impl Into<String>, detail: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            detail: detail.to_string(),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::MissingColumn { .. } => ErrorClass::Config,
            Error::Io { .. } | Error::Csv(_) | Error::Parse { .. } => ErrorClass::Data,
            Error::EmptyZone(_)
            | Error::DuplicateZone(_)
            | Error::KExceedsPoints { .. }
            | Error::SilhouetteUndefined(_)
            | Error::EmptySweep { .. }
            | Error::SingularDesign { .. }
            | Error::EmptyDataset
            | Error::InvalidFeatures(_)
            | Error::ZeroVarianceTarget
            | Error::TooFewRows { .. }
            | Error::ZoneMismatch(_)
            | Error::NoIncidents
            | Error::InvalidDataset(_) => ErrorClass::Data,
            Error::CannotSeparate(_) => ErrorClass::Config,
            Error::Json(_) => ErrorClass::Data,
            Error::LengthMismatch(..) => ErrorClass::Internal,
            Error::Stage { source, .. } => source.class(),
        }
    }
}
