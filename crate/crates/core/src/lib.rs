//! Construction-signature analytics for city zones.
//!
//! The pipeline has two steps. Per-zone permit work types are turned into a
//! distribution over eight canonical work types (the zone's construction
//! signature), and zones are clustered by signature with multi-restart
//! k-means scored by the Silhouette coefficient. Then, for each retained
//! cluster, regression models map a signature to the zone's mean emergency
//! response time.
//!
//! Modules map onto pipeline stages:
//!
//! - [`ingestion`]: permit and incident CSV parsing under a column mapping.
//! - [`signature`]: per-zone tallies, signatures and the analysis matrix.
//! - [`cluster`]: Lloyd's k-means, Silhouette scoring, restarts and k sweeps.
//! - [`regress`]: OLS, CART regression trees, random forests, R² and CV.
//! - [`synth`]: synthetic cities with planted clusters, used as a test oracle.
//! - [`pipeline`]: orchestration, artifacts and report rendering.

pub mod cluster;
pub mod error;
pub mod ingestion;
pub mod io;
pub mod numeric;
pub mod pipeline;
pub mod regress;
pub mod rng;
pub mod signature;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
pub use ingestion::{
    ColumnMapping, DateWindow, IncidentRecord, IngestReport, PermitRecord, WorkType, ZoneId,
    WORK_TYPE_COUNT,
};
pub use signature::{Signature, SignatureMatrix, ZoneCounts, ZoneSignature};
