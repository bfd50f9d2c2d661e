use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::{value::StrDeserializer, DeserializeOwned, IntoDeserializer};

use zonefabric::cluster::{Init, RestartScope};
use zonefabric::pipeline::PipelineConfig;
use zonefabric::regress::{CvScoring, ModelKind};
use zonefabric::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "zonefabric", version, about = "Cluster city zones by construction signature and predict emergency response times")]
pub struct Cli {
    /// Worker threads for the parallel stages (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse raw permit and incident exports into normalized records.
    Ingest(Overrides),
    /// Build per-zone signatures from ingested permits.
    Signatures(Overrides),
    /// Sweep k and cluster the signatures.
    Cluster(Overrides),
    /// Aggregate responses, apply cluster exclusion and fit the models.
    Train(Overrides),
    /// Predict response times for every zone, or for one signature.
    Predict(PredictArgs),
    /// Render the report tables from existing artifacts.
    Report(Overrides),
    /// Run every stage and write the manifest.
    Run(RunArgs),
    /// Generate a synthetic city with known clusters.
    Synth(SynthArgs),
}

/// Config file plus per-field overrides. Flags win over the file.
#[derive(Debug, Args)]
pub struct Overrides {
    /// TOML pipeline config supplying defaults.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Artifact directory.
    #[arg(short, long)]
    pub output: Option<PathBuf>,

    #[arg(long, help_heading = "Inputs")]
    pub permits: Option<PathBuf>,
    #[arg(long, help_heading = "Inputs")]
    pub incidents: Option<PathBuf>,
    /// Column mapping TOML; the canonical layout when omitted.
    #[arg(long, help_heading = "Inputs")]
    pub mapping: Option<PathBuf>,
    /// First day of the study window (YYYY-MM-DD).
    #[arg(long, help_heading = "Inputs")]
    pub start: Option<String>,
    /// Last day of the study window (YYYY-MM-DD), inclusive.
    #[arg(long, help_heading = "Inputs")]
    pub end: Option<String>,
    /// Keep permits whose active interval overlaps the window.
    #[arg(long, help_heading = "Inputs")]
    pub overlap_window: bool,
    /// Write rejected rows to ingest/*_rejected.csv.
    #[arg(long, help_heading = "Inputs")]
    pub quarantine_rejects: bool,

    /// Sets both the clustering and the regression seed.
    #[arg(long, help_heading = "Clustering")]
    pub seed: Option<u64>,
    #[arg(long, help_heading = "Clustering")]
    pub k_min: Option<usize>,
    #[arg(long, help_heading = "Clustering")]
    pub k_max: Option<usize>,
    #[arg(long, help_heading = "Clustering")]
    pub restarts: Option<usize>,
    #[arg(long, help_heading = "Clustering")]
    pub max_iters: Option<usize>,
    #[arg(long, help_heading = "Clustering")]
    pub convergence_tol: Option<f64>,
    #[arg(long, help_heading = "Clustering")]
    pub cluster_seed: Option<u64>,
    /// k_means_plus_plus or uniform.
    #[arg(long, value_parser = snake::<Init>, help_heading = "Clustering")]
    pub init: Option<Init>,
    /// per_k or total.
    #[arg(long, value_parser = snake::<RestartScope>, help_heading = "Clustering")]
    pub restart_scope: Option<RestartScope>,

    /// Comma-separated subset of ols,tree,forest.
    #[arg(long, value_delimiter = ',', value_parser = snake::<ModelKind>, help_heading = "Regression")]
    pub models: Option<Vec<ModelKind>>,
    #[arg(long, help_heading = "Regression")]
    pub folds: Option<usize>,
    #[arg(long, help_heading = "Regression")]
    pub regress_seed: Option<u64>,
    /// pooled or fold_mean.
    #[arg(long, value_parser = snake::<CvScoring>, help_heading = "Regression")]
    pub scoring: Option<CvScoring>,
    #[arg(long, help_heading = "Regression")]
    pub min_incidents_per_zone: Option<usize>,
    /// Also train one model over all retained zones.
    #[arg(long, help_heading = "Regression")]
    pub pooled: bool,
    /// Minimum share of all incidents a cluster needs to be modelled.
    #[arg(long, help_heading = "Regression")]
    pub exclusion_threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    /// Eight comma-separated work-type shares to predict instead of every zone.
    #[arg(long, value_delimiter = ',')]
    pub signature: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    /// Replay the config recorded in a previous run's manifest.
    #[arg(long, conflicts_with = "config")]
    pub manifest: Option<PathBuf>,
    /// Print the effective config as TOML and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    Planted,
    ExactLinear,
    Step,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = Preset::Planted)]
    pub preset: Preset,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub zones: Option<usize>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    /// Directory for permits.csv, incidents.csv, truth.csv and config.toml.
    #[arg(short, long)]
    pub output: PathBuf,
}

fn snake<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    let de: StrDeserializer<'_, serde::de::value::Error> = s.into_deserializer();
    T::deserialize(de).map_err(|e| e.to_string())
}

impl Overrides {
    /// The config file (or defaults) with every given flag applied.
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let base = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::new("", "", "out"),
        };
        self.apply(base)
    }

    pub fn apply(&self, mut c: PipelineConfig) -> Result<PipelineConfig> {
        fn set<T: Clone>(slot: &mut T, value: &Option<T>) {
            if let Some(v) = value {
                *slot = v.clone();
            }
        }
        set(&mut c.output, &self.output);
        set(&mut c.inputs.permits, &self.permits);
        set(&mut c.inputs.incidents, &self.incidents);
        if self.mapping.is_some() {
            c.inputs.mapping = self.mapping.clone();
        }
        if let Some(s) = &self.start {
            c.window.start = date(s)?;
        }
        if let Some(s) = &self.end {
            c.window.end = date(s)?;
        }
        c.ingest.overlap_window |= self.overlap_window;
        c.ingest.quarantine_rejects |= self.quarantine_rejects;

        set(&mut c.cluster.seed, &self.seed);
        set(&mut c.regress.seed, &self.seed);
        set(&mut c.cluster.k_min, &self.k_min);
        set(&mut c.cluster.k_max, &self.k_max);
        set(&mut c.cluster.restarts, &self.restarts);
        set(&mut c.cluster.max_iters, &self.max_iters);
        set(&mut c.cluster.convergence_tol, &self.convergence_tol);
        set(&mut c.cluster.seed, &self.cluster_seed);
        set(&mut c.cluster.init, &self.init);
        set(&mut c.cluster.restart_scope, &self.restart_scope);

        set(&mut c.regress.models, &self.models);
        set(&mut c.regress.folds, &self.folds);
        set(&mut c.regress.seed, &self.regress_seed);
        set(&mut c.regress.scoring, &self.scoring);
        set(&mut c.regress.min_incidents_per_zone, &self.min_incidents_per_zone);
        c.regress.pooled |= self.pooled;
        set(&mut c.exclusion_threshold, &self.exclusion_threshold);
        Ok(c)
    }
}

fn date<T: DeserializeOwned>(s: &str) -> Result<T> {
    snake(s).map_err(|e| Error::Config(format!("bad date `{s}`: {e}")))
}
