mod args;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, Overrides, Preset, PredictArgs, RunArgs, SynthArgs};
use zonefabric::pipeline::{self, run_pipeline, stages, ClusterSummary, EvalRow, EvalScope, PipelineConfig};
use zonefabric::synth::{generate, SyntheticSpec};
use zonefabric::{io, Error, Result, Signature, WORK_TYPE_COUNT};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet { "warn" } else { "info" }))
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.class().exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ingest(o) => ingest(&o),
        Command::Signatures(o) => signatures(&o),
        Command::Cluster(o) => cluster(&o),
        Command::Train(o) => train(&o),
        Command::Predict(a) => predict(&a),
        Command::Report(o) => report(&o),
        Command::Run(a) => run(&a),
        Command::Synth(a) => synth(&a),
    }
}

/// Config for a stage that starts from artifacts already in the output dir.
fn stage_config(o: &Overrides) -> Result<PipelineConfig> {
    let c = o.resolve()?;
    c.validate_params()?;
    Ok(c)
}

fn ingest(o: &Overrides) -> Result<()> {
    let c = o.resolve()?;
    c.validate()?;
    let ing = stages::ingest(&c, &c.output).map_err(|e| e.in_stage("ingest"))?;
    println!(
        "permits: {} accepted of {} read; incidents: {} accepted of {} read",
        ing.permit_report.rows_accepted,
        ing.permit_report.rows_read,
        ing.incident_report.rows_accepted,
        ing.incident_report.rows_read
    );
    Ok(())
}

fn signatures(o: &Overrides) -> Result<()> {
    let c = stage_config(o)?;
    let dir = &c.output;
    let permits = stages::load_permits(dir)?;
    let m = stages::signatures(dir, &permits).map_err(|e| e.in_stage("signatures"))?;
    println!("{} zones", m.len());
    Ok(())
}

fn cluster(o: &Overrides) -> Result<()> {
    let c = stage_config(o)?;
    let dir = &c.output;
    let m = stages::load_signatures(dir)?;
    let (_, model) = stages::cluster(dir, &m, &c.cluster).map_err(|e| e.in_stage("cluster"))?;
    println!(
        "k = {}, silhouette {:.4}, sizes {:?}",
        model.k,
        model.silhouette.unwrap_or(f64::NAN),
        model.cluster_sizes()
    );
    Ok(())
}

fn train(o: &Overrides) -> Result<()> {
    let c = stage_config(o)?;
    let dir = &c.output;
    let m = stages::load_signatures(dir)?;
    let (_, clustering) = stages::load_clusters(dir, &m)?;
    let incidents = stages::load_incidents(dir)?;
    let agg = stages::aggregate(dir, &m, &clustering, &incidents, &c).map_err(|e| e.in_stage("aggregate"))?;
    let (_, eval) = stages::train(dir, &m, &clustering, &agg, &c.regress).map_err(|e| e.in_stage("train"))?;
    print_summary(&agg.clusters, &eval);
    Ok(())
}

fn predict(a: &PredictArgs) -> Result<()> {
    let c = stage_config(&a.overrides)?;
    let dir = &c.output;
    let centroids = stages::load_centroids(dir)?;
    let models = stages::load_models(dir)?;
    if let Some(values) = &a.signature {
        let sig: Signature = values
            .as_slice()
            .try_into()
            .map_err(|_| Error::Config(format!("--signature needs {WORK_TYPE_COUNT} values")))?;
        let p = pipeline::predict_zone(&sig, &centroids, &models)?;
        println!(
            "cluster {}\tpredicted_response_s {}\t{}",
            p.cluster,
            p.predicted_s.map_or("n/a".to_string(), |v| format!("{v:.1}")),
            p.status()
        );
        return Ok(());
    }
    let m = stages::load_signatures(dir)?;
    let rows = stages::predict(dir, &m, &centroids, &models).map_err(|e| e.in_stage("predict"))?;
    let ok = rows.iter().filter(|(_, p)| p.predicted_s.is_some()).count();
    println!("{} zones predicted, {} without a model", ok, rows.len() - ok);
    Ok(())
}

fn report(o: &Overrides) -> Result<()> {
    let c = stage_config(o)?;
    let dir = &c.output;
    let m = stages::load_signatures(dir)?;
    let clusters = stages::load_cluster_summaries(dir)?;
    let eval = stages::load_eval(dir)?;
    stages::report(dir, &m, &clusters, &eval).map_err(|e| e.in_stage("report"))?;
    println!("reports written to {}", dir.join("reports").display());
    Ok(())
}

fn run(a: &RunArgs) -> Result<()> {
    let c = match &a.manifest {
        Some(path) => {
            if a.overrides.output.is_none() {
                return Err(Error::Config("--output is required when replaying a manifest".into()));
            }
            a.overrides.apply(PipelineConfig::from_manifest(path)?)?
        }
        None => a.overrides.resolve()?,
    };
    if a.print_config {
        print!("{}", c.to_toml());
        return Ok(());
    }
    let art = run_pipeline(&c)?;
    println!(
        "k = {}, silhouette {:.4}, {} zones",
        art.clustering.k,
        art.clustering.silhouette.unwrap_or(f64::NAN),
        art.signatures.len()
    );
    print_summary(&art.aggregated.clusters, &art.eval);
    println!("artifacts in {}", c.output.display());
    Ok(())
}

fn print_summary(clusters: &[ClusterSummary], eval: &[EvalRow]) {
    println!("cluster\tzones\tincidents\tmean_response_s\tretained\tbest R²");
    for s in clusters {
        let best = eval
            .iter()
            .filter(|e| e.scope == EvalScope::Cluster(s.cluster))
            .filter_map(|e| e.r_squared.map(|r| (e.model, r)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            s.cluster,
            s.zones,
            s.incidents,
            s.mean_response_s.map_or("n/a".into(), |v| format!("{v:.0}")),
            if s.retained { "yes" } else { "no" },
            best.map_or("n/a".into(), |(k, r)| format!("{k} {r:.2}"))
        );
    }
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut spec = match a.preset {
        Preset::Planted => SyntheticSpec::planted(a.seed),
        Preset::ExactLinear => SyntheticSpec::exact_linear(a.seed),
        Preset::Step => SyntheticSpec::step(a.seed),
    };
    if let Some(n) = a.zones {
        spec.n_zones = n;
    }
    if let Some(k) = a.clusters {
        if spec.prototypes.as_ref().is_some_and(|p| p.len() != k) {
            return Err(Error::Config(format!("the {:?} preset has fixed prototypes; --clusters cannot change it", a.preset)));
        }
        spec.n_clusters = k;
    }
    if let Some(sd) = a.noise_sd {
        spec.noise_sd = sd;
    }
    let city = generate(&spec)?;
    let dir: &Path = &a.output;
    let permits = dir.join("permits.csv");
    let incidents = dir.join("incidents.csv");
    io::write_permits(&permits, &city.permits)?;
    io::write_incidents(&incidents, &city.incidents)?;
    io::write_truth(&dir.join("truth.csv"), &city.truth)?;

    let mut config = PipelineConfig::new(permits, incidents, dir.join("out"));
    config.window = spec.window;
    config.cluster.k_max = (2 * spec.n_clusters).max(3);
    config.cluster.restarts = 20;
    let path = dir.join("config.toml");
    std::fs::write(&path, config.to_toml()).map_err(|e| Error::io(&path, e))?;
    println!(
        "{} zones, {} permits, {} incidents in {}",
        city.truth.len(),
        city.permits.len(),
        city.incidents.len(),
        dir.display()
    );
    Ok(())
}
