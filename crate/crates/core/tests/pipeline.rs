mod common;

use common::{city_config, comparable_tree, tree};
use zonefabric::pipeline::{layout, run_pipeline, stages};
use zonefabric::synth::{score_recovery, SyntheticSpec};
use zonefabric::Error;

#[test]
fn planted_city_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let (city, config) = city_config(dir.path(), &SyntheticSpec::planted(42));
    let art = run_pipeline(&config).unwrap();
    assert_eq!(art.clustering.k, 5);
    let rec = score_recovery(&city.truth, &art.signatures.zone_ids, &art.clustering).unwrap();
    assert!(rec >= 0.95, "recovery {rec}");
    let out = &config.output;
    for f in [
        layout::SIGNATURES,
        layout::CLUSTERS,
        layout::KSWEEP,
        layout::MODELS,
        layout::PREDICTIONS,
        layout::TABLE1,
        layout::TABLE2,
        layout::TABLE3,
        layout::CLUSTER_SIGNATURES,
        layout::MANIFEST,
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert!(!out.join(".staging").exists());
    assert!(art.aggregated.clusters.iter().all(|c| c.retained));
    for ((z, p), t) in art.predictions.iter().zip(&city.truth) {
        assert_eq!(*z, t.zone_id);
        assert_eq!(p.status(), "ok");
    }
}

#[test]
fn empty_incidents_abort_at_aggregation() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        n_zones: 30,
        n_clusters: 3,
        ..SyntheticSpec::planted(1)
    };
    let (_, config) = city_config(dir.path(), &spec);
    std::fs::write(&config.inputs.incidents, "zone_id,timestamp,response_time_s\n").unwrap();
    let err = run_pipeline(&config).unwrap_err();
    match &err {
        Error::Stage { stage, source } => {
            assert_eq!(*stage, "aggregate");
            assert!(matches!(**source, Error::NoIncidents));
        }
        e => panic!("unexpected {e}"),
    }
    let q = config.output.join(layout::QUARANTINE);
    assert!(q.join(layout::SIGNATURES).is_file());
    assert!(q.join(layout::CLUSTERS).is_file());
    let text = std::fs::read_to_string(q.join("error.txt")).unwrap();
    assert!(text.contains("stage: aggregate") && text.contains("no_incidents"), "{text}");
    assert!(!config.output.join(layout::MANIFEST).exists());
}

#[test]
fn stages_chained_through_files_match_one_shot_run() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        n_zones: 60,
        n_clusters: 3,
        ..SyntheticSpec::planted(9)
    };
    let (_, mut config) = city_config(dir.path(), &spec);
    config.cluster.k_max = 5;
    config.cluster.restarts = 5;
    config.regress.pooled = true;
    run_pipeline(&config).unwrap();

    let s = dir.path().join("staged");
    stages::ingest(&config, &s).unwrap();
    stages::signatures(&s, &stages::load_permits(&s).unwrap()).unwrap();
    let m = stages::load_signatures(&s).unwrap();
    stages::cluster(&s, &m, &config.cluster).unwrap();
    let (_, clustering) = stages::load_clusters(&s, &m).unwrap();
    let incidents = stages::load_incidents(&s).unwrap();
    let agg = stages::aggregate(&s, &m, &clustering, &incidents, &config).unwrap();
    stages::train(&s, &m, &clustering, &agg, &config.regress).unwrap();
    let models = stages::load_models(&s).unwrap();
    let centroids = stages::load_centroids(&s).unwrap();
    stages::predict(&s, &m, &centroids, &models).unwrap();
    let summaries = stages::load_cluster_summaries(&s).unwrap();
    let eval = stages::load_eval(&s).unwrap();
    stages::report(&s, &m, &summaries, &eval).unwrap();

    let mut one_shot = tree(&config.output);
    one_shot.retain(|(n, _)| n != layout::MANIFEST);
    assert_eq!(one_shot, tree(&s));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        n_zones: 40,
        n_clusters: 4,
        ..SyntheticSpec::planted(5)
    };
    let (_, mut config) = city_config(dir.path(), &spec);
    config.cluster.restarts = 4;
    run_pipeline(&config).unwrap();
    let first = comparable_tree(&config.output);
    run_pipeline(&config).unwrap();
    assert_eq!(first, comparable_tree(&config.output));

    let mut replay = zonefabric::pipeline::PipelineConfig::from_manifest(&config.output.join(layout::MANIFEST)).unwrap();
    replay.output = dir.path().join("replay");
    run_pipeline(&replay).unwrap();
    assert_eq!(first, comparable_tree(&replay.output));
}
