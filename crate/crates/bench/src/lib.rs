//! Shared inputs for the benchmarks in `benches/`.

use zonefabric::cluster::lloyd;
use zonefabric::io::write_permits;
use zonefabric::regress::Dataset;
use zonefabric::signature::signatures_from_permits;
use zonefabric::synth::{generate, SyntheticCity, SyntheticSpec};
use zonefabric::Signature;

/// Planted city with `zones` zones, seed 42.
pub fn city(zones: usize) -> SyntheticCity {
    let mut spec = SyntheticSpec::planted(42);
    spec.n_zones = zones;
    generate(&spec).expect("valid spec")
}

/// Signature rows of a planted city and a 5-way Lloyd labelling of them.
pub fn labelled_points(zones: usize) -> (Vec<Signature>, Vec<usize>) {
    let m = signatures_from_permits(&city(zones).permits).expect("signatures");
    let model = lloyd(&m.rows, 5, 42, 300, 1e-6).expect("lloyd");
    (m.rows, model.assignments)
}

/// Signatures against true mean responses, one row per zone.
pub fn regression_data(zones: usize) -> Dataset {
    let city = city(zones);
    let m = signatures_from_permits(&city.permits).expect("signatures");
    let targets = city.truth.iter().map(|t| t.true_mean_response).collect();
    Dataset::new(m.rows, targets, m.zone_ids).expect("dataset")
}

/// The permit table of a planted city as canonical CSV bytes.
pub fn permit_csv(zones: usize) -> Vec<u8> {
    let path = std::env::temp_dir().join(format!("zonefabric-bench-permits-{}-{zones}.csv", std::process::id()));
    write_permits(&path, &city(zones).permits).expect("write permits");
    let bytes = std::fs::read(&path).expect("read back");
    let _ = std::fs::remove_file(&path);
    bytes
}
