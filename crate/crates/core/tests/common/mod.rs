#![allow(dead_code)]

use std::path::Path;

use zonefabric::io::{write_incidents, write_permits, write_truth};
use zonefabric::pipeline::PipelineConfig;
use zonefabric::synth::{generate, SyntheticCity, SyntheticSpec};

/// Generates `spec`, writes its inputs under `dir/input` and returns a config
/// writing to `dir/out` with a desk-scale sweep.
pub fn city_config(dir: &Path, spec: &SyntheticSpec) -> (SyntheticCity, PipelineConfig) {
    let city = generate(spec).unwrap();
    let input = dir.join("input");
    write_permits(&input.join("permits.csv"), &city.permits).unwrap();
    write_incidents(&input.join("incidents.csv"), &city.incidents).unwrap();
    write_truth(&input.join("truth.csv"), &city.truth).unwrap();
    let mut config = PipelineConfig::new(
        input.join("permits.csv"),
        input.join("incidents.csv"),
        dir.join("out"),
    );
    config.cluster.k_max = 10;
    config.cluster.restarts = 20;
    (city, config)
}

/// Every file below `root` with its bytes, by relative path.
pub fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// The manifest with its volatile field removed.
pub fn stable_manifest(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("volatile");
    v
}

/// `tree` with the manifest replaced by its stable part.
pub fn comparable_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    tree(root)
        .into_iter()
        .map(|(name, bytes)| {
            if name == "manifest.json" {
                let v = stable_manifest(&root.join(&name));
                (name, serde_json::to_vec(&v).unwrap())
            } else {
                (name, bytes)
            }
        })
        .collect()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
