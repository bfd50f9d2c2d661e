use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn zonefabric(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zonefabric"))
        .arg("-q")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = zonefabric(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A 60-zone planted city with its generated config.
fn city(root: &Path) -> PathBuf {
    let dir = root.join("city");
    ok(&["synth", "--zones", "60", "--seed", "3", "-o", s(&dir)]);
    dir.join("config.toml")
}

fn files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                let mut bytes = std::fs::read(&p).unwrap();
                if rel == "manifest.json" {
                    let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                    v.as_object_mut().unwrap().remove("volatile");
                    bytes = serde_json::to_vec(&v).unwrap();
                }
                out.push((rel, bytes));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn stage_subcommands_reproduce_the_one_shot_run() {
    let tmp = tempfile::tempdir().unwrap();
    let config = city(tmp.path());
    let whole = tmp.path().join("whole");
    let staged = tmp.path().join("staged");
    ok(&["run", "-c", s(&config), "-o", s(&whole)]);
    for stage in ["ingest", "signatures", "cluster", "train", "predict", "report"] {
        ok(&[stage, "-c", s(&config), "-o", s(&staged)]);
    }
    let mut a = files(&whole);
    a.retain(|(name, _)| name != "manifest.json");
    let b = files(&staged);
    assert_eq!(a.iter().map(|f| &f.0).collect::<Vec<_>>(), b.iter().map(|f| &f.0).collect::<Vec<_>>());
    for ((name, x), (_, y)) in a.iter().zip(&b) {
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn runs_match_across_thread_counts_and_manifest_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let config = city(tmp.path());
    let one = tmp.path().join("one");
    let four = tmp.path().join("four");
    let replay = tmp.path().join("replay");
    ok(&["--threads", "1", "run", "-c", s(&config), "-o", s(&one)]);
    ok(&["--threads", "4", "run", "-c", s(&config), "-o", s(&four)]);
    ok(&["run", "--manifest", s(&one.join("manifest.json")), "-o", s(&replay)]);
    let reference = files(&one);
    assert!(reference.len() > 10);
    assert!(files(&four) == reference);
    assert!(files(&replay) == reference);
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let config = city(tmp.path());
    let printed = ok(&[
        "run",
        "-c",
        s(&config),
        "--k-max",
        "7",
        "--seed",
        "9",
        "--models",
        "ols,forest",
        "--exclusion-threshold",
        "0.05",
        "--print-config",
    ]);
    assert!(printed.contains("k_max = 7"), "{printed}");
    assert!(printed.contains("restarts = 20"), "{printed}");
    assert!(printed.contains("models = [\"ols\", \"forest\"]"), "{printed}");
    assert!(printed.contains("exclusion_threshold = 0.05"), "{printed}");
    assert_eq!(printed.matches("seed = 9").count(), 2, "{printed}");
}

#[test]
fn exit_codes_follow_the_error_class() {
    let tmp = tempfile::tempdir().unwrap();
    let config = city(tmp.path());
    let out = tmp.path().join("out");

    let bad_k = zonefabric(&["run", "-c", s(&config), "-o", s(&out), "--k-min", "5", "--k-max", "3"]);
    assert_eq!(code(&bad_k), 1);
    assert_eq!(code(&zonefabric(&["run", "--no-such-flag"])), 1);
    assert_eq!(code(&zonefabric(&["run", "-o", s(&out)])), 1);

    let missing = zonefabric(&["run", "-c", s(&config), "-o", s(&out), "--permits", s(&tmp.path().join("nope.csv"))]);
    assert_eq!(code(&missing), 2);

    let empty = tmp.path().join("empty.csv");
    std::fs::write(&empty, "zone_id,timestamp,response_time_s\n").unwrap();
    let none = zonefabric(&["run", "-c", s(&config), "-o", s(&out), "--incidents", s(&empty)]);
    assert_eq!(code(&none), 2);
    let stderr = String::from_utf8_lossy(&none.stderr);
    assert!(stderr.contains("aggregate") && stderr.contains("no_incidents"), "{stderr}");
    assert!(out.join("quarantine/error.txt").exists());
    assert!(out.join("quarantine/signatures.csv").exists());
}

#[test]
fn predict_one_signature() {
    let tmp = tempfile::tempdir().unwrap();
    let config = city(tmp.path());
    let out = tmp.path().join("out");
    ok(&["run", "-c", s(&config), "-o", s(&out)]);
    let line = ok(&["predict", "-o", s(&out), "--signature", "0.3,0.1,0.1,0.1,0.1,0.1,0.1,0.1"]);
    let fields: Vec<&str> = line.trim().split('\t').collect();
    assert_eq!(fields.len(), 3, "{line}");
    assert!(fields[0].starts_with("cluster "));
    let seconds: f64 = fields[1].strip_prefix("predicted_response_s ").unwrap().parse().unwrap();
    assert!((100.0..1000.0).contains(&seconds));
    assert_eq!(fields[2], "ok");

    let short = zonefabric(&["predict", "-o", s(&out), "--signature", "0.5,0.5"]);
    assert_eq!(code(&short), 1);
}

#[test]
fn artifacts_are_missing_before_their_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = zonefabric(&["cluster", "-o", s(&tmp.path().join("empty"))]);
    assert_eq!(code(&out), 2);
}
