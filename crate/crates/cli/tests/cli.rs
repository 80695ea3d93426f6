use std::path::Path;
use std::process::{Command, Output};

use gabp_core::data::{write_libsvm, Dataset};
use gabp_core::synth::two_gaussians;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn gabp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gabp"))
        .args(args)
        .env_remove("GABP_WORKERS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write_system(dir: &Path) -> String {
    let path = dir.join("system.txt");
    std::fs::write(&path, "2\n2 1\n1 2\n3 3\n").unwrap();
    path.to_str().unwrap().to_string()
}

/// 200 training and 100 test points from two Gaussians 3 sigma either side of
/// the boundary.
fn write_gaussians(dir: &Path) -> (String, String) {
    let pts = two_gaussians(&mut ChaCha8Rng::seed_from_u64(21), 300, 2, 3.0);
    let (a, b) = pts.split_at(200);
    let mut paths = Vec::new();
    for (name, part) in [("train.libsvm", a), ("test.libsvm", b)] {
        let path = dir.join(name);
        let ds = Dataset::new(part.to_vec(), name).unwrap();
        write_libsvm(&ds, std::fs::File::create(&path).unwrap()).unwrap();
        paths.push(path.to_str().unwrap().to_string());
    }
    (paths[0].clone(), paths[1].clone())
}

#[test]
fn solve_two_by_two() {
    let dir = tempfile::tempdir().unwrap();
    let sys = write_system(dir.path());
    for extra in [&[][..], &["--schedule", "async", "--variant", "broadcast"], &["--workers", "2"]] {
        let mut args = vec!["solve", sys.as_str()];
        args.extend_from_slice(extra);
        let out = gabp(&args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let doc = json(&out);
        let means: Vec<f64> = serde_json::from_value(doc["means"].clone()).unwrap();
        assert!((means[0] - 1.0).abs() <= 1e-8 && (means[1] - 1.0).abs() <= 1e-8);
        assert!(doc["residual"].as_f64().unwrap() <= 1e-8);
    }
}

#[test]
fn solve_reports_non_convergence_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let sys = write_system(dir.path());
    let out = gabp(&["solve", &sys, "--max-iters", "1", "--epsilon", "1e-12"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["converged"], Value::Bool(false));
}

#[test]
fn train_then_predict_on_held_out_gaussians() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = write_gaussians(dir.path());
    let model = dir.path().join("model.json");
    let model = model.to_str().unwrap();
    let out = gabp(&[
        "train", &train, "--model", model, "--kernel", "rbf", "--gamma", "1", "--cost-c", "1",
        "--loading", "enforce-dominance",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["report"]["converged"], Value::Bool(true));

    let labels = dir.path().join("labels.txt");
    let out = gabp(&["predict", &test, "--model", model, "--labels-out", labels.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out);
    let err = doc["report"]["error_rate"].as_f64().unwrap();
    assert!(err <= 0.05, "held-out error {err}");
    assert_eq!(std::fs::read_to_string(labels).unwrap().lines().count(), 100);
}

#[test]
fn distributed_training_matches_single_process() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = write_gaussians(dir.path());
    let common = ["--gamma", "1", "--cost-c", "0.01", "--loading", "enforce-dominance", "--schedule", "sync"];
    let mut weights = Vec::new();
    for workers in ["1", "3"] {
        let model = dir.path().join(format!("m{workers}.json"));
        let mut args = vec!["train", train.as_str(), "--model", model.to_str().unwrap(), "--workers", workers];
        args.extend_from_slice(&common);
        let out = gabp(&args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let saved: Value = serde_json::from_str(&std::fs::read_to_string(model).unwrap()).unwrap();
        weights.push(saved["model"]["weights"].clone());
    }
    assert_eq!(weights[0], weights[1]);
}

fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("wall_time_seconds");
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

#[test]
fn identical_inputs_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = write_gaussians(dir.path());
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "gamma = 2.0\nloading = \"enforce-dominance\"\nseed = 5\nscale = true\n").unwrap();
    let mut docs = Vec::new();
    let mut models = Vec::new();
    for k in 0..2 {
        let model = dir.path().join(format!("model{k}.json"));
        let out = gabp(&[
            "train", &train, "--model", model.to_str().unwrap(), "--config", config.to_str().unwrap(),
            "--holdout", "0.25",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let mut doc = json(&out);
        strip_timing(&mut doc);
        doc.as_object_mut().unwrap().remove("model");
        docs.push(doc);
        models.push(std::fs::read(model).unwrap());
    }
    assert_eq!(docs[0], docs[1]);
    assert_eq!(models[0], models[1]);
    assert_eq!(docs[0]["report"]["config"]["settings"]["gamma"], 2.0);
    assert_eq!(docs[0]["report"]["config"]["settings"]["seed"], 5);
}

#[test]
fn csv_needs_a_positive_class() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "0,0,a\n1,1,b\n0,1,a\n1,0,b\n").unwrap();
    let model = dir.path().join("m.json");
    let out = gabp(&["train", path.to_str().unwrap(), "--model", model.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = gabp(&[
        "train", path.to_str().unwrap(), "--model", model.to_str().unwrap(), "--positive-class", "a",
        "--loading", "enforce-dominance",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_one() {
    let out = gabp(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(gabp(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(gabp(&["solve", "/nonexistent/system.txt"]).status.code(), Some(1));
    assert_eq!(gabp(&["--help"]).status.code(), Some(0));
}

#[test]
fn parse_errors_exit_one_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.libsvm");
    std::fs::write(&path, "+1 1:0.5\nabc 1:1\n").unwrap();
    let out = gabp(&["train", path.to_str().unwrap(), "--model", "/dev/null"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn bench_reports_every_worker_count() {
    let out = gabp(&["bench", "--n", "60", "--workers-list", "1,2,3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out);
    assert_eq!(doc["runs"].as_array().unwrap().len(), 3);
    assert_eq!(doc["all_identical"], Value::Bool(true));
    assert_eq!(doc["runs"][0]["reduced_scalars_per_round"], 120);
}

#[test]
fn workers_env_var_is_a_default() {
    let dir = tempfile::tempdir().unwrap();
    let sys = write_system(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_gabp"))
        .args(["solve", &sys])
        .env("GABP_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["config"]["workers"], 2);
    let out = Command::new(env!("CARGO_BIN_EXE_gabp"))
        .args(["solve", &sys, "--workers", "1"])
        .env("GABP_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(json(&out)["config"]["workers"], 1);
}
