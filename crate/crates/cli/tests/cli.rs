//! End-to-end runs of the `hypokit` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn hypokit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypokit"))
        .args(args)
        .current_dir(dir)
        .env_remove("HYPOKIT_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

const SMALL_KEY: &str = r#"
experiment = "key-estimate"
sigma = 0.5
seed = 7
output_dir = "OUT"

[grid]
t = { points = 16, length = 4.0 }
x = { points = 16, length = 8.0 }
v = { points = 16, length = 8.0 }

[family]
name = "rough_besov"
count = 4

[coefficient]
name = "sin_sq_x"
amplitude = 0.5
"#;

#[test]
fn single_thread_runs_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for run in ["a", "b"] {
        write_config(tmp.path(), "c.toml", &SMALL_KEY.replace("OUT", run));
        let out = hypokit(&["--threads", "1", "run", "c.toml"], tmp.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        csvs.push(std::fs::read(tmp.path().join(run).join("results.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(String::from_utf8_lossy(&csvs[0]).lines().count(), 5);

    write_config(tmp.path(), "c.toml", &SMALL_KEY.replace("OUT", "env"));
    let out = Command::new(env!("CARGO_BIN_EXE_hypokit"))
        .args(["run", "c.toml"])
        .current_dir(tmp.path())
        .env("HYPOKIT_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(tmp.path().join("env/results.csv")).unwrap(), csvs[0]);
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("env/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["threads"], 1);
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["config"]["family"]["name"], "rough_besov");
    assert_eq!(manifest["config"]["coefficient"]["amplitude"], 0.5);
    assert!(manifest["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn sigma_outside_unit_interval_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    for (exp, sigma) in [("key-estimate", "1.5"), ("scaling-sweep", "0.0"), ("verify-shear", "-0.25"), ("lemma-1d", "1.0")] {
        write_config(tmp.path(), "bad.toml", &format!("experiment = \"{exp}\"\nsigma = {sigma}\n"));
        let out = hypokit(&["run", "bad.toml"], tmp.path());
        assert_eq!(out.status.code(), Some(2), "{exp}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("sigma must lie in (0, 1)"), "{err}");
    }
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    for body in [
        "experiment = \"no-such\"\n",
        "experiment = \"key-estimate\"\n[grid]\nx = { points = 12, length = 8.0 }\n",
        "experiment = \"key-estimate\"\nunknown = 3\n",
        "experiment = \"verify-weyl\"\n[frame]\nlambdas = [2.0]\n",
    ] {
        write_config(tmp.path(), "bad.toml", body);
        assert_eq!(hypokit(&["run", "bad.toml"], tmp.path()).status.code(), Some(2), "{body}");
    }
    assert_eq!(hypokit(&["run", "missing.toml"], tmp.path()).status.code(), Some(2));
    assert_eq!(hypokit(&["--threads", "0", "list"], tmp.path()).status.code(), Some(2));
}

#[test]
fn tolerance_failure_exits_1_and_memory_guard_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(
        tmp.path(),
        "tight.toml",
        "experiment = \"verify-weyl\"\noutput_dir = \"tight\"\n[tolerances]\naffine_wick_weyl = 1e-30\n",
    );
    let out = hypokit(&["run", "tight.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("affine_wick_weyl"));
    assert_eq!(summary(&tmp.path().join("tight"))["status"], "fail");

    write_config(
        tmp.path(),
        "big.toml",
        "experiment = \"key-estimate\"\noutput_dir = \"big\"\nmemory_budget_mb = 1\n",
    );
    let out = hypokit(&["run", "big.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("big/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["exit_code"], 3);
}

#[test]
fn verify_wick_and_sweep_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "w.toml", "experiment = \"verify-wick\"\noutput_dir = \"w\"\n");
    assert_eq!(hypokit(&["run", "w.toml"], tmp.path()).status.code(), Some(0));
    assert!(summary(&tmp.path().join("w"))["isometry_defect"].as_f64().unwrap() <= 1e-6);

    write_config(tmp.path(), "s.toml", "experiment = \"scaling-sweep\"\nsigma = 0.25\noutput_dir = \"s\"\n");
    assert_eq!(hypokit(&["run", "s.toml"], tmp.path()).status.code(), Some(0));
    assert!(summary(&tmp.path().join("s"))["slope"].as_f64().unwrap().abs() <= 0.05);
}

#[test]
fn list_has_nine_entries() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hypokit(&["list"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("scaling-sweep - optimality argument"));
    let json: Value = serde_json::from_slice(&hypokit(&["list", "--json"], tmp.path()).stdout).unwrap();
    let entries = json.as_array().unwrap();
    assert_eq!(entries.len(), 9);
    assert!(entries.iter().all(|e| e["anchor"].as_str().is_some_and(|a| !a.is_empty())));
    assert!(entries.iter().all(|e| e["default_config"]["experiment"] == e["name"]));
}

#[test]
fn compare_reports_deltas() {
    let tmp = tempfile::tempdir().unwrap();
    for (dir, sigma) in [("a", "0.5"), ("b", "0.5"), ("c", "0.75")] {
        let body = SMALL_KEY.replace("OUT", dir).replace("sigma = 0.5", &format!("sigma = {sigma}"));
        write_config(tmp.path(), "c.toml", &body);
        assert_eq!(hypokit(&["--threads", "1", "run", "c.toml"], tmp.path()).status.code(), Some(0));
    }
    let same = hypokit(&["compare", "a", "b"], tmp.path());
    assert_eq!(same.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&same.stdout), "no differences\n");

    let diff = hypokit(&["compare", "a", "c", "--json"], tmp.path());
    let report: Value = serde_json::from_slice(&diff.stdout).unwrap();
    assert_eq!(report["params"][0]["key"], "sigma");
    let max = report["metrics"].as_array().unwrap().iter().find(|m| m["metric"] == "max_ratio").unwrap();
    assert!(max["a"].as_f64().is_some() && max["b"].as_f64().is_some());
    assert_ne!(max["a"], max["b"]);

    assert_eq!(hypokit(&["compare", "a", "nowhere"], tmp.path()).status.code(), Some(2));
}

#[test]
fn grid_refinement_is_flagged_as_improvement() {
    let tmp = tempfile::tempdir().unwrap();
    // At a fixed stride, doubling the points halves the y-lattice spacing.
    for (dir, points) in [("coarse", 32), ("fine", 64)] {
        let body = format!(
            "experiment = \"verify-wick\"\noutput_dir = \"{dir}\"\n[grid]\nx = {{ points = {points}, length = 8.0 }}\n\
             [frame]\nlambdas = [1.0]\nstride = 2\n[params]\npositivity_trials = 5\n[tolerances]\nisometry_defect = 0.1\n\
             identity_defect = 0.1\nidempotence_defect = 0.1\nkernel_max_error = 0.1\n"
        );
        write_config(tmp.path(), "g.toml", &body);
        let out = hypokit(&["run", "g.toml"], tmp.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let report: Value = serde_json::from_slice(&hypokit(&["compare", "coarse", "fine", "--json"], tmp.path()).stdout).unwrap();
    let iso = report["metrics"].as_array().unwrap().iter().find(|m| m["metric"] == "isometry_defect").unwrap();
    assert!(iso["b"].as_f64().unwrap() < iso["a"].as_f64().unwrap());
    assert_eq!(iso["flagged"], true);
    assert_eq!(iso["verdict"], "improved");
}
