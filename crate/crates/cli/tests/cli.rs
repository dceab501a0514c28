use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn wavecast() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_wavecast"));
    c.env_remove("WAVECAST_CONFIG").env_remove("WAVECAST_JOBS");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    wavecast().args(args).current_dir(dir).output().unwrap()
}

fn ok(args: &[&str], dir: &Path) -> Output {
    let out = run(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn fails_with(args: &[&str], dir: &Path, code: &str) -> String {
    let out = run(args, dir);
    assert_eq!(out.status.code(), Some(1), "{args:?} should fail");
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains(&format!("error[{code}]")), "stderr: {err}");
    err
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: PathBuf) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

/// Small configuration, a synthetic series and a trained checkpoint.
fn workspace() -> TempDir {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(&["config", "init", "-o", "default.json"], d);
    let mut cfg = json(d.join("default.json"));
    cfg["slice"] = serde_json::json!({"window": 40, "interval": 20, "step": 10});
    cfg["hidden"] = 8.into();
    cfg["models"] = 2.into();
    cfg["train"]["epochs"] = 15.into();
    fs::write(d.join("small.json"), cfg.to_string()).unwrap();
    ok(
        &[
            "synth",
            "--seed",
            "7",
            "--duration",
            "120",
            "-o",
            "wave.csv",
        ],
        d,
    );
    ok(
        &[
            "--config",
            "small.json",
            "train",
            "--data",
            "wave.csv",
            "-o",
            "model.ckpt",
            "--report-dir",
            "train",
        ],
        d,
    );
    dir
}

fn write_window(dir: &Path, name: &str, len: usize) {
    let text = fs::read_to_string(dir.join("wave.csv")).unwrap();
    let mut out = String::from("value\n");
    for line in text.lines().skip(1).take(len) {
        out.push_str(line.split(',').nth(1).unwrap());
        out.push('\n');
    }
    fs::write(dir.join(name), out).unwrap();
}

#[test]
fn help_and_defaults() {
    let dir = TempDir::new().unwrap();
    assert!(run(&["--help"], dir.path()).status.success());
    assert!(run(&["train", "--help"], dir.path()).status.success());
    let out = ok(&["config", "init"], dir.path());
    let cfg: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg["slice"]["window"], 300);
    assert_eq!(cfg["slice"]["interval"], 70);
    assert_eq!(cfg["slice"]["step"], 50);
    assert_eq!(cfg["hidden"], 70);
    assert_eq!(cfg["models"], 5);
    assert_eq!(cfg["train"]["epochs"], 3500);
}

#[test]
fn synth_is_seeded_and_sampled_at_20_hz() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(&["synth", "--seed", "7", "-o", "a.csv"], d);
    ok(&["synth", "--seed", "7", "-o", "b.csv"], d);
    assert_eq!(
        fs::read(d.join("a.csv")).unwrap(),
        fs::read(d.join("b.csv")).unwrap()
    );
    ok(&["synth", "--preset", "regular", "-o", "r.csv"], d);
    let rows = csv_rows(d.join("r.csv"));
    assert_eq!(rows.len(), 12_000);
    assert!((rows[1][0] - rows[0][0] - 0.05).abs() < 1e-9);
    let bad = run(&["synth", "--preset", "tsunami", "-o", "x.csv"], d);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn short_series_reports_the_numbers() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(&["synth", "--duration", "2", "-o", "tiny.csv"], d);
    let err = fails_with(
        &["train", "--data", "tiny.csv", "-o", "m.ckpt"],
        d,
        "insufficient_data",
    );
    assert!(
        err.contains("window 300") && err.contains("interval 70"),
        "{err}"
    );
}

#[test]
fn training_is_reproducible_and_job_invariant() {
    let dir = workspace();
    let d = dir.path();
    let train = |out: &str, jobs: &str| {
        ok(
            &[
                "--config",
                "small.json",
                "--jobs",
                jobs,
                "train",
                "--data",
                "wave.csv",
                "-o",
                out,
            ],
            d,
        );
        fs::read(d.join(out)).unwrap()
    };
    let reference = fs::read(d.join("model.ckpt")).unwrap();
    assert_eq!(train("again.ckpt", "1"), reference);
    assert_eq!(train("parallel.ckpt", "2"), reference);

    ok(
        &[
            "--config",
            "small.json",
            "evaluate",
            "--checkpoint",
            "model.ckpt",
            "--data",
            "wave.csv",
            "-o",
            "e1",
        ],
        d,
    );
    ok(
        &[
            "--config",
            "small.json",
            "evaluate",
            "--checkpoint",
            "again.ckpt",
            "--data",
            "wave.csv",
            "-o",
            "e2",
        ],
        d,
    );
    assert_eq!(
        fs::read(d.join("e1/metrics.json")).unwrap(),
        fs::read(d.join("e2/metrics.json")).unwrap()
    );

    let curve = csv_rows(d.join("train/member_0_curve.csv"));
    assert_eq!(curve.len(), 15);
    assert_eq!(
        json(d.join("train/train_summary.json"))["members"]
            .as_array()
            .unwrap()
            .len(),
        2
    );
}

#[test]
fn config_path_comes_from_environment() {
    let dir = workspace();
    let d = dir.path();
    let out = wavecast()
        .args(["train", "--data", "wave.csv", "-o", "env.ckpt"])
        .env("WAVECAST_CONFIG", "small.json")
        .env("WAVECAST_JOBS", "2")
        .current_dir(d)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        fs::read(d.join("env.ckpt")).unwrap(),
        fs::read(d.join("model.ckpt")).unwrap()
    );
}

#[test]
fn evaluation_outputs_and_split_ordering() {
    let dir = workspace();
    let d = dir.path();
    let eval = |split: &str| {
        ok(
            &[
                "--config",
                "small.json",
                "evaluate",
                "--checkpoint",
                "model.ckpt",
                "--data",
                "wave.csv",
                "--split",
                split,
                "-o",
                split,
            ],
            d,
        );
        json(d.join(split).join("metrics.json"))
    };
    let test = eval("test");
    let train = eval("train");
    for key in ["rmse", "mape", "r2", "auce", "unit", "per_index"] {
        assert!(test.get(key).is_some(), "missing {key}");
    }
    assert_eq!(test["unit"], "meter");
    let idx: Vec<u64> = test["per_index"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["index"].as_u64().unwrap())
        .collect();
    assert_eq!(idx, vec![10, 20]);
    assert!(train["r2"].as_f64().unwrap() > test["r2"].as_f64().unwrap());

    let table = csv_rows(d.join("test/per_index.csv"));
    assert_eq!(table.len(), 2);
    let curve = csv_rows(d.join("test/reliability.csv"));
    assert_eq!(curve.len(), 99);
    assert!(curve.windows(2).all(|w| w[1][1] >= w[0][1]));
    assert!(d.join("test/reliability_index_20.csv").exists());
}

#[test]
fn calibration_round_trip_and_prediction() {
    let dir = workspace();
    let d = dir.path();
    write_window(d, "window.csv", 40);

    fails_with(
        &[
            "predict",
            "--checkpoint",
            "model.ckpt",
            "--window",
            "window.csv",
            "--calibrated",
        ],
        d,
        "missing_calibration",
    );
    let cal = [
        "--config",
        "small.json",
        "calibrate",
        "--checkpoint",
        "model.ckpt",
        "--data",
        "wave.csv",
        "--out",
        "cal.ckpt",
        "--report-dir",
        "cal",
    ];
    ok(&cal, d);
    let report = json(d.join("cal/calibration.json"));
    let s = report["s"].as_f64().unwrap();
    assert!(s > 0.0 && s.is_finite());
    assert_eq!(report["method"], "closedForm");
    assert_eq!(csv_rows(d.join("cal/reliability_before.csv")).len(), 99);
    assert_eq!(csv_rows(d.join("cal/reliability_after.csv")).len(), 99);
    let stored: Value = json(d.join("cal.ckpt"));
    assert_eq!(stored["calibration"].as_f64(), Some(s));

    // Calibrating again overwrites the stored factor with a warning.
    let again = ok(
        &[
            "--config",
            "small.json",
            "calibrate",
            "--checkpoint",
            "cal.ckpt",
            "--data",
            "wave.csv",
            "--method",
            "gridSearch",
            "--report-dir",
            "cal2",
        ],
        d,
    );
    assert!(String::from_utf8_lossy(&again.stderr).contains("replacing"));

    ok(
        &[
            "predict",
            "--checkpoint",
            "cal.ckpt",
            "--window",
            "window.csv",
            "-o",
            "raw.csv",
        ],
        d,
    );
    ok(
        &[
            "predict",
            "--checkpoint",
            "cal.ckpt",
            "--window",
            "window.csv",
            "--calibrated",
            "-o",
            "scaled.csv",
        ],
        d,
    );
    let raw = csv_rows(d.join("raw.csv"));
    let scaled = csv_rows(d.join("scaled.csv"));
    assert_eq!(raw.len(), 20);
    let s2 = json(d.join("cal.ckpt"))["calibration"].as_f64().unwrap();
    for (r, c) in raw.iter().zip(&scaled) {
        assert_eq!(r[0], c[0]);
        assert_eq!(r[1], c[1]);
        assert!((c[2] - r[2] * s2 * s2).abs() <= 1e-12 * c[2].max(1e-12));
        let half = 1.959964 * r[2].sqrt();
        assert!((r[3] - (r[1] - half)).abs() < 1e-6 * half.max(1.0));
        assert!((r[4] - (r[1] + half)).abs() < 1e-6 * half.max(1.0));
    }

    write_window(d, "short.csv", 33);
    let err = fails_with(
        &[
            "predict",
            "--checkpoint",
            "model.ckpt",
            "--window",
            "short.csv",
        ],
        d,
        "shape_mismatch",
    );
    assert!(err.contains("expected 40"), "{err}");
}

#[test]
fn checkpoint_problems_are_loud() {
    let dir = workspace();
    let d = dir.path();
    let text = fs::read_to_string(d.join("model.ckpt")).unwrap();
    fs::write(
        d.join("future.ckpt"),
        text.replace("\"schema_version\": 1", "\"schema_version\": 9"),
    )
    .unwrap();
    write_window(d, "window.csv", 40);
    let err = fails_with(
        &[
            "predict",
            "--checkpoint",
            "future.ckpt",
            "--window",
            "window.csv",
        ],
        d,
        "schema_version",
    );
    assert!(err.contains('9'));
    fails_with(
        &[
            "predict",
            "--checkpoint",
            "missing.ckpt",
            "--window",
            "window.csv",
        ],
        d,
        "io",
    );
}

#[test]
fn sweeps_emit_one_row_per_value() {
    let dir = workspace();
    let d = dir.path();
    ok(
        &[
            "--config",
            "small.json",
            "sweep",
            "--data",
            "wave.csv",
            "--param",
            "models",
            "--values",
            "1..2",
            "-o",
            "models.csv",
        ],
        d,
    );
    let text = fs::read_to_string(d.join("models.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert!(
        header.contains("auce_calibrated") && header.contains("train_time_s"),
        "{header}"
    );
    assert_eq!(text.lines().count(), 3);

    ok(
        &[
            "--config",
            "small.json",
            "sweep",
            "--data",
            "wave.csv",
            "--param",
            "predlength",
            "--values",
            "5,10,20",
            "-o",
            "pl.csv",
        ],
        d,
    );
    assert_eq!(
        fs::read_to_string(d.join("pl.csv"))
            .unwrap()
            .lines()
            .count(),
        4
    );

    // One value matches a plain train + evaluate run.
    ok(
        &[
            "--config",
            "small.json",
            "sweep",
            "--data",
            "wave.csv",
            "--param",
            "models",
            "--values",
            "2",
            "-o",
            "one.csv",
        ],
        d,
    );
    ok(
        &[
            "--config",
            "small.json",
            "evaluate",
            "--checkpoint",
            "model.ckpt",
            "--data",
            "wave.csv",
            "-o",
            "ev",
        ],
        d,
    );
    let metrics = json(d.join("ev/metrics.json"));
    let line = fs::read_to_string(d.join("one.csv")).unwrap();
    let row: Vec<&str> = line.lines().nth(1).unwrap().split(',').collect();
    let rmse: f64 = row[2].parse().unwrap();
    // JSON parsing here is not round-trip exact, so allow one ulp or so.
    let expected = metrics["rmse"].as_f64().unwrap();
    assert!((rmse - expected).abs() <= 1e-14 * expected);

    fails_with(
        &[
            "--config",
            "small.json",
            "sweep",
            "--data",
            "wave.csv",
            "--param",
            "predlength",
            "--values",
            "30",
            "-o",
            "bad.csv",
        ],
        d,
        "invalid_argument",
    );
}

#[test]
fn single_member_ensemble_trains() {
    let dir = workspace();
    let d = dir.path();
    ok(
        &[
            "--config",
            "small.json",
            "train",
            "--data",
            "wave.csv",
            "--models",
            "1",
            "-o",
            "one.ckpt",
        ],
        d,
    );
    assert_eq!(
        json(d.join("one.ckpt"))["members"]
            .as_array()
            .unwrap()
            .len(),
        1
    );
}
