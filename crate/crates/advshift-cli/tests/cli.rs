//! End-to-end tests of the `advshift` binary: exit codes, file layout,
//! header discipline, determinism across thread counts, and float
//! round-tripping of everything it writes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use advshift_cli::output::{fmt_f64, read_csv};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_advshift"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SMALL_REGRESSION: &str =
    "setting = regression\ndim = 24\nsubspace_rank = 12\nn_particles = 6\nseed = 11\n";
const SMALL_CLASSIFICATION: &str =
    "setting = classification\ndim = 24\nsubspace_rank = 12\nn_particles = 6\nseed = 11\n";

#[test]
fn simulate_writes_trajectory_blocks_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_REGRESSION);
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let text = fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "# schema advshift.trajectory.v1");
    assert_eq!(lines.next().unwrap(), "# seed 11");
    let echo = lines.next().unwrap();
    assert!(echo.starts_with("# config setting=regression "), "{echo}");
    assert!(echo.contains("dim=24"));
    assert!(echo.contains("snapshots=0,5,10,15,20,25,30,35,40"));
    assert_eq!(lines.next().unwrap(), "t,particle_id,align_b,align_c,a,b,norm_log10");
    let data: Vec<&str> = lines.collect();
    assert_eq!(data.len(), 9 * 6);
    // time-major blocks: six consecutive rows per recording time
    let ts: Vec<u64> =
        data.iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    for (k, chunk) in ts.chunks(6).enumerate() {
        assert!(chunk.iter().all(|&t| t == 5 * k as u64), "block {k}: {chunk:?}");
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["schema"], "advshift.manifest.v1");
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["setting"], "regression");
    assert!(manifest["derived"]["gamma_tilde"].as_f64().unwrap() > 0.0);
    assert!(manifest["derived"]["blessing_rate"].as_f64().unwrap() > 0.0);
    let outputs: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(outputs, ["trajectory.csv"]);
}

#[test]
fn classification_simulate_adds_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_CLASSIFICATION);
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let (cols, rows) = read_csv(&out_dir.join("diagnostics.csv")).unwrap();
    assert_eq!(
        cols,
        ["t", "particle_id", "a", "b", "s", "lyapunov", "env_upper", "env_lower", "assumption_ok"]
    );
    assert_eq!(rows.len(), 9 * 6);
    for row in &rows {
        for cell in &row[2..8] {
            let v: f64 = cell.parse().unwrap();
            assert!(v.is_finite() || v.is_nan(), "{cell}");
        }
        assert!(row[8] == "true" || row[8] == "false", "{:?}", row[8]);
    }
    // the trajectory and diagnostics tables cover the same grid
    let (_, traj) = read_csv(&out_dir.join("trajectory.csv")).unwrap();
    assert_eq!(traj.len(), rows.len());
    for (a, d) in traj.iter().zip(&rows) {
        assert_eq!(a[0], d[0]);
        assert_eq!(a[1], d[1]);
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    let outputs: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(outputs, ["trajectory.csv", "diagnostics.csv"]);
}

#[test]
fn missing_config_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate",
        "--config",
        tmp.path().join("absent.cfg").to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("cannot read config"), "{err}");
}

#[test]
fn negative_step_size_exits_two_with_the_reason() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "setting = regression\ngamma = -0.5\n");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("step size must be positive"), "{err}");
    // nothing was written
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unknown_key_exits_two_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "setting = regression\ngama = 0.5\n");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("gama"), "{err}");
}

#[test]
fn unknown_figure_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "reproduce",
        "--figure",
        "fig3",
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reproduce_fig1_writes_the_snapshot_schedule() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("fig1");
    let out = run(&["reproduce", "--figure", "fig1", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    for t in [0u64, 5, 10, 15, 20, 25, 30, 35, 40] {
        let p = out_dir.join("snapshots").join(format!("t_{t}.csv"));
        let (cols, rows) = read_csv(&p).unwrap();
        assert_eq!(cols, ["particle_id", "u", "v", "align_b", "align_c", "stationary"]);
        assert_eq!(rows.len(), 500, "at t={t}");
        for row in rows.iter().take(20) {
            let u: f64 = row[1].parse().unwrap();
            let v: f64 = row[2].parse().unwrap();
            // plane coordinates of a unit vector
            assert!(u * u + v * v <= 1.0 + 1e-12, "u={u} v={v}");
            assert!(row[5] == "true" || row[5] == "false");
        }
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "reproduce fig1");
    let outputs: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(outputs.contains(&"snapshots/t_0.csv"), "{outputs:?}");
    assert!(outputs.contains(&"snapshots/t_40.csv"));
    assert!(outputs.contains(&"trajectory.csv"));
    assert_eq!(outputs.len(), 10);
}

#[test]
fn reproduce_fig2_writes_the_snapshot_schedule() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("fig2");
    let out = run(&["reproduce", "--figure", "fig2", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    for t in [0u64, 25, 50, 75, 100, 125, 150, 175, 200] {
        let p = out_dir.join("snapshots").join(format!("t_{t}.csv"));
        let (_, rows) = read_csv(&p).unwrap();
        assert_eq!(rows.len(), 500, "at t={t}");
    }
}

#[test]
fn identical_runs_and_thread_counts_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "setting = classification\ndim = 24\nsubspace_rank = 12\nn_particles = 12\nseed = 3\n",
    );
    let dirs: Vec<PathBuf> = (0..3).map(|k| tmp.path().join(format!("out{k}"))).collect();
    let base = |out_dir: &Path| {
        vec![
            "simulate".to_string(),
            "--config".into(),
            cfg.to_str().unwrap().into(),
            "--out".into(),
            out_dir.to_str().unwrap().into(),
        ]
    };
    let a = bin().args(base(&dirs[0])).arg("--threads").arg("1").output().unwrap();
    let b = bin().args(base(&dirs[1])).arg("--threads").arg("4").output().unwrap();
    // env override beats the flag and must not change bytes either
    let c = bin()
        .args(base(&dirs[2]))
        .arg("--threads")
        .arg("2")
        .env("ADVSHIFT_THREADS", "3")
        .output()
        .unwrap();
    for out in [&a, &b, &c] {
        assert!(out.status.success(), "stderr: {}", stderr_of(out));
    }
    for file in ["trajectory.csv", "diagnostics.csv", "manifest.json"] {
        let bytes0 = fs::read(dirs[0].join(file)).unwrap();
        for d in &dirs[1..] {
            assert_eq!(bytes0, fs::read(d.join(file)).unwrap(), "{file} differs");
        }
    }
}

#[test]
fn seed_flag_overrides_and_changes_the_stream() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_REGRESSION);
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let a = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_a.to_str().unwrap(),
    ]);
    let b = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
        "--seed",
        "12345",
    ]);
    assert!(a.status.success() && b.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_b.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 12345);
    let ta = fs::read_to_string(out_a.join("trajectory.csv")).unwrap();
    let tb = fs::read_to_string(out_b.join("trajectory.csv")).unwrap();
    assert!(tb.lines().nth(1).unwrap().ends_with("12345"));
    assert_ne!(ta, tb);
}

#[test]
fn emitted_floats_parse_back_to_the_same_text() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_CLASSIFICATION);
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    for (file, float_cols) in [("trajectory.csv", 2..7usize), ("diagnostics.csv", 2..8)] {
        let (_, rows) = read_csv(&out_dir.join(file)).unwrap();
        assert!(!rows.is_empty());
        for row in &rows {
            for cell in &row[float_cols.clone()] {
                let v: f64 = cell.parse().unwrap_or_else(|_| panic!("{file}: {cell}"));
                assert_eq!(&fmt_f64(v), cell, "{file}");
            }
        }
    }
}

#[test]
fn verify_suites_pass_from_the_binary() {
    for suite in ["gradients", "closed-form", "invariants", "envelopes"] {
        let out = run(&["verify", "--suite", suite]);
        assert!(out.status.success(), "suite {suite}: {}", stderr_of(&out));
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("PASS"), "suite {suite}: {text}");
        assert!(!text.contains("FAIL"), "suite {suite}: {text}");
    }
}

#[test]
fn verify_unknown_suite_exits_two() {
    let out = run(&["verify", "--suite", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("nope"));
}

#[test]
fn rates_fits_the_squared_error_decay() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        // norms grow like (1+gamma_tilde)^t; 400 steps stay well inside f64
        "setting = regression\ndim = 24\nsubspace_rank = 12\nn_particles = 6\nseed = 11\nhorizon = 400\n",
    );
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "rates",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("ratefit.json")).unwrap())
            .unwrap();
    assert_eq!(fit["schema"], "advshift.ratefit.v1");
    assert_eq!(fit["model"], "exp_decay");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    let expected = manifest["derived"]["blessing_rate"].as_f64().unwrap();
    let estimate = fit["estimate"].as_f64().unwrap();
    assert!(
        (estimate - expected).abs() <= 0.02 * expected,
        "estimate {estimate} vs {expected}"
    );
    assert!(fit["r2"].as_f64().unwrap() > 0.99);
}

#[test]
fn rates_fits_the_logistic_decay() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "setting = classification\ndim = 24\nsubspace_rank = 12\nn_particles = 6\nseed = 11\nhorizon = 2000\n",
    );
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "rates",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("ratefit.json")).unwrap())
            .unwrap();
    assert_eq!(fit["model"], "poly_log");
    let slope = fit["slope"].as_f64().unwrap();
    assert!((-3.5..=-1.0).contains(&slope), "slope {slope}");
    assert_eq!(fit["estimate"].as_f64().unwrap(), slope);
}

#[test]
fn learner_round_reports_the_outcome() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "setting = regression\ndim = 24\nsubspace_rank = 12\nn_particles = 40\nseed = 11\nhorizon = 5\n",
    );
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "learner",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("learner.json")).unwrap())
            .unwrap();
    assert_eq!(doc["schema"], "advshift.learner.v1");
    assert_eq!(doc["adversary_steps"], 5);
    assert_eq!(doc["learner_rate"], 0.5);
    assert_eq!(doc["excluded"], 0);
    let err_norm = doc["err_norm"].as_f64().unwrap();
    assert!(err_norm.is_finite() && err_norm >= 0.0);
    let along_star = doc["err_along_star"].as_f64().unwrap();
    assert!(along_star.abs() <= err_norm + 1e-12);
    assert!(doc["curse_ratio"].as_f64().unwrap().is_finite());
}

#[test]
fn sweep_emits_one_row_per_value_and_contains_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "setting = regression\ndim = 24\nsubspace_rank = 12\nn_particles = 6\nseed = 11\n\
         sweep_key = gamma\nsweep_values = 0.4,-1\n",
    );
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let (cols, rows) = read_csv(&out_dir.join("sweep.csv")).unwrap();
    assert_eq!(
        cols,
        ["label", "setting", "mean_align_b", "mean_align_c", "rate_estimate", "lyapunov_plateau", "error"]
    );
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "gamma=0.4");
    assert_eq!(rows[0][6], "");
    let align: f64 = rows[0][2].parse().unwrap();
    assert!(align.is_finite() && align > 0.0);
    // the bad value fails in its row instead of killing the sweep
    assert_eq!(rows[1][0], "gamma=-1");
    assert!(rows[1][6].contains("step size"), "{:?}", rows[1][6]);
    assert_eq!(rows[1][2], "NaN");
}
