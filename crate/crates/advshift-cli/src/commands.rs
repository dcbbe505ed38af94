//! One function per subcommand. Each loads and resolves configuration,
//! drives the core library, and writes the documented files; all output
//! paths land under the `--out` directory.

use std::path::Path;

use advshift_core::dynamics::{blessing_rate, TrajectoryRecord};
use advshift_core::experiment::{
    build_instance, fit_classification_rate, fit_regression_rate, reproduce_figure,
    sweep_row, ExperimentConfig, SweepRow,
};
use advshift_core::game::{err_decomposition, play_round};
use advshift_core::scalar::{diagnose, ScalarParams, ScalarState};
use advshift_core::{ModelPair, Setting};
use rayon::prelude::*;

use crate::config::{self, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output;
use crate::parallel::{make_pool, resolve_threads, run_ensemble_parallel};

fn load_config(path: &Path, seed: Option<u64>) -> CliResult<RunConfig> {
    let mut cfg = config::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn derived_block(pair: &ModelPair, gamma: f64) -> serde_json::Value {
    let gt = pair.gamma_tilde(gamma);
    serde_json::json!({
        "gamma_tilde": gt,
        "eta": pair.eta(gamma),
        "signal_ratio": pair.signal_ratio().ok(),
        "blessing_rate": blessing_rate(gt),
    })
}

fn scalar_params(pair: &ModelPair, gamma: f64) -> CliResult<ScalarParams> {
    Ok(ScalarParams { eta: pair.eta(gamma), ratio: pair.signal_ratio()? })
}

pub fn simulate(
    config_path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    threads: Option<usize>,
) -> CliResult<()> {
    let cfg = load_config(config_path, seed)?;
    let exp = cfg.experiment()?;
    let mut inst = build_instance(&exp)?;
    let pool = make_pool(resolve_threads(threads)?)?;
    let run = run_ensemble_parallel(
        &mut inst.particles,
        &inst.pair,
        exp.setting,
        exp.gamma,
        &exp.snapshots,
        false,
        &pool,
    )?;
    let trajectory = out_dir.join("trajectory.csv");
    output::write_trajectory(&trajectory, &cfg, &run.records)?;
    let mut outputs = vec![trajectory];
    if exp.setting == Setting::Classification {
        let params = scalar_params(&inst.pair, exp.gamma)?;
        let rows: Vec<_> = run
            .records
            .iter()
            .map(|r| {
                (
                    r.particle,
                    diagnose(
                        r.t,
                        &ScalarState::new(r.obs.a, r.obs.b),
                        &params,
                        exp.basin_c,
                    ),
                )
            })
            .collect();
        let diagnostics = out_dir.join("diagnostics.csv");
        output::write_diagnostics(&diagnostics, &cfg, &rows)?;
        outputs.push(diagnostics);
    }
    let manifest = out_dir.join("manifest.json");
    output::write_manifest(
        &manifest,
        &cfg,
        "simulate",
        &derived_block(&inst.pair, exp.gamma),
        &outputs,
    )?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    Fig1,
    Fig2,
}

pub fn reproduce(figure: Figure, out_dir: &Path, seed: Option<u64>) -> CliResult<()> {
    let mut cfg = match figure {
        Figure::Fig1 => RunConfig::defaults(Setting::Regression),
        Figure::Fig2 => RunConfig::defaults(Setting::Classification),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let exp = cfg.experiment()?;
    let fig = reproduce_figure(&exp)?;
    let mut outputs = output::write_snapshots(out_dir, &cfg, &fig)?;
    let trajectory = out_dir.join("trajectory.csv");
    output::write_trajectory(&trajectory, &cfg, &fig.records)?;
    outputs.push(trajectory);
    let manifest = out_dir.join("manifest.json");
    let name = match figure {
        Figure::Fig1 => "reproduce fig1",
        Figure::Fig2 => "reproduce fig2",
    };
    output::write_manifest(
        &manifest,
        &cfg,
        name,
        &derived_block(&fig.instance.pair, exp.gamma),
        &outputs,
    )?;
    Ok(())
}

/// Roughly geometric recording times for rate fitting: dense early, a full
/// final decade late, always including 0 and the horizon.
pub fn rate_grid(horizon: u64) -> Vec<u64> {
    let mut ts = vec![0u64];
    let points = 40usize;
    for k in 0..=points {
        let t = ((horizon as f64).powf(k as f64 / points as f64)).round() as u64;
        if t > *ts.last().unwrap() {
            ts.push(t);
        }
    }
    if *ts.last().unwrap() < horizon {
        ts.push(horizon);
    }
    ts
}

pub fn rates(
    config_path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    threads: Option<usize>,
) -> CliResult<()> {
    let mut cfg = load_config(config_path, seed)?;
    let mut exp = cfg.experiment()?;
    // the fit needs log-spread times, not the figure schedule; fold the
    // replacement back into the config so the headers echo what ran
    exp.snapshots = rate_grid(exp.horizon);
    cfg.snapshots = Some(exp.snapshots.clone());
    cfg.record_every = None;
    let mut inst = build_instance(&exp)?;
    let pool = make_pool(resolve_threads(threads)?)?;
    let run = run_ensemble_parallel(
        &mut inst.particles,
        &inst.pair,
        exp.setting,
        exp.gamma,
        &exp.snapshots,
        false,
        &pool,
    )?;
    let fit = match exp.setting {
        Setting::Regression => fit_regression_rate(&run.records, &inst.pair)?,
        Setting::Classification => {
            let params = scalar_params(&inst.pair, exp.gamma)?;
            fit_classification_rate(&run.records, &params, exp.basin_c)?
        }
    };
    let trajectory = out_dir.join("trajectory.csv");
    output::write_trajectory(&trajectory, &cfg, &run.records)?;
    let ratefit = out_dir.join("ratefit.json");
    output::write_ratefit(&ratefit, &cfg, &fit)?;
    let manifest = out_dir.join("manifest.json");
    output::write_manifest(
        &manifest,
        &cfg,
        "rates",
        &derived_block(&inst.pair, exp.gamma),
        &[trajectory, ratefit],
    )?;
    Ok(())
}

pub fn learner(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> CliResult<()> {
    let cfg = load_config(config_path, seed)?;
    let exp = cfg.experiment()?;
    let inst = build_instance(&exp)?;
    let outcome = play_round(
        &inst.pair,
        exp.setting,
        inst.particles,
        exp.horizon,
        exp.gamma,
        cfg.learner_rate,
        cfg.learner_steps,
        cfg.seed,
        cfg.noise_free,
    )?;
    let split = err_decomposition(&outcome.theta1, &inst.pair)?;
    let learner_path = out_dir.join("learner.json");
    output::write_learner(&learner_path, &cfg, &outcome, &split)?;
    let manifest = out_dir.join("manifest.json");
    output::write_manifest(
        &manifest,
        &cfg,
        "learner",
        &derived_block(&inst.pair, exp.gamma),
        &[learner_path],
    )?;
    Ok(())
}

pub fn sweep(config_path: &Path, out_dir: &Path, threads: Option<usize>) -> CliResult<()> {
    let cfg = config::load(config_path)?;
    let variants = cfg.expand_sweep()?;
    let resolved: Vec<(String, Result<ExperimentConfig, CliError>)> = variants
        .into_iter()
        .map(|(label, rc)| (label, rc.experiment()))
        .collect();
    let pool = make_pool(resolve_threads(threads)?)?;
    let rows: Vec<SweepRow> = pool.install(|| {
        resolved
            .par_iter()
            .map(|(label, res)| match res {
                Ok(exp) => sweep_row(label, exp),
                Err(e) => SweepRow {
                    label: label.clone(),
                    setting: cfg.setting,
                    mean_align_b: None,
                    mean_align_c: None,
                    rate_estimate: None,
                    lyapunov_plateau: None,
                    error: Some(e.to_string()),
                },
            })
            .collect()
    });
    let sweep_path = out_dir.join("sweep.csv");
    output::write_sweep(&sweep_path, &cfg, &rows)?;
    let manifest = out_dir.join("manifest.json");
    output::write_manifest(
        &manifest,
        &cfg,
        "sweep",
        &serde_json::json!({
            "sweep_key": cfg.sweep_key,
            "sweep_values": cfg.sweep_values,
        }),
        &[sweep_path],
    )?;
    Ok(())
}

pub fn verify(suite: &str, seed: u64) -> CliResult<()> {
    let report = crate::verify::run_suite(suite, seed)?;
    let mut stdout = std::io::stdout().lock();
    report.print(&mut stdout)?;
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .properties
            .iter()
            .filter(|p| p.failed > 0)
            .map(|p| p.name)
            .collect();
        Err(CliError::Property(format!(
            "suite {} violated: {}",
            suite,
            failed.join("; ")
        )))
    }
}

/// Records grouped per snapshot time, for tests that want block structure.
pub fn records_by_time(records: &[TrajectoryRecord]) -> Vec<(u64, Vec<&TrajectoryRecord>)> {
    let mut out: Vec<(u64, Vec<&TrajectoryRecord>)> = Vec::new();
    for r in records {
        match out.last_mut() {
            Some((t, rows)) if *t == r.t => rows.push(r),
            _ => out.push((r.t, vec![r])),
        }
    }
    out
}
