//! CSV and JSON emission.
//!
//! Every file starts with `#`-prefixed header lines naming schema version,
//! seed, and the full config echo, then a column row for CSVs. Floats use
//! Rust's shortest round-trip formatting, so parsing a file recovers every
//! value bit for bit; undefined entries print as NaN.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use advshift_core::dynamics::TrajectoryRecord;
use advshift_core::experiment::{FigureData, RateFit, RateModel, SweepRow};
use advshift_core::game::{ErrorSplit, LearnerOutcome};
use advshift_core::scalar::DiagnosticRow;

use crate::config::{setting_name, RunConfig};
use crate::error::CliResult;

/// Shortest decimal that parses back to the same bits; NaN for missing.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    fmt_f64(v.unwrap_or(f64::NAN))
}

fn open(path: &Path) -> CliResult<BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn header(w: &mut impl Write, schema: &str, cfg: &RunConfig) -> CliResult<()> {
    writeln!(w, "# schema {schema}")?;
    writeln!(w, "# seed {}", cfg.seed)?;
    writeln!(w, "# config {}", cfg.echo())?;
    Ok(())
}

pub fn write_trajectory(
    path: &Path,
    cfg: &RunConfig,
    records: &[TrajectoryRecord],
) -> CliResult<()> {
    let mut w = open(path)?;
    header(&mut w, "advshift.trajectory.v1", cfg)?;
    writeln!(w, "t,particle_id,align_b,align_c,a,b,norm_log10")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.t,
            r.particle,
            fmt_opt(r.obs.align_b),
            fmt_opt(r.obs.align_c),
            fmt_f64(r.obs.a),
            fmt_f64(r.obs.b),
            fmt_f64(r.obs.log10_norm),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Per-particle certificate quantities along the run; one row per
/// trajectory record.
pub fn write_diagnostics(
    path: &Path,
    cfg: &RunConfig,
    rows: &[(usize, DiagnosticRow)],
) -> CliResult<()> {
    let mut w = open(path)?;
    header(&mut w, "advshift.diagnostics.v1", cfg)?;
    writeln!(w, "t,particle_id,a,b,s,lyapunov,env_upper,env_lower,assumption_ok")?;
    for (pid, d) in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            d.t,
            pid,
            fmt_f64(d.a),
            fmt_f64(d.b),
            fmt_f64(d.s),
            fmt_opt(d.lyapunov),
            fmt_opt(d.env_upper),
            fmt_f64(d.env_lower),
            d.assumption_ok,
        )?;
    }
    w.flush()?;
    Ok(())
}

/// One `snapshots/t_<k>.csv` per recorded time: the unit-sphere plane
/// coordinates and full-space alignments of every particle.
pub fn write_snapshots(dir: &Path, cfg: &RunConfig, fig: &FigureData) -> CliResult<Vec<PathBuf>> {
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir)?;
    let mut written = Vec::new();
    let times: Vec<u64> = {
        let mut ts: Vec<u64> = fig.rows.iter().map(|r| r.t).collect();
        ts.dedup();
        ts
    };
    for t in times {
        let path = snap_dir.join(format!("t_{t}.csv"));
        let mut w = open(&path)?;
        header(&mut w, "advshift.snapshot.v1", cfg)?;
        writeln!(w, "particle_id,u,v,align_b,align_c,stationary")?;
        for r in fig.rows.iter().filter(|r| r.t == t) {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.particle,
                fmt_f64(r.u),
                fmt_f64(r.v),
                fmt_f64(r.align_b),
                fmt_f64(r.align_c),
                r.stationary,
            )?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_ratefit(path: &Path, cfg: &RunConfig, fit: &RateFit) -> CliResult<()> {
    let model = match fit.model {
        RateModel::ExpDecay => "exp_decay",
        RateModel::PolyLog => "poly_log",
    };
    let doc = serde_json::json!({
        "schema": "advshift.ratefit.v1",
        "seed": cfg.seed,
        "config": cfg.echo(),
        "model": model,
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r2": fit.r2,
        "estimate": fit.estimate,
    });
    let mut w = open(path)?;
    writeln!(w, "{}", serde_json::to_string_pretty(&doc).expect("json"))?;
    w.flush()?;
    Ok(())
}

pub fn write_learner(
    path: &Path,
    cfg: &RunConfig,
    out: &LearnerOutcome,
    split: &ErrorSplit,
) -> CliResult<()> {
    let doc = serde_json::json!({
        "schema": "advshift.learner.v1",
        "seed": cfg.seed,
        "config": cfg.echo(),
        "adversary_steps": cfg.horizon,
        "learner_rate": cfg.learner_rate,
        "learner_steps": cfg.learner_steps,
        "noise_free": cfg.noise_free,
        "excluded": out.excluded,
        "err_norm": out.err_norm,
        "curse_ratio": out.curse_ratio,
        "err_along_star": split.along_star,
        "err_along_b": split.along_b,
        "err_residual": split.residual,
    });
    let mut w = open(path)?;
    writeln!(w, "{}", serde_json::to_string_pretty(&doc).expect("json"))?;
    w.flush()?;
    Ok(())
}

/// Records the resolved parameters (every default made explicit), the
/// derived step quantities, and what was written where.
pub fn write_manifest(
    path: &Path,
    cfg: &RunConfig,
    command: &str,
    derived: &serde_json::Value,
    outputs: &[PathBuf],
) -> CliResult<()> {
    let files: Vec<String> = outputs
        .iter()
        .map(|p| {
            p.strip_prefix(path.parent().unwrap_or(Path::new("")))
                .unwrap_or(p)
                .display()
                .to_string()
        })
        .collect();
    let doc = serde_json::json!({
        "schema": "advshift.manifest.v1",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": cfg.seed,
        "setting": setting_name(cfg.setting),
        "config": cfg.echo(),
        "derived": derived,
        "outputs": files,
    });
    let mut w = open(path)?;
    writeln!(w, "{}", serde_json::to_string_pretty(&doc).expect("json"))?;
    w.flush()?;
    Ok(())
}

pub fn write_sweep(path: &Path, cfg: &RunConfig, rows: &[SweepRow]) -> CliResult<()> {
    let mut w = open(path)?;
    header(&mut w, "advshift.sweep.v1", cfg)?;
    writeln!(w, "label,setting,mean_align_b,mean_align_c,rate_estimate,lyapunov_plateau,error")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.label,
            setting_name(r.setting),
            fmt_opt(r.mean_align_b),
            fmt_opt(r.mean_align_c),
            fmt_opt(r.rate_estimate),
            fmt_opt(r.lyapunov_plateau),
            r.error.as_deref().unwrap_or(""),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Minimal CSV reader for emitted files: skips `#` headers, returns the
/// column row and data cells. Used by the round-trip checks.
pub fn read_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let cols = lines
        .next()
        .map(|l| l.split(',').map(|c| c.to_string()).collect())
        .unwrap_or_default();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.to_string()).collect())
        .collect();
    Ok((cols, rows))
}
