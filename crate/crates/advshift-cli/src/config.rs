//! Flat `key=value` run configuration.
//!
//! One assignment per line; blank lines and `#` comment lines are skipped.
//! Unknown and repeated keys are hard errors so a typo cannot silently fall
//! back to a default. Every value left out is filled from the documented
//! per-setting defaults and echoed into each output header, so a result
//! file always names the exact parameters that produced it.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use advshift_core::dynamics::record_times_every;
use advshift_core::experiment::{ExperimentConfig, InitLaw, ThetaStarRule};
use advshift_core::{Setting, Vector};

use crate::error::{CliError, CliResult};

/// A fully resolved run configuration: the core experiment parameters plus
/// the learner-round and sweep settings that only the CLI consumes.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub setting: Setting,
    pub dim: usize,
    pub subspace_rank: usize,
    pub theta_star: ThetaStarRule,
    pub gamma: f64,
    pub n_particles: usize,
    pub horizon: u64,
    /// Explicit `snapshots = ...` list, if one was given.
    pub snapshots: Option<Vec<u64>>,
    /// Explicit `record_every = ...` stride, if one was given.
    pub record_every: Option<u64>,
    pub seed: u64,
    pub init_law: InitLaw,
    pub basin_c: f64,
    pub learner_rate: f64,
    pub learner_steps: u32,
    pub noise_free: bool,
    pub sweep_key: Option<String>,
    pub sweep_values: Option<Vec<String>>,
}

/// Keys a config file may set. `sweep_key` must name one of these minus
/// the grid/sweep keys themselves.
const KNOWN_KEYS: &[&str] = &[
    "setting",
    "dim",
    "subspace_rank",
    "theta_star",
    "gamma",
    "n_particles",
    "horizon",
    "snapshots",
    "record_every",
    "seed",
    "init_law",
    "basin_c",
    "learner_rate",
    "learner_steps",
    "noise_free",
    "sweep_key",
    "sweep_values",
];

const SWEEPABLE_KEYS: &[&str] = &[
    "setting",
    "dim",
    "subspace_rank",
    "gamma",
    "n_particles",
    "horizon",
    "record_every",
    "seed",
    "init_law",
    "basin_c",
    "learner_rate",
    "learner_steps",
    "noise_free",
];

fn bad(key: &str, value: &str, want: &str) -> CliError {
    CliError::Config(format!("key '{key}': cannot parse '{value}' as {want}"))
}

fn parse_u64(key: &str, value: &str) -> CliResult<u64> {
    value.parse().map_err(|_| bad(key, value, "a nonnegative integer"))
}

fn parse_usize(key: &str, value: &str) -> CliResult<usize> {
    value.parse().map_err(|_| bad(key, value, "a nonnegative integer"))
}

fn parse_f64(key: &str, value: &str) -> CliResult<f64> {
    value.parse().map_err(|_| bad(key, value, "a number"))
}

impl RunConfig {
    /// Per-setting defaults: the two benchmark figure setups.
    pub fn defaults(setting: Setting) -> Self {
        let base = match setting {
            Setting::Regression => ExperimentConfig::regression_figure(),
            Setting::Classification => ExperimentConfig::classification_figure(),
        };
        RunConfig {
            setting,
            dim: base.dim,
            subspace_rank: base.subspace_rank,
            theta_star: base.theta_star,
            gamma: base.gamma,
            n_particles: base.n_particles,
            horizon: base.horizon,
            snapshots: None,
            record_every: None,
            seed: base.seed,
            init_law: base.init_law,
            basin_c: base.basin_c,
            learner_rate: match setting {
                Setting::Regression => 0.5,
                Setting::Classification => 1.0,
            },
            learner_steps: 1,
            noise_free: false,
            sweep_key: None,
            sweep_values: None,
        }
    }

    /// Applies one `key = value` assignment.
    pub fn apply(&mut self, key: &str, value: &str) -> CliResult<()> {
        match key {
            "setting" => {
                let new = parse_setting(value)?;
                if new != self.setting {
                    // re-derive the per-setting defaults the user has not
                    // pinned; simplest safe rule: setting must come first
                    return Err(CliError::Config(
                        "key 'setting' must be the first assignment in the file".into(),
                    ));
                }
            }
            "dim" => self.dim = parse_usize(key, value)?,
            "subspace_rank" => self.subspace_rank = parse_usize(key, value)?,
            "theta_star" => {
                self.theta_star = if value == "harmonic" {
                    ThetaStarRule::Harmonic
                } else if let Some(list) = value.strip_prefix("custom:") {
                    let entries: CliResult<Vec<f64>> =
                        list.split(',').map(|e| parse_f64(key, e.trim())).collect();
                    ThetaStarRule::Custom(
                        Vector::new(entries?)
                            .map_err(|e| CliError::Config(format!("key '{key}': {e}")))?,
                    )
                } else {
                    return Err(bad(key, value, "'harmonic' or 'custom:v1,v2,...'"));
                }
            }
            "gamma" => self.gamma = parse_f64(key, value)?,
            "n_particles" => self.n_particles = parse_usize(key, value)?,
            "horizon" => self.horizon = parse_u64(key, value)?,
            "snapshots" => {
                let times: CliResult<Vec<u64>> =
                    value.split(',').map(|e| parse_u64(key, e.trim())).collect();
                self.snapshots = Some(times?);
            }
            "record_every" => self.record_every = Some(parse_u64(key, value)?),
            "seed" => self.seed = parse_u64(key, value)?,
            "init_law" => {
                self.init_law = match value {
                    "subspace" => InitLaw::Subspace,
                    "ambient" => InitLaw::Ambient,
                    _ => return Err(bad(key, value, "'subspace' or 'ambient'")),
                }
            }
            "basin_c" => self.basin_c = parse_f64(key, value)?,
            "learner_rate" => self.learner_rate = parse_f64(key, value)?,
            "learner_steps" => {
                self.learner_steps =
                    value.parse().map_err(|_| bad(key, value, "a nonnegative integer"))?
            }
            "noise_free" => {
                self.noise_free = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(bad(key, value, "'true' or 'false'")),
                }
            }
            "sweep_key" => {
                if !SWEEPABLE_KEYS.contains(&value) {
                    return Err(CliError::Config(format!(
                        "key 'sweep_key': '{value}' is not sweepable (choose from {})",
                        SWEEPABLE_KEYS.join(", ")
                    )));
                }
                self.sweep_key = Some(value.to_string());
            }
            "sweep_values" => {
                self.sweep_values =
                    Some(value.split(',').map(|e| e.trim().to_string()).collect());
            }
            _ => {
                return Err(CliError::Config(format!(
                    "unknown key '{key}' (known keys: {})",
                    KNOWN_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// The recording grid: an explicit list wins, otherwise a stride
    /// (given or `horizon/8`, the benchmark figures' 9-point schedule).
    pub fn grid(&self) -> CliResult<Vec<u64>> {
        if let (Some(_), Some(_)) = (&self.snapshots, &self.record_every) {
            return Err(CliError::Config(
                "'snapshots' and 'record_every' are mutually exclusive".into(),
            ));
        }
        if let Some(list) = &self.snapshots {
            return Ok(list.clone());
        }
        let every = self.record_every.unwrap_or_else(|| (self.horizon / 8).max(1));
        Ok(record_times_every(self.horizon, every)?)
    }

    /// The core experiment view of this config, grid resolved and
    /// validated.
    pub fn experiment(&self) -> CliResult<ExperimentConfig> {
        let cfg = ExperimentConfig {
            setting: self.setting,
            dim: self.dim,
            subspace_rank: self.subspace_rank,
            theta_star: self.theta_star.clone(),
            gamma: self.gamma,
            n_particles: self.n_particles,
            horizon: self.horizon,
            snapshots: self.grid()?,
            seed: self.seed,
            init_law: self.init_law,
            basin_c: self.basin_c,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical one-line echo of every resolved value, embedded in each
    /// output header.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "setting={} dim={} subspace_rank={} theta_star={} gamma={} \
             n_particles={} horizon={} snapshots={} seed={} init_law={} \
             basin_c={} learner_rate={} learner_steps={} noise_free={}",
            setting_name(self.setting),
            self.dim,
            self.subspace_rank,
            theta_star_name(&self.theta_star),
            self.gamma,
            self.n_particles,
            self.horizon,
            self.grid()
                .map(|g| g.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(","))
                .unwrap_or_else(|_| "invalid".into()),
            self.seed,
            init_law_name(self.init_law),
            self.basin_c,
            self.learner_rate,
            self.learner_steps,
            self.noise_free,
        );
        s
    }

    /// Expands the sweep keys into labeled single-run configs.
    pub fn expand_sweep(&self) -> CliResult<Vec<(String, RunConfig)>> {
        let key = self.sweep_key.as_deref().ok_or_else(|| {
            CliError::Config("sweep needs 'sweep_key' in the config".into())
        })?;
        let values = self.sweep_values.as_ref().ok_or_else(|| {
            CliError::Config("sweep needs 'sweep_values' in the config".into())
        })?;
        if values.is_empty() {
            return Err(CliError::Config("'sweep_values' is empty".into()));
        }
        let mut out = Vec::with_capacity(values.len());
        for v in values {
            let mut cfg = self.clone();
            cfg.sweep_key = None;
            cfg.sweep_values = None;
            if key == "setting" {
                // the one key apply() refuses mid-file: rebuild from the
                // other setting's defaults, then replay the overrides we
                // can carry over (none, for a bare setting sweep)
                cfg = RunConfig { setting: parse_setting(v)?, ..RunConfig::defaults(parse_setting(v)?) };
            } else {
                cfg.apply(key, v)?;
            }
            out.push((format!("{key}={v}"), cfg));
        }
        Ok(out)
    }
}

fn parse_setting(value: &str) -> CliResult<Setting> {
    match value {
        "regression" => Ok(Setting::Regression),
        "classification" => Ok(Setting::Classification),
        _ => Err(bad("setting", value, "'regression' or 'classification'")),
    }
}

pub fn setting_name(s: Setting) -> &'static str {
    match s {
        Setting::Regression => "regression",
        Setting::Classification => "classification",
    }
}

pub fn init_law_name(l: InitLaw) -> &'static str {
    match l {
        InitLaw::Subspace => "subspace",
        InitLaw::Ambient => "ambient",
    }
}

pub fn theta_star_name(rule: &ThetaStarRule) -> String {
    match rule {
        ThetaStarRule::Harmonic => "harmonic".into(),
        ThetaStarRule::Custom(v) => {
            let entries: Vec<String> =
                v.as_slice().iter().map(|e| e.to_string()).collect();
            format!("custom:{}", entries.join(","))
        }
    }
}

/// Parses config text. The `setting` key is required and must come first
/// so the per-setting defaults are fixed before any override lands.
pub fn parse_str(text: &str) -> CliResult<RunConfig> {
    let mut cfg: Option<RunConfig> = None;
    let mut seen: HashSet<String> = HashSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("line {}: expected 'key = value'", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(CliError::Config(format!("line {}: key '{key}' repeated", lineno + 1)));
        }
        match (&mut cfg, key) {
            (None, "setting") => cfg = Some(RunConfig::defaults(parse_setting(value)?)),
            (None, _) => {
                return Err(CliError::Config(
                    "the first assignment must be 'setting = regression|classification'"
                        .into(),
                ))
            }
            (Some(c), _) => c.apply(key, value)?,
        }
    }
    let cfg = cfg.ok_or_else(|| {
        CliError::Config("config sets no keys; at least 'setting' is required".into())
    })?;
    if cfg.sweep_key.is_some() != cfg.sweep_values.is_some() {
        return Err(CliError::Config(
            "'sweep_key' and 'sweep_values' must be given together".into(),
        ));
    }
    Ok(cfg)
}

/// Reads and parses a config file. A missing or unreadable file is a
/// configuration error, not an io failure.
pub fn load(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("cannot read config {}: {e}", path.display()))
    })?;
    parse_str(&text)
}
