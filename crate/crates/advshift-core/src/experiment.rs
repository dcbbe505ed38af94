//! Instance construction (Haar support, harmonic target, best-response
//! current model), figure-style snapshot tables, rate fitting against the
//! predicted convergence shapes, and one-axis parameter sweeps.

use alloc::string::String;
use alloc::vec::Vec;

use crate::dynamics::{run_ensemble, TrajectoryRecord};
use crate::error::Error;
use crate::linalg::{Subspace, Vector};
use crate::math;
use crate::objectives::{best_response, ModelPair, Setting};
use crate::rng::particle_init_rng;
use crate::scalar::{
    admissible_exp_interval, check_assumption, scalar_run, ScalarParams, ScalarState,
};

/// How the target model's entries are chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum ThetaStarRule {
    /// Entry `i` (1-based) is `1/i`.
    Harmonic,
    Custom(Vector),
}

/// Where initial particles are drawn before normalization to the sphere.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitLaw {
    /// Standard normal in support coordinates, mapped through the basis.
    Subspace,
    /// Standard normal in the full ambient space. Needed for the
    /// squared-error figure: support-confined starts are exact fixed
    /// points of that flow (the residual is orthogonal to the support),
    /// so nothing would ever move.
    Ambient,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub dim: usize,
    pub subspace_rank: usize,
    pub theta_star: ThetaStarRule,
    pub gamma: f64,
    pub n_particles: usize,
    pub horizon: u64,
    /// Recording times, strictly increasing, within `[0, horizon]`.
    pub snapshots: Vec<u64>,
    pub seed: u64,
    pub init_law: InitLaw,
    /// Threshold constant for the trapping-region check.
    pub basin_c: f64,
}

impl ExperimentConfig {
    /// Squared-error figure setup: ambient-drawn unit starts, step size
    /// giving an effective rate near one, snapshots every 5 up to 40.
    pub fn regression_figure() -> Self {
        Self {
            setting: Setting::Regression,
            dim: 200,
            subspace_rank: 100,
            theta_star: ThetaStarRule::Harmonic,
            gamma: 0.6,
            n_particles: 500,
            horizon: 40,
            snapshots: (0..=8).map(|k| 5 * k).collect(),
            seed: 42,
            init_law: InitLaw::Ambient,
            basin_c: 5.0,
        }
    }

    /// Logistic figure setup: support-confined unit starts, snapshots
    /// every 25 up to 200.
    pub fn classification_figure() -> Self {
        Self {
            setting: Setting::Classification,
            dim: 200,
            subspace_rank: 100,
            theta_star: ThetaStarRule::Harmonic,
            gamma: 0.25,
            n_particles: 500,
            horizon: 200,
            snapshots: (0..=8).map(|k| 25 * k).collect(),
            seed: 42,
            init_law: InitLaw::Subspace,
            basin_c: 5.0,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if self.subspace_rank == 0 || self.subspace_rank > self.dim {
            return Err(Error::InvalidParameter(
                "support rank must be between 1 and the dimension".into(),
            ));
        }
        if self.gamma <= 0.0 || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter("step size must be positive".into()));
        }
        if self.n_particles == 0 {
            return Err(Error::InvalidParameter("need at least one particle".into()));
        }
        if self.snapshots.is_empty() {
            return Err(Error::InvalidParameter("need at least one snapshot time".into()));
        }
        if self.snapshots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "snapshot times must be strictly increasing".into(),
            ));
        }
        if *self.snapshots.last().unwrap() > self.horizon {
            return Err(Error::InvalidParameter(
                "snapshot times must not exceed the horizon".into(),
            ));
        }
        // NaN fails both comparisons, so reject it explicitly
        if self.basin_c <= 0.0 || self.basin_c.is_nan() {
            return Err(Error::InvalidParameter("basin constant must be positive".into()));
        }
        if let ThetaStarRule::Custom(v) = &self.theta_star {
            if v.dim() != self.dim {
                return Err(Error::DimensionMismatch { left: v.dim(), right: self.dim });
            }
        }
        Ok(())
    }
}

/// A fully built problem instance.
pub struct Instance {
    pub subspace: Subspace,
    pub pair: ModelPair,
    pub particles: Vec<Vector>,
}

pub fn theta_star_vector(rule: &ThetaStarRule, dim: usize) -> Result<Vector, Error> {
    match rule {
        ThetaStarRule::Harmonic => {
            Vector::new((1..=dim).map(|i| 1.0 / i as f64).collect())
        }
        ThetaStarRule::Custom(v) => {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch { left: v.dim(), right: dim });
            }
            Ok(v.clone())
        }
    }
}

/// Draws the support, sets the current model to the minimum-norm best
/// response, and draws unit-norm initial particles per the init law. All
/// randomness comes from substreams of `cfg.seed`: the support uses its
/// own stream and each particle has one keyed by its index, so results
/// are independent of evaluation order.
pub fn build_instance(cfg: &ExperimentConfig) -> Result<Instance, Error> {
    cfg.validate()?;
    let theta_star = theta_star_vector(&cfg.theta_star, cfg.dim)?;
    let subspace = Subspace::haar(cfg.dim, cfg.subspace_rank, cfg.seed)?;
    let theta0 = best_response(&theta_star, &subspace)?;
    let pair = ModelPair::new(theta_star, theta0)?;
    let mut particles = Vec::with_capacity(cfg.n_particles);
    for i in 0..cfg.n_particles {
        let mut rng = particle_init_rng(cfg.seed, i);
        let raw = match cfg.init_law {
            InitLaw::Ambient => Vector::standard_normal(cfg.dim, &mut rng),
            InitLaw::Subspace => {
                let coords: Vec<f64> = (0..cfg.subspace_rank)
                    .map(|_| rand::Rng::sample(&mut rng, rand_distr::StandardNormal))
                    .collect();
                subspace.coords_to_ambient(&coords)?
            }
        };
        particles.push(raw.normalized()?);
    }
    Ok(Instance { subspace, pair, particles })
}

/// One particle at one snapshot time, reduced to the plot plane.
#[derive(Clone, Copy, Debug)]
pub struct FigureRow {
    pub t: u64,
    pub particle: usize,
    /// Coordinate of `x/|x|` along the unit target direction.
    pub u: f64,
    /// Coordinate along the residual direction orthonormalized against
    /// the target direction.
    pub v: f64,
    /// `|cos|` with the residual direction (NaN when undefined).
    pub align_b: f64,
    /// `|cos|` with the limit direction of the logistic flow.
    pub align_c: f64,
    /// Exact fixed point of the squared-error flow (zero residual score
    /// at the start); its rows stay constant forever.
    pub stationary: bool,
}

/// Everything a figure needs: plane rows per snapshot, the raw alignment
/// records, and per-particle basin information.
pub struct FigureData {
    pub instance: Instance,
    pub rows: Vec<FigureRow>,
    pub records: Vec<TrajectoryRecord>,
    /// First recorded time the particle (or its mirror image) passed the
    /// trapping-region check.
    pub basin_first: Vec<Option<u64>>,
    pub stationary: Vec<bool>,
}

/// A state and its mirror image are the same orbit up to sign, so either
/// passing counts.
fn basin_pass_symmetric(a: f64, b: f64, p: &ScalarParams, c: f64) -> bool {
    check_assumption(&ScalarState::new(a, b), p, c).ok
        || check_assumption(&ScalarState::new(-a, -b), p, c).ok
}

pub fn reproduce_figure(cfg: &ExperimentConfig) -> Result<FigureData, Error> {
    let mut inst = build_instance(cfg)?;
    let eta = inst.pair.eta(cfg.gamma);
    let ratio = inst.pair.signal_ratio()?;
    let params = ScalarParams { eta, ratio };

    let star_hat = inst.pair.theta_star().normalized()?;
    let blessing = inst.pair.blessing_direction()?;
    let plane = Subspace::from_spanning(&[star_hat, blessing])?;

    let out = run_ensemble(
        &mut inst.particles,
        &inst.pair,
        cfg.setting,
        cfg.gamma,
        &cfg.snapshots,
        true,
    )?;

    let n = cfg.n_particles;
    let mut stationary = alloc::vec![false; n];
    for rec in out.records.iter().filter(|r| r.t == cfg.snapshots[0]) {
        if cfg.setting == Setting::Regression && rec.obs.b == 0.0 {
            stationary[rec.particle] = true;
        }
    }
    let mut basin_first: Vec<Option<u64>> = alloc::vec![None; n];
    for rec in &out.records {
        if basin_first[rec.particle].is_none()
            && basin_pass_symmetric(rec.obs.a, rec.obs.b, &params, cfg.basin_c)
        {
            basin_first[rec.particle] = Some(rec.t);
        }
    }

    let mut rows = Vec::with_capacity(out.snapshots.len() * n);
    for (snap, recs) in out
        .snapshots
        .iter()
        .zip(out.records.chunks(n))
    {
        for (pid, x) in snap.states.iter().enumerate() {
            let rec = &recs[pid];
            let (u, v) = match x.normalized() {
                Ok(hat) => (hat.inner(&plane.basis()[0])?, hat.inner(&plane.basis()[1])?),
                Err(_) => (f64::NAN, f64::NAN),
            };
            rows.push(FigureRow {
                t: snap.t,
                particle: pid,
                u,
                v,
                align_b: rec.obs.align_b.map(f64::abs).unwrap_or(f64::NAN),
                align_c: rec.obs.align_c.map(f64::abs).unwrap_or(f64::NAN),
                stationary: stationary[pid],
            });
        }
    }
    Ok(FigureData { instance: inst, rows, records: out.records, basin_first, stationary })
}

/// Which convergence shape a fit assumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateModel {
    /// `log(1 - align^2)` linear in `t`; slope is minus the per-step rate.
    ExpDecay,
    /// `log(1 - align)` linear in `log t`; slope near -2.
    PolyLog,
}

#[derive(Clone, Copy, Debug)]
pub struct RateFit {
    pub model: RateModel,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// The comparable quantity: the per-step rate for [`RateModel::ExpDecay`]
    /// (negated slope), the power itself for [`RateModel::PolyLog`].
    pub estimate: f64,
}

/// Pooled least squares with one intercept per particle (all series are
/// centered), so mixing particles with different orthogonal energies
/// cannot bias the common slope.
fn centered_fit(series: &[Vec<(f64, f64)>]) -> Option<(f64, f64, f64)> {
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut used = 0usize;
    for s in series {
        if s.len() < 2 {
            continue;
        }
        let n = s.len() as f64;
        let mx = s.iter().map(|p| p.0).sum::<f64>() / n;
        let my = s.iter().map(|p| p.1).sum::<f64>() / n;
        for (x, y) in s {
            sxx += (x - mx) * (x - mx);
            sxy += (x - mx) * (y - my);
        }
        used += s.len();
    }
    if used < 2 || sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mut intercept_acc = 0.0;
    let mut groups = 0.0;
    for s in series {
        if s.len() < 2 {
            continue;
        }
        let n = s.len() as f64;
        let mx = s.iter().map(|p| p.0).sum::<f64>() / n;
        let my = s.iter().map(|p| p.1).sum::<f64>() / n;
        intercept_acc += my - slope * mx;
        groups += 1.0;
        for (x, y) in s {
            let e = (y - my) - slope * (x - mx);
            ss_res += e * e;
            ss_tot += (y - my) * (y - my);
        }
    }
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some((slope, intercept_acc / groups, r2))
}

/// Fits the squared-error alignment decay. Uses `log(1 - align^2)` from
/// the records while it is representable and switches to the exact
/// log-domain form `log P - 2 log |x_t|` (with `P` the conserved
/// orthogonal energy) once the cosine saturates, so late records still
/// inform the fit. The initial record of each particle seeds `P` and is
/// not itself fitted (the decay is linear only from the first step on).
/// Exact fixed points (zero initial residual score) are skipped.
pub fn fit_regression_rate(
    records: &[TrajectoryRecord],
    m: &ModelPair,
) -> Result<RateFit, Error> {
    let signal_norm = m.signal().norm();
    if signal_norm == 0.0 {
        return Err(Error::ZeroNorm("rate fit for a pair with coincident models"));
    }
    let n_particles = records.iter().map(|r| r.particle + 1).max().unwrap_or(0);
    let mut series: Vec<Vec<(f64, f64)>> = alloc::vec![Vec::new(); n_particles];
    let t0 = records.iter().map(|r| r.t).min().ok_or(Error::EmptySamples)?;
    // conserved orthogonal energy per particle, from its first record
    let mut log_p: Vec<Option<f64>> = alloc::vec![None; n_particles];
    for rec in records.iter().filter(|r| r.t == t0) {
        let align = match rec.obs.align_b {
            Some(a) => a,
            None => continue,
        };
        if rec.obs.b == 0.0 {
            continue; // exact fixed point
        }
        let gap = 1.0 - align * align;
        if gap <= 0.0 {
            continue; // started fully aligned: nothing decays
        }
        // log P = log |x_0|^2 (1 - align_0^2)
        log_p[rec.particle] =
            Some(2.0 * core::f64::consts::LN_10 * rec.obs.log10_norm + math::ln(gap));
    }
    for rec in records.iter().filter(|r| r.t > t0) {
        let lp = match log_p[rec.particle] {
            Some(lp) => lp,
            None => continue,
        };
        let y = match rec.obs.align_b {
            Some(align) if 1.0 - align * align >= 1e-12 => {
                math::ln(1.0 - align * align)
            }
            // saturated: the identity 1 - align^2 = P / |x_t|^2 still holds
            _ => lp - 2.0 * core::f64::consts::LN_10 * rec.obs.log10_norm,
        };
        if y.is_finite() {
            series[rec.particle].push((rec.t as f64, y));
        }
    }
    if series.iter().map(|s| s.len()).sum::<usize>() < 5 {
        return Err(Error::InsufficientData(
            "need at least five post-start records of moving particles".into(),
        ));
    }
    let (slope, intercept, r2) = centered_fit(&series)
        .ok_or_else(|| Error::InsufficientData("alignment series carries no time spread".into()))?;
    Ok(RateFit { model: RateModel::ExpDecay, slope, intercept, r2, estimate: -slope })
}

/// Fits the logistic alignment decay `log(1 - |align|)` against `log t`
/// over the final decade of recorded times, after dropping each
/// particle's transient (records before it first passes the
/// trapping-region check, mirror images allowed). Needs the recorded
/// times to span at least two decades.
pub fn fit_classification_rate(
    records: &[TrajectoryRecord],
    params: &ScalarParams,
    basin_c: f64,
) -> Result<RateFit, Error> {
    let t_max = records.iter().map(|r| r.t).max().ok_or(Error::EmptySamples)?;
    let t_min_pos =
        records.iter().map(|r| r.t).filter(|&t| t > 0).min().ok_or(Error::EmptySamples)?;
    if t_max < 100 * t_min_pos {
        return Err(Error::InsufficientData(
            "recorded times must span at least two decades".into(),
        ));
    }
    let n_particles = records.iter().map(|r| r.particle + 1).max().unwrap_or(0);
    let mut passed: Vec<bool> = alloc::vec![false; n_particles];
    let mut series: Vec<Vec<(f64, f64)>> = alloc::vec![Vec::new(); n_particles];
    let cutoff = t_max as f64 / 10.0;
    let mut sorted: Vec<&TrajectoryRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.particle, r.t));
    for rec in sorted {
        if !passed[rec.particle] {
            passed[rec.particle] =
                basin_pass_symmetric(rec.obs.a, rec.obs.b, params, basin_c);
        }
        if !passed[rec.particle] || rec.t == 0 || (rec.t as f64) < cutoff {
            continue;
        }
        let align = match rec.obs.align_c {
            Some(a) => a.abs(),
            None => continue,
        };
        let gap = 1.0 - align;
        if gap > 0.0 && gap.is_finite() {
            series[rec.particle].push((math::ln(rec.t as f64), math::ln(gap)));
        }
    }
    let (slope, intercept, r2) = centered_fit(&series).ok_or_else(|| {
        Error::InsufficientData("no post-transient records in the final decade".into())
    })?;
    Ok(RateFit { model: RateModel::PolyLog, slope, intercept, r2, estimate: slope })
}

/// Last recorded Lyapunov value of a canonical in-basin planar run; the
/// plateau sits near `1/(1 + ratio)`. `None` when no admissible start
/// exists at twice the basin constant.
pub fn lyapunov_plateau(
    params: &ScalarParams,
    basin_c: f64,
    horizon: u64,
) -> Result<Option<f64>, Error> {
    let a0 = 2.0 * basin_c;
    let iv = match admissible_exp_interval(a0, params.ratio) {
        Some(iv) => iv,
        None => return Ok(None),
    };
    // geometric midpoint of the admissible region
    let s0 = -0.5 * (math::ln(iv.lo) + math::ln(iv.hi));
    let run = scalar_run(
        ScalarState::new(a0, s0 - a0),
        params,
        basin_c,
        horizon,
        (horizon / 10).max(1),
    )?;
    Ok(run.rows.last().and_then(|r| r.lyapunov))
}

/// One sweep outcome row.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub label: String,
    pub setting: Setting,
    /// Mean `|cos|` with the residual direction at the final snapshot.
    pub mean_align_b: Option<f64>,
    /// Mean `|cos|` with the logistic limit direction at the final snapshot.
    pub mean_align_c: Option<f64>,
    pub rate_estimate: Option<f64>,
    pub lyapunov_plateau: Option<f64>,
    pub error: Option<String>,
}

/// Runs one labeled config into a row; failures land in `error` instead
/// of propagating.
pub fn sweep_row(label: &str, cfg: &ExperimentConfig) -> SweepRow {
    let mut row = SweepRow {
        label: String::from(label),
        setting: cfg.setting,
        mean_align_b: None,
        mean_align_c: None,
        rate_estimate: None,
        lyapunov_plateau: None,
        error: None,
    };
    match sweep_row_inner(cfg, &mut row) {
        Ok(()) => row,
        Err(e) => {
            row.error = Some(alloc::format!("{e}"));
            row
        }
    }
}

fn sweep_row_inner(cfg: &ExperimentConfig, row: &mut SweepRow) -> Result<(), Error> {
    let fig = reproduce_figure(cfg)?;
    let t_final = *cfg.snapshots.last().unwrap();
    let finals: Vec<&TrajectoryRecord> =
        fig.records.iter().filter(|r| r.t == t_final).collect();
    let mean = |get: &dyn Fn(&TrajectoryRecord) -> Option<f64>| -> Option<f64> {
        let vals: Vec<f64> = finals.iter().filter_map(|r| get(r)).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    row.mean_align_b = mean(&|r| r.obs.align_b.map(f64::abs));
    row.mean_align_c = mean(&|r| r.obs.align_c.map(f64::abs));
    let params = ScalarParams {
        eta: fig.instance.pair.eta(cfg.gamma),
        ratio: fig.instance.pair.signal_ratio()?,
    };
    match cfg.setting {
        Setting::Regression => {
            row.rate_estimate =
                fit_regression_rate(&fig.records, &fig.instance.pair).ok().map(|f| f.estimate);
        }
        Setting::Classification => {
            row.rate_estimate = fit_classification_rate(&fig.records, &params, cfg.basin_c)
                .ok()
                .map(|f| f.estimate);
            row.lyapunov_plateau = lyapunov_plateau(&params, cfg.basin_c, 2000)?;
        }
    }
    Ok(())
}

/// Serial sweep over labeled configs; one row each, failures contained
/// per row.
pub fn sweep(configs: &[(String, ExperimentConfig)]) -> Vec<SweepRow> {
    configs.iter().map(|(label, cfg)| sweep_row(label, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::borrow::ToOwned;
    use alloc::vec;
    use crate::dynamics::Observation;

    fn small_cfg(setting: Setting) -> ExperimentConfig {
        ExperimentConfig {
            setting,
            dim: 20,
            subspace_rank: 10,
            theta_star: ThetaStarRule::Harmonic,
            gamma: 0.6,
            n_particles: 8,
            horizon: 12,
            snapshots: vec![0, 4, 8, 12],
            seed: 7,
            init_law: if setting == Setting::Regression {
                InitLaw::Ambient
            } else {
                InitLaw::Subspace
            },
            basin_c: 5.0,
        }
    }

    #[test]
    fn harmonic_target_matches_frozen_norm() {
        let v = theta_star_vector(&ThetaStarRule::Harmonic, 200).unwrap();
        assert_eq!(v[0], 1.0);
        assert_eq!(v[199], 1.0 / 200.0);
        assert!((v.norm_sq() - 1.639946546014997268).abs() < 1e-14);
        assert!((v.norm() - 1.280603977041691554).abs() < 1e-14);
    }

    #[test]
    fn default_figure_configs_validate() {
        let r = ExperimentConfig::regression_figure();
        r.validate().unwrap();
        assert_eq!(r.snapshots, vec![0, 5, 10, 15, 20, 25, 30, 35, 40]);
        let c = ExperimentConfig::classification_figure();
        c.validate().unwrap();
        assert_eq!(c.snapshots.len(), 9);
        assert_eq!(*c.snapshots.last().unwrap(), 200);
    }

    #[test]
    fn config_validation_catches_bad_fields() {
        let mut cfg = small_cfg(Setting::Regression);
        cfg.gamma = -0.5;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg(Setting::Regression);
        cfg.subspace_rank = 21;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg(Setting::Regression);
        cfg.snapshots = vec![0, 4, 4];
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg(Setting::Regression);
        cfg.snapshots = vec![0, 50];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn instance_geometry_holds() {
        let cfg = small_cfg(Setting::Classification);
        let inst = build_instance(&cfg).unwrap();
        // current model lies in the support, residual orthogonal to it
        let th0 = inst.pair.theta0();
        let back = inst.subspace.project(th0).unwrap();
        assert!(back.minus(th0).unwrap().max_abs() < 1e-10);
        assert!(th0.inner(inst.pair.signal()).unwrap().abs() < 1e-10);
        // support-law particles are unit and inside the support
        for x in &inst.particles {
            assert!((x.norm() - 1.0).abs() < 1e-12);
            let proj = inst.subspace.project(x).unwrap();
            assert!(proj.minus(x).unwrap().max_abs() < 1e-10);
        }
    }

    #[test]
    fn ambient_particles_leave_the_support() {
        let cfg = small_cfg(Setting::Regression);
        let inst = build_instance(&cfg).unwrap();
        let mut max_out = 0.0f64;
        for x in &inst.particles {
            assert!((x.norm() - 1.0).abs() < 1e-12);
            let out = x.minus(&inst.subspace.project(x).unwrap()).unwrap();
            max_out = max_out.max(out.norm());
        }
        assert!(max_out > 0.1, "ambient draws should have support-orthogonal mass");
    }

    #[test]
    fn instances_are_seed_deterministic() {
        let cfg = small_cfg(Setting::Regression);
        let a = build_instance(&cfg).unwrap();
        let b = build_instance(&cfg).unwrap();
        for (x, y) in a.particles.iter().zip(&b.particles) {
            assert_eq!(x, y);
        }
        let mut cfg2 = cfg.clone();
        cfg2.seed = 8;
        let c = build_instance(&cfg2).unwrap();
        assert_ne!(a.particles[0], c.particles[0]);
    }

    #[test]
    fn figure_rows_cover_the_grid_and_stay_on_the_disk() {
        let cfg = small_cfg(Setting::Regression);
        let fig = reproduce_figure(&cfg).unwrap();
        assert_eq!(fig.rows.len(), 4 * 8);
        for row in &fig.rows {
            assert!(row.u * row.u + row.v * row.v <= 1.0 + 1e-12);
            assert!(row.align_b.is_finite() && row.align_b >= 0.0 && row.align_b <= 1.0 + 1e-12);
            assert!(!row.stationary);
        }
        // determinism at the byte level
        let again = reproduce_figure(&cfg).unwrap();
        for (x, y) in fig.rows.iter().zip(&again.rows) {
            assert_eq!(x.u.to_bits(), y.u.to_bits());
            assert_eq!(x.v.to_bits(), y.v.to_bits());
        }
    }

    #[test]
    fn residual_orthogonal_regression_starts_barely_move() {
        // a start with the residual direction projected out is a fixed
        // point up to float dust; over a figure-length horizon the dust
        // cannot amplify into visible motion
        let cfg = ExperimentConfig { n_particles: 1, ..small_cfg(Setting::Regression) };
        let inst = build_instance(&cfg).unwrap();
        let d = inst.pair.blessing_direction().unwrap();
        let x = &inst.particles[0];
        let mut flat = x.clone();
        flat.add_scaled(-x.inner(&d).unwrap(), &d).unwrap();
        let flat = flat.normalized().unwrap();
        let b = flat.inner(inst.pair.signal()).unwrap();
        assert!(b.abs() < 1e-10);
        let mut parts = vec![flat.clone()];
        let out = crate::dynamics::run_ensemble(
            &mut parts,
            &inst.pair,
            Setting::Regression,
            cfg.gamma,
            &cfg.snapshots,
            false,
        )
        .unwrap();
        let drift = out.records.last().unwrap().obs.b - b;
        assert!(drift.abs() < 1e-9, "projected start should barely move");
    }

    fn synth_record(t: u64, particle: usize, obs: Observation) -> TrajectoryRecord {
        TrajectoryRecord { t, particle, obs }
    }

    #[test]
    fn regression_fit_recovers_closed_form_rate() {
        // synthetic records straight from the closed form: unit start,
        // initial residual cosine 0.1, rate ln(1 + gamma_tilde) with
        // gamma_tilde = 1
        let gamma_tilde: f64 = 1.0;
        let b0_hat: f64 = 0.1;
        let p: f64 = 1.0 - b0_hat * b0_hat;
        let m = ModelPair::new(
            Vector::new(vec![1.0, 1.0]).unwrap(),
            Vector::new(vec![1.0, 0.0]).unwrap(),
        )
        .unwrap();
        let mut records = Vec::new();
        for k in 0..=8u64 {
            let t = 5 * k;
            let coeff = b0_hat * math::exp(t as f64 * math::ln_1p(gamma_tilde));
            let norm_sq = coeff * coeff + p;
            let align = coeff / math::sqrt(norm_sq);
            records.push(synth_record(
                t,
                0,
                Observation {
                    align_b: Some(align),
                    align_c: None,
                    a: 0.0,
                    b: coeff * m.signal().norm(),
                    log10_norm: 0.5 * math::log10(norm_sq),
                },
            ));
        }
        let fit = fit_regression_rate(&records, &m).unwrap();
        let c = 2.0 * math::ln_1p(gamma_tilde);
        assert_eq!(fit.model, RateModel::ExpDecay);
        assert!(
            (fit.estimate - c).abs() < 0.01 * c,
            "estimate {} vs rate {c}",
            fit.estimate
        );
        assert!(fit.r2 >= 0.999, "r2 {}", fit.r2);
    }

    #[test]
    fn regression_fit_survives_saturated_cosines() {
        // by t = 200 at rate 2 ln 2 the cosine is exactly 1.0 in doubles;
        // the log-domain branch must keep the late records informative.
        let gamma_tilde: f64 = 1.0;
        let b0_hat: f64 = 0.1;
        let p: f64 = 1.0 - b0_hat * b0_hat;
        let m = ModelPair::new(
            Vector::new(vec![1.0, 1.0]).unwrap(),
            Vector::new(vec![1.0, 0.0]).unwrap(),
        )
        .unwrap();
        let mut records = Vec::new();
        let mut saturated = 0;
        for k in 0..=8u64 {
            let t = 25 * k;
            let log_coeff = t as f64 * math::ln_1p(gamma_tilde) + math::ln(b0_hat);
            // log-domain norm: |x|^2 = e^{2L} + P
            let log10_norm = if log_coeff > 200.0 {
                log_coeff / core::f64::consts::LN_10
            } else {
                0.5 * math::log10(math::exp(2.0 * log_coeff) + p)
            };
            let align = 1.0 / math::sqrt(1.0 + p * math::exp(-2.0 * log_coeff));
            if align == 1.0 {
                saturated += 1;
            }
            records.push(synth_record(
                t,
                0,
                Observation {
                    align_b: Some(align),
                    align_c: None,
                    a: 0.0,
                    b: 1.0,
                    log10_norm,
                },
            ));
        }
        assert!(saturated >= 5, "test instance must actually saturate");
        let fit = fit_regression_rate(&records, &m).unwrap();
        let c = 2.0 * math::ln_1p(gamma_tilde);
        assert!((fit.estimate - c).abs() < 0.01 * c, "estimate {}", fit.estimate);
    }

    #[test]
    fn regression_fit_rejects_stationary_only_input() {
        let m = ModelPair::new(
            Vector::new(vec![1.0, 1.0]).unwrap(),
            Vector::new(vec![1.0, 0.0]).unwrap(),
        )
        .unwrap();
        let records: Vec<TrajectoryRecord> = (0..=8u64)
            .map(|t| {
                synth_record(
                    t,
                    0,
                    Observation {
                        align_b: Some(0.0),
                        align_c: None,
                        a: 1.0,
                        b: 0.0,
                        log10_norm: 0.0,
                    },
                )
            })
            .collect();
        assert!(matches!(
            fit_regression_rate(&records, &m),
            Err(Error::InsufficientData(_))
        ));
    }

    fn basin_obs(align_c: f64) -> Observation {
        // (a, b) = (10, -12.5) passes the trapping check at ratio 1, c 5
        Observation { align_b: None, align_c: Some(align_c), a: 10.0, b: -12.5, log10_norm: 0.0 }
    }

    #[test]
    fn classification_fit_recovers_pure_power_law() {
        let params = ScalarParams { eta: 0.2, ratio: 1.0 };
        let ts: Vec<u64> = (0..=20).map(|k| (10.0f64.powf(k as f64 / 5.0)) as u64).collect();
        let records: Vec<TrajectoryRecord> = ts
            .iter()
            .map(|&t| synth_record(t, 0, basin_obs(1.0 - (t as f64).powi(-2))))
            .collect();
        let fit = fit_classification_rate(&records, &params, 5.0).unwrap();
        assert_eq!(fit.model, RateModel::PolyLog);
        assert!((fit.slope + 2.0).abs() < 1e-6, "slope {}", fit.slope);
    }

    #[test]
    fn classification_fit_on_log_squared_shape_lands_in_bracket() {
        let params = ScalarParams { eta: 0.2, ratio: 1.0 };
        let ts: Vec<u64> =
            (0..=10).map(|k| (1000.0 * 10.0f64.powf(k as f64 / 5.0)) as u64).collect();
        let records: Vec<TrajectoryRecord> = ts
            .iter()
            .map(|&t| {
                let tf = t as f64;
                let gap = math::ln(tf) * math::ln(tf) / (tf * tf);
                synth_record(t, 0, basin_obs(1.0 - gap))
            })
            .collect();
        let fit = fit_classification_rate(&records, &params, 5.0).unwrap();
        assert!(fit.slope > -2.0 && fit.slope < -1.7, "slope {}", fit.slope);
    }

    #[test]
    fn classification_fit_requires_two_decades() {
        let params = ScalarParams { eta: 0.2, ratio: 1.0 };
        let records: Vec<TrajectoryRecord> = (1..=9u64)
            .map(|t| synth_record(10 * t, 0, basin_obs(1.0 - (t as f64).powi(-2))))
            .collect();
        assert!(matches!(
            fit_classification_rate(&records, &params, 5.0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn classification_fit_drops_pre_transient_records() {
        let params = ScalarParams { eta: 0.2, ratio: 1.0 };
        // particle never entering the basin contributes nothing
        let mut records: Vec<TrajectoryRecord> = Vec::new();
        for k in 0..=20u64 {
            let t = (10.0f64.powf(k as f64 / 5.0)) as u64;
            records.push(synth_record(t, 0, basin_obs(1.0 - (t as f64).powi(-2))));
            records.push(synth_record(
                t,
                1,
                Observation {
                    align_b: None,
                    align_c: Some(0.3),
                    a: 1.0,
                    b: 0.0,
                    log10_norm: 0.0,
                },
            ));
        }
        let fit = fit_classification_rate(&records, &params, 5.0).unwrap();
        // flat particle 1 would wreck the slope if it were included
        assert!((fit.slope + 2.0).abs() < 1e-6, "slope {}", fit.slope);
    }

    #[test]
    fn plateau_sits_near_the_predicted_level_and_moves_with_ratio() {
        let c = 5.0;
        let mut last = f64::INFINITY;
        for ratio in [0.5, 1.0, 2.0] {
            let p = ScalarParams { eta: 0.1, ratio };
            let plateau = lyapunov_plateau(&p, c, 2000).unwrap().unwrap();
            let predicted = 1.0 / (1.0 + ratio);
            assert!(
                (plateau - predicted).abs() < 0.05,
                "ratio {ratio}: plateau {plateau} vs {predicted}"
            );
            assert!(plateau < last);
            last = plateau;
        }
    }

    #[test]
    fn sweep_single_config_matches_direct_row() {
        let cfg = small_cfg(Setting::Regression);
        let rows = sweep(&[("only".to_owned(), cfg.clone())]);
        assert_eq!(rows.len(), 1);
        let direct = sweep_row("only", &cfg);
        assert_eq!(rows[0].label, direct.label);
        assert_eq!(rows[0].mean_align_b, direct.mean_align_b);
        assert!(rows[0].error.is_none());
        assert!(rows[0].mean_align_b.unwrap() > 0.9);
    }

    #[test]
    fn sweep_contains_per_row_failures() {
        let good = small_cfg(Setting::Regression);
        let mut bad = small_cfg(Setting::Regression);
        bad.subspace_rank = 99;
        let rows = sweep(&[
            ("good".to_owned(), good),
            ("bad".to_owned(), bad),
        ]);
        assert!(rows[0].error.is_none());
        assert!(rows[1].error.is_some());
        assert!(rows[1].mean_align_b.is_none());
    }

    #[test]
    fn gamma_sweep_recovers_increasing_rates() {
        // horizon long enough that the early-time curvature of the
        // log alignment gap has died off inside the fit window
        let gammas = [0.3, 0.6, 1.0];
        let mut cfgs = Vec::new();
        for (i, gamma) in gammas.iter().enumerate() {
            let mut cfg = small_cfg(Setting::Regression);
            cfg.gamma = *gamma;
            cfg.horizon = 60;
            cfg.snapshots = vec![0, 10, 20, 30, 40, 50, 60];
            cfgs.push((alloc::format!("g{i}"), cfg));
        }
        let rows = sweep(&cfgs);
        let mut prev = 0.0;
        for (row, gamma) in rows.iter().zip(gammas) {
            let est = row.rate_estimate.expect("fit should succeed");
            let inst = build_instance(&ExperimentConfig {
                gamma,
                ..small_cfg(Setting::Regression)
            })
            .unwrap();
            let predicted = crate::dynamics::blessing_rate(inst.pair.gamma_tilde(gamma));
            assert!(
                (est - predicted).abs() < 0.05 * predicted,
                "gamma {gamma}: estimate {est} vs predicted {predicted}"
            );
            assert!(est > prev);
            prev = est;
        }
    }
}
