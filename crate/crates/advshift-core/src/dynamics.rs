//! Explicit-Euler particle dynamics driven by the pointwise utility
//! gradient, recorded alignment trajectories, and the closed form the
//! squared-error flow admits.

use alloc::vec::Vec;

use crate::error::Error;
use crate::linalg::Vector;
use crate::math;
use crate::objectives::{pointwise_gradient, ModelPair, Setting};

/// One ascent step `x += gamma * grad U(x)`.
pub fn step_particle(
    x: &mut Vector,
    m: &ModelPair,
    setting: Setting,
    gamma: f64,
) -> Result<(), Error> {
    let g = pointwise_gradient(x, m, setting)?;
    x.add_scaled(gamma, &g)
}

/// Advances one particle `steps` times, halting with the particle id and
/// absolute step index the moment an entry stops being finite.
/// `t_offset` is the absolute time of the incoming state.
pub fn evolve_particle(
    x: &mut Vector,
    m: &ModelPair,
    setting: Setting,
    gamma: f64,
    steps: u64,
    particle_id: usize,
    t_offset: u64,
) -> Result<(), Error> {
    for k in 0..steps {
        step_particle(x, m, setting, gamma)?;
        if !x.is_finite() {
            return Err(Error::NonFinite { particle: particle_id, step: t_offset + k + 1 });
        }
    }
    Ok(())
}

/// Advances every particle `steps` times. Serial reference driver; the
/// per-particle updates are independent, so any scheduler that calls
/// [`evolve_particle`] per particle produces identical bits.
pub fn evolve_ensemble(
    particles: &mut [Vector],
    m: &ModelPair,
    setting: Setting,
    gamma: f64,
    steps: u64,
    t_offset: u64,
) -> Result<(), Error> {
    for (pid, x) in particles.iter_mut().enumerate() {
        evolve_particle(x, m, setting, gamma, steps, pid, t_offset)?;
    }
    Ok(())
}

/// Scalar summary of one particle state against a model pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    /// Cosine with the normalized residual direction, when both are nonzero.
    pub align_b: Option<f64>,
    /// Cosine with the logistic limit direction, when it is defined.
    pub align_c: Option<f64>,
    /// Component along the current model, `<x, current>`.
    pub a: f64,
    /// Component along the residual, `<x, target - current>`.
    pub b: f64,
    /// `log10 |x|`, overflow-safe.
    pub log10_norm: f64,
}

/// [`Observation`] stamped with when and for whom it was taken.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub t: u64,
    pub particle: usize,
    pub obs: Observation,
}

/// Precomputes the reference directions of a pair once so per-state
/// observation is two inner products and two cosines.
pub struct Observer {
    theta0: Vector,
    signal: Vector,
    blessing: Option<Vector>,
    curse: Option<Vector>,
}

impl Observer {
    pub fn new(m: &ModelPair) -> Self {
        Self {
            theta0: m.theta0().clone(),
            signal: m.signal().clone(),
            blessing: m.blessing_direction().ok(),
            curse: m.curse_direction().ok(),
        }
    }

    pub fn observe(&self, x: &Vector) -> Result<Observation, Error> {
        let a = x.inner(&self.theta0)?;
        let b = x.inner(&self.signal)?;
        let align_b = match &self.blessing {
            Some(d) => x.cosine_with(d).ok(),
            None => None,
        };
        let align_c = match &self.curse {
            Some(d) => x.cosine_with(d).ok(),
            None => None,
        };
        Ok(Observation { align_b, align_c, a, b, log10_norm: x.log10_norm() })
    }
}

/// Particle states cloned at one recording time.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: u64,
    pub states: Vec<Vector>,
}

/// What a recorded ensemble run produced.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<TrajectoryRecord>,
    pub snapshots: Vec<Snapshot>,
}

/// The recording grid `0, every, 2*every, ..., horizon` (final time always
/// included).
pub fn record_times_every(horizon: u64, every: u64) -> Result<Vec<u64>, Error> {
    if every == 0 {
        return Err(Error::InvalidParameter("recording stride must be at least 1".into()));
    }
    let mut times: Vec<u64> = (0..=horizon / every).map(|k| k * every).collect();
    if *times.last().expect("grid contains 0") != horizon {
        times.push(horizon);
    }
    Ok(times)
}

/// Runs the whole ensemble in place, observing every particle at each of
/// `record_times` (strictly increasing; a leading 0 records initial
/// states). With `collect_snapshots`, full states are cloned at those same
/// times.
pub fn run_ensemble(
    particles: &mut [Vector],
    m: &ModelPair,
    setting: Setting,
    gamma: f64,
    record_times: &[u64],
    collect_snapshots: bool,
) -> Result<RunOutput, Error> {
    if particles.is_empty() {
        return Err(Error::EmptySamples);
    }
    if record_times.is_empty() {
        return Err(Error::InvalidParameter("no recording times given".into()));
    }
    if record_times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "recording times must be strictly increasing".into(),
        ));
    }
    let observer = Observer::new(m);
    let mut records = Vec::with_capacity(record_times.len() * particles.len());
    let mut snapshots = Vec::new();
    let mut now = 0u64;
    for &t in record_times {
        evolve_ensemble(particles, m, setting, gamma, t - now, now)?;
        now = t;
        for (pid, x) in particles.iter().enumerate() {
            records.push(TrajectoryRecord { t, particle: pid, obs: observer.observe(x)? });
        }
        if collect_snapshots {
            snapshots.push(Snapshot { t, states: particles.to_vec() });
        }
    }
    Ok(RunOutput { records, snapshots })
}

/// Squared-error alignment doubles the norm growth exponent:
/// `2 * ln(1 + gamma_tilde)` per step.
pub fn blessing_rate(gamma_tilde: f64) -> f64 {
    2.0 * math::ln_1p(gamma_tilde)
}

/// The squared-error flow moves only the residual component:
/// `x_t = x_0 + ((1 + gamma_tilde)^t - 1) <x_0, d> d` with `d` the unit
/// residual direction. Exact for every `t`, including 0.
pub fn regression_closed_form_state(
    x0: &Vector,
    m: &ModelPair,
    gamma: f64,
    t: u64,
) -> Result<Vector, Error> {
    let d = m.blessing_direction()?;
    let b0 = x0.inner(&d)?;
    let growth_minus_one = math::expm1(t as f64 * math::ln_1p(m.gamma_tilde(gamma)));
    let mut x = x0.clone();
    x.add_scaled(growth_minus_one * b0, &d)?;
    Ok(x)
}

/// Alignment of the closed-form state, carried in the log domain so it is
/// meaningful long after the cosine itself saturates at 1.
#[derive(Clone, Copy, Debug)]
pub struct ClosedFormAlignment {
    /// Signed cosine with the unit residual direction.
    pub align_b: f64,
    /// `t * ln(1 + gamma_tilde) + ln |<x_0, d>|`, the log of the residual
    /// coefficient; `-inf` for a particle starting orthogonal to `d`.
    pub log_coeff: f64,
}

/// Cosine of the closed-form state with the residual direction at time `t`,
/// without forming the state: `sign(b0) / sqrt(1 + P exp(-2 L))` with `P`
/// the orthogonal energy of `x_0` and `L` the log coefficient.
pub fn regression_closed_form(
    x0: &Vector,
    m: &ModelPair,
    gamma: f64,
    t: u64,
) -> Result<ClosedFormAlignment, Error> {
    if x0.max_abs() == 0.0 {
        return Err(Error::ZeroNorm("alignment of the zero state"));
    }
    let d = m.blessing_direction()?;
    let b0 = x0.inner(&d)?;
    let p = orthogonal_remainder(x0, m)?;
    let log_coeff = t as f64 * math::ln_1p(m.gamma_tilde(gamma)) + math::ln(b0.abs());
    let align_b = if b0 == 0.0 {
        0.0
    } else {
        let tail = p * math::exp(-2.0 * log_coeff);
        b0.signum() / math::sqrt(1.0 + tail)
    };
    Ok(ClosedFormAlignment { align_b, log_coeff })
}

/// Energy of `x0` orthogonal to the residual direction,
/// `|x0 - <x0, d> d|^2`. Conserved by the squared-error flow; formed from
/// the residual vector itself so it is never negative.
pub fn orthogonal_remainder(x0: &Vector, m: &ModelPair) -> Result<f64, Error> {
    let d = m.blessing_direction()?;
    let b0 = x0.inner(&d)?;
    let mut rem = x0.clone();
    rem.add_scaled(-b0, &d)?;
    Ok(rem.norm_sq())
}
