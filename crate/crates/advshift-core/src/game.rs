//! The sequential round: the adversary shifts the ensemble, the shifted
//! particles are renormalized to the unit sphere, responses are drawn at
//! the renormalized points, and the learner takes averaged gradient steps.

use alloc::vec::Vec;

use crate::dynamics::evolve_ensemble;
use crate::error::Error;
use crate::linalg::{Subspace, Vector};
use crate::objectives::{mean_response, sample_response, sigmoid, ModelPair, Setting};
use crate::rng::response_rng;

/// Unit-sphere ensemble the learner trains on, with zero-norm particles
/// dropped.
pub struct GameStage {
    /// `(original index, unit-norm state)` for every surviving particle.
    unit_particles: Vec<(usize, Vector)>,
    pub excluded: usize,
}

impl GameStage {
    /// Renormalizes every particle; particles with zero norm are excluded
    /// and counted. All excluded is an error.
    pub fn renormalize(particles: &[Vector]) -> Result<Self, Error> {
        let mut unit_particles = Vec::with_capacity(particles.len());
        let mut excluded = 0usize;
        for (i, x) in particles.iter().enumerate() {
            match x.normalized() {
                Ok(u) => unit_particles.push((i, u)),
                Err(Error::ZeroNorm(_)) => excluded += 1,
                Err(e) => return Err(e),
            }
        }
        if unit_particles.is_empty() {
            return Err(Error::AllDegenerate);
        }
        Ok(Self { unit_particles, excluded })
    }

    pub fn len(&self) -> usize {
        self.unit_particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unit_particles.is_empty()
    }

    pub fn particles(&self) -> impl Iterator<Item = &Vector> {
        self.unit_particles.iter().map(|(_, x)| x)
    }

    /// Draws one response per surviving particle from the target model.
    /// Each response comes from a dedicated substream keyed by the
    /// particle's original index, so exclusions elsewhere in the ensemble
    /// never shift another particle's draw. With `noise_free`, the
    /// conditional mean replaces the draw.
    pub fn draw_samples(
        &self,
        m: &ModelPair,
        setting: Setting,
        seed: u64,
        noise_free: bool,
    ) -> Result<Vec<(Vector, f64)>, Error> {
        let mut out = Vec::with_capacity(self.len());
        for (orig, x) in &self.unit_particles {
            let y = if noise_free {
                mean_response(x, m, setting)?
            } else {
                let mut rng = response_rng(seed, *orig);
                sample_response(x, m, setting, &mut rng)?
            };
            out.push((x.clone(), y));
        }
        Ok(out)
    }
}

/// One averaged gradient step on the sample:
/// `theta - eta * mean(grad loss)`, with squared loss in regression
/// (gradient `2 (<x,theta> - y) x`) and logistic loss in classification
/// (gradient `(sig(<x,theta>) - y) x`).
pub fn learner_step(
    theta: &Vector,
    samples: &[(Vector, f64)],
    setting: Setting,
    eta: f64,
) -> Result<Vector, Error> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut grad = Vector::zeros(theta.dim());
    for (x, y) in samples {
        let s = x.inner(theta)?;
        let coeff = match setting {
            Setting::Regression => 2.0 * (s - y),
            Setting::Classification => sigmoid(s) - y,
        };
        grad.add_scaled(coeff, x)?;
    }
    let mut out = theta.clone();
    out.add_scaled(-eta / samples.len() as f64, &grad)?;
    Ok(out)
}

/// How one round ended for the learner.
#[derive(Clone, Debug)]
pub struct LearnerOutcome {
    pub theta1: Vector,
    /// `|target - theta1|`.
    pub err_norm: f64,
    /// `<target - theta1, target> / <target - theta0, target>`; `None`
    /// when the denominator is exactly zero. Near one, the round taught
    /// the learner nothing about the target component.
    pub curse_ratio: Option<f64>,
    /// Particles dropped at renormalization.
    pub excluded: usize,
}

/// Learner half of a round, on particles the adversary already shifted:
/// renormalize, draw responses once, then apply `steps` gradient steps at
/// rate `eta` starting from the pair's current model.
pub fn finish_round(
    m: &ModelPair,
    setting: Setting,
    shifted: &[Vector],
    eta: f64,
    steps: u32,
    seed: u64,
    noise_free: bool,
) -> Result<LearnerOutcome, Error> {
    let stage = GameStage::renormalize(shifted)?;
    let samples = stage.draw_samples(m, setting, seed, noise_free)?;
    let mut theta = m.theta0().clone();
    for _ in 0..steps {
        theta = learner_step(&theta, &samples, setting, eta)?;
    }
    let err = m.theta_star().minus(&theta)?;
    let denom = m.signal().inner(m.theta_star())?;
    let curse_ratio = if denom == 0.0 {
        None
    } else {
        Some(err.inner(m.theta_star())? / denom)
    };
    Ok(LearnerOutcome {
        err_norm: err.norm(),
        theta1: theta,
        curse_ratio,
        excluded: stage.excluded,
    })
}

/// Full round: shift the ensemble for `t` steps at adversary step size
/// `gamma`, then hand it to [`finish_round`].
#[allow(clippy::too_many_arguments)]
pub fn play_round(
    m: &ModelPair,
    setting: Setting,
    mut particles: Vec<Vector>,
    t: u64,
    gamma: f64,
    eta: f64,
    steps: u32,
    seed: u64,
    noise_free: bool,
) -> Result<LearnerOutcome, Error> {
    evolve_ensemble(&mut particles, m, setting, gamma, t, 0)?;
    finish_round(m, setting, &particles, eta, steps, seed, noise_free)
}

/// Components of `target - theta` along the unit target direction and the
/// unit residual direction, plus what is left outside their span.
#[derive(Clone, Copy, Debug)]
pub struct ErrorSplit {
    pub along_star: f64,
    pub along_b: f64,
    pub residual: f64,
}

/// Splits `target - theta`. The squared components only recombine to the
/// squared norm when the two directions are orthogonal; the residual is
/// always measured against the full two-dimensional span.
pub fn err_decomposition(theta: &Vector, m: &ModelPair) -> Result<ErrorSplit, Error> {
    let e = m.theta_star().minus(theta)?;
    let star_hat = m.theta_star().normalized()?;
    let blessing = m.blessing_direction()?;
    let along_star = e.inner(&star_hat)?;
    let along_b = e.inner(&blessing)?;
    let projected = match Subspace::from_spanning(&[star_hat.clone(), blessing]) {
        Ok(plane) => plane.project(&e)?,
        // residual direction parallel to the target: the span is a line
        Err(_) => star_hat.scaled(along_star),
    };
    let residual = e.minus(&projected)?.norm();
    Ok(ErrorSplit { along_star, along_b, residual })
}
