//! Pointwise adversary utilities, their x-gradients, and the geometry of a
//! model pair (current model vs target model).

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::linalg::{Subspace, Vector};
use crate::math;

/// Which pointwise utility drives the particle dynamic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Setting {
    /// Squared-error gap: `U(x) = <x, target - current>^2 + 1`.
    Regression,
    /// Expected logistic loss of the current model under labels drawn from
    /// the target model.
    Classification,
}

/// Numerically stable logistic function.
///
/// The two branches make `sigmoid(-z) == 1 - sigmoid(z)` hold bitwise.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + math::exp(-z))
    } else {
        let e = math::exp(z);
        e / (1.0 + e)
    }
}

/// Derivative of the logistic function, `sigmoid(z) * sigmoid(-z)`.
pub fn sigmoid_prime(z: f64) -> f64 {
    sigmoid(z) * sigmoid(-z)
}

/// `log(1 + exp(z))` without overflow: `max(z, 0) + log1p(exp(-|z|))`.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + math::ln_1p(math::exp(-z.abs()))
}

/// `sigmoid(x) - sigmoid(y)` grouped as
/// `sigmoid(y) * sigmoid(-x) * (exp(x - y) - 1)` so that nearby arguments
/// deep in a sigmoid tail do not cancel catastrophically.
pub fn sigmoid_diff(x: f64, y: f64) -> f64 {
    let d = x - y;
    if d > 700.0 {
        // gap too large for the grouped form's expm1; no cancellation here
        return sigmoid(x) - sigmoid(y);
    }
    sigmoid(y) * sigmoid(-x) * math::expm1(d)
}

/// A current model together with the target model it is measured against.
///
/// The difference `target - current` is cached because both utilities and
/// all derived directions are built from it.
#[derive(Clone, Debug)]
pub struct ModelPair {
    theta_star: Vector,
    theta0: Vector,
    signal: Vector,
}

impl ModelPair {
    /// Pairs a target model with a current model of the same dimension.
    /// Coincident models are allowed; only the derived directions that
    /// would divide by a zero norm report errors, on access.
    pub fn new(theta_star: Vector, theta0: Vector) -> Result<Self, Error> {
        if theta_star.dim() != theta0.dim() {
            return Err(Error::DimensionMismatch {
                left: theta_star.dim(),
                right: theta0.dim(),
            });
        }
        let signal = theta_star.minus(&theta0)?;
        Ok(Self { theta_star, theta0, signal })
    }

    pub fn dim(&self) -> usize {
        self.theta_star.dim()
    }

    pub fn theta_star(&self) -> &Vector {
        &self.theta_star
    }

    pub fn theta0(&self) -> &Vector {
        &self.theta0
    }

    /// The residual direction `target - current` (not normalized).
    pub fn signal(&self) -> &Vector {
        &self.signal
    }

    /// Unit vector along `target - current`; the direction squared-error
    /// particles blow up along.
    pub fn blessing_direction(&self) -> Result<Vector, Error> {
        if self.signal.max_abs() == 0.0 {
            return Err(Error::ZeroNorm(
                "blessing direction of a pair with coincident models",
            ));
        }
        self.signal.normalized()
    }

    /// The direction logistic particles converge to:
    /// `-(|n0|/|n*|) * signal/|signal| + (|signal|/|n*|) * current/|n0|`.
    ///
    /// Built exactly from that formula; it is unit-norm and orthogonal to
    /// the target model precisely when `current` is orthogonal to `signal`
    /// (the best-response geometry).
    pub fn curse_direction(&self) -> Result<Vector, Error> {
        let n0 = self.theta0.norm();
        let ns = self.signal.norm();
        let nstar = self.theta_star.norm();
        if n0 == 0.0 {
            return Err(Error::ZeroNorm("curse direction of a pair with zero current model"));
        }
        if ns == 0.0 {
            return Err(Error::ZeroNorm("curse direction of a pair with coincident models"));
        }
        if nstar == 0.0 {
            return Err(Error::ZeroNorm("curse direction of a pair with zero target model"));
        }
        let mut out = self.signal.scaled(-n0 / (nstar * ns));
        out.add_scaled(ns / (nstar * n0), &self.theta0)?;
        Ok(out)
    }

    /// Signal-to-model energy ratio `|signal|^2 / |current|^2`.
    pub fn signal_ratio(&self) -> Result<f64, Error> {
        let n0 = self.theta0.norm_sq();
        if n0 == 0.0 {
            return Err(Error::ZeroNorm("signal ratio of a pair with zero current model"));
        }
        Ok(self.signal.norm_sq() / n0)
    }

    /// Effective squared-error step size `2 * gamma * |signal|^2`.
    pub fn gamma_tilde(&self, gamma: f64) -> f64 {
        2.0 * gamma * self.signal.norm_sq()
    }

    /// Effective logistic step size `gamma * |current|^2`.
    pub fn eta(&self, gamma: f64) -> f64 {
        gamma * self.theta0.norm_sq()
    }
}

/// Pointwise utility of placing unit mass at `x`.
pub fn pointwise_utility(x: &Vector, m: &ModelPair, setting: Setting) -> Result<f64, Error> {
    match setting {
        Setting::Regression => {
            let b = x.inner(m.signal())?;
            Ok(b * b + 1.0)
        }
        Setting::Classification => {
            let s_star = x.inner(m.theta_star())?;
            let s0 = x.inner(m.theta0())?;
            Ok(sigmoid(s_star) * softplus(-s0) + sigmoid(-s_star) * softplus(s0))
        }
    }
}

/// Gradient of [`pointwise_utility`] in `x`.
pub fn pointwise_gradient(x: &Vector, m: &ModelPair, setting: Setting) -> Result<Vector, Error> {
    match setting {
        Setting::Regression => {
            let b = x.inner(m.signal())?;
            Ok(m.signal().scaled(2.0 * b))
        }
        Setting::Classification => {
            let s_star = x.inner(m.theta_star())?;
            let s0 = x.inner(m.theta0())?;
            let mut g = m.theta_star().scaled(-sigmoid_prime(s_star) * s0);
            g.add_scaled(sigmoid_diff(s0, s_star), m.theta0())?;
            Ok(g)
        }
    }
}

/// Draws a response at `x` from the target model: a unit-variance normal
/// around `<x, target>` in regression, a {0, 1} coin with success
/// probability `sigmoid(<x, target>)` in classification.
pub fn sample_response<R: Rng>(
    x: &Vector,
    m: &ModelPair,
    setting: Setting,
    rng: &mut R,
) -> Result<f64, Error> {
    let s_star = x.inner(m.theta_star())?;
    match setting {
        Setting::Regression => {
            let noise: f64 = rng.sample(StandardNormal);
            Ok(s_star + noise)
        }
        Setting::Classification => {
            let u: f64 = rng.random();
            Ok(if u < sigmoid(s_star) { 1.0 } else { 0.0 })
        }
    }
}

/// Expected response at `x` under the target model; the noise-free stand-in
/// for [`sample_response`].
pub fn mean_response(x: &Vector, m: &ModelPair, setting: Setting) -> Result<f64, Error> {
    let s_star = x.inner(m.theta_star())?;
    match setting {
        Setting::Regression => Ok(s_star),
        Setting::Classification => Ok(sigmoid(s_star)),
    }
}

/// Minimum-norm best response to data supported on `s`: the orthogonal
/// projection of the target model onto `s`. The resulting pair has
/// `current` orthogonal to `signal`.
pub fn best_response(theta_star: &Vector, s: &Subspace) -> Result<Vector, Error> {
    s.project(theta_star)
}
