//! The planar recursion the logistic particle dynamic reduces to when the
//! current model is orthogonal to the residual, together with its Lyapunov
//! function, envelope bounds, and trapping-region checks.
//!
//! State is `(a, b)` with `a` the score under the current model, `b` the
//! score along the residual, and `s = a + b` the score under the target.

use alloc::vec::Vec;

use crate::error::Error;
use crate::math;
use crate::objectives::{sigmoid, sigmoid_diff, sigmoid_prime};

/// Effective step size and residual-to-model energy ratio.
#[derive(Clone, Copy, Debug)]
pub struct ScalarParams {
    pub eta: f64,
    pub ratio: f64,
}

impl ScalarParams {
    /// `eta * (1 + ratio + 1/c)`: the contraction estimates behind the
    /// trapping region need this below one half.
    pub fn step_load(&self, c: f64) -> f64 {
        self.eta * (1.0 + self.ratio + 1.0 / c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarState {
    pub a: f64,
    pub b: f64,
}

impl ScalarState {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    /// Score under the target model.
    pub fn s(&self) -> f64 {
        self.a + self.b
    }
}

/// One step of the planar recursion:
/// `a' = a - eta sig'(s) a + eta (sig(a) - sig(s))`,
/// `b' = b - eta ratio sig'(s) a`.
pub fn scalar_step(st: ScalarState, p: &ScalarParams) -> ScalarState {
    let s = st.s();
    let drift = sigmoid_prime(s) * st.a;
    ScalarState {
        a: st.a + p.eta * (sigmoid_diff(st.a, s) - drift),
        b: st.b - p.eta * p.ratio * drift,
    }
}

/// `sig'(s) a / (sig(a) - sig(s))`, the quantity trapped between the
/// envelopes while the dynamic keeps descending. `None` when the
/// denominator vanishes (on the diagonal `b = 0`, or with both scores so
/// deep in a tail the difference underflows).
pub fn lyapunov(st: &ScalarState) -> Option<f64> {
    let denom = sigmoid_diff(st.a, st.s());
    if denom == 0.0 {
        return None;
    }
    Some(sigmoid_prime(st.s()) * st.a / denom)
}

/// Pointwise bounds on the Lyapunov quantity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Envelopes {
    /// `a e^s / (1 - e^{2s})`; only defined for `s < 0`.
    pub upper: Option<f64>,
    /// `a sig(s)`, defined everywhere.
    pub lower: f64,
}

pub fn envelopes(st: &ScalarState) -> Envelopes {
    let s = st.s();
    let upper = if s < 0.0 {
        Some(st.a * math::exp(s) / (-math::expm1(2.0 * s)))
    } else {
        None
    };
    Envelopes { upper, lower: st.a * sigmoid(s) }
}

/// `(1 + 1/a) / (1 + ratio + 1/a)`: the Lyapunov level below which the
/// residual score can stop falling.
pub fn basin_threshold(a: f64, ratio: f64) -> f64 {
    (1.0 + 1.0 / a) / (1.0 + ratio + 1.0 / a)
}

/// The trapping region in the variable `w = e^{-s}`, for a fixed `a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpInterval {
    pub lo: f64,
    pub hi: f64,
}

/// Open interval of admissible `w = e^{-s}` at score `a`:
/// `lo = a (1 + sqrt(1 + 4/a^2)) / 2`,
/// `hi = a (1 + ratio + 1/a) / (1 + 1/a) - 1`.
/// `None` when the interval is empty or `a` is not positive.
pub fn admissible_exp_interval(a: f64, ratio: f64) -> Option<ExpInterval> {
    if a <= 0.0 || a.is_nan() {
        return None;
    }
    let lo = a * (1.0 + math::sqrt(1.0 + 4.0 / (a * a))) / 2.0;
    let hi = a * (1.0 + ratio + 1.0 / a) / (1.0 + 1.0 / a) - 1.0;
    if lo < hi {
        Some(ExpInterval { lo, hi })
    } else {
        None
    }
}

/// Both formulations of the trapping-region membership test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssumptionCheck {
    /// Direct form: `s < 0`, `a > c`, upper envelope below one, lower
    /// envelope at or above the basin threshold.
    pub ok: bool,
    /// Interval form: `a > c` and `e^{-s}` strictly inside
    /// [`admissible_exp_interval`]. Equivalent to `ok` away from the
    /// interval endpoints.
    pub via_interval: bool,
}

pub fn check_assumption(st: &ScalarState, p: &ScalarParams, c: f64) -> AssumptionCheck {
    let s = st.s();
    let env = envelopes(st);
    let ok = s < 0.0
        && st.a > c
        && env.upper.is_some_and(|u| u < 1.0)
        && env.lower >= basin_threshold(st.a, p.ratio);
    let via_interval = st.a > c
        && admissible_exp_interval(st.a, p.ratio).is_some_and(|iv| {
            let w = math::exp(-s);
            iv.lo < w && w < iv.hi
        });
    AssumptionCheck { ok, via_interval }
}

/// `-(1 + delta) sig'(z) x + sig(x) - sig(z)`: the one-variable function
/// whose sign pattern drives the envelope comparisons.
pub fn helper_g(delta: f64, x: f64, z: f64) -> f64 {
    -(1.0 + delta) * sigmoid_prime(z) * x + sigmoid_diff(x, z)
}

/// Cosine between the planar state and the logistic limit direction:
/// `(ratio a - b) / (sqrt(1 + ratio) sqrt(ratio a^2 + b^2))`. Scale
/// invariant, so raw scores can be passed directly. NaN at the origin.
pub fn planar_curse_alignment(st: &ScalarState, ratio: f64) -> f64 {
    let num = ratio * st.a - st.b;
    num / (math::sqrt(1.0 + ratio) * math::sqrt(ratio * st.a * st.a + st.b * st.b))
}

/// Full diagnostic row for one planar state.
#[derive(Clone, Copy, Debug)]
pub struct DiagnosticRow {
    pub t: u64,
    pub a: f64,
    pub b: f64,
    pub s: f64,
    pub lyapunov: Option<f64>,
    pub env_upper: Option<f64>,
    pub env_lower: f64,
    pub assumption_ok: bool,
}

/// Evaluates every diagnostic at one state. Works on raw vector scores
/// too: the planar quantities depend only on `(a, b)` and `ratio`.
pub fn diagnose(t: u64, st: &ScalarState, p: &ScalarParams, c: f64) -> DiagnosticRow {
    let env = envelopes(st);
    DiagnosticRow {
        t,
        a: st.a,
        b: st.b,
        s: st.s(),
        lyapunov: lyapunov(st),
        env_upper: env.upper,
        env_lower: env.lower,
        assumption_ok: check_assumption(st, p, c).ok,
    }
}

/// What a recorded planar run produced.
#[derive(Clone, Debug)]
pub struct ScalarRunSummary {
    pub rows: Vec<DiagnosticRow>,
    pub final_state: ScalarState,
    /// First time the trapping-region test passed, checked every step.
    pub first_pass: Option<u64>,
    /// `(ratio a_T - b_T - (ratio a_0 - b_0)) / T`; tends to
    /// `eta * ratio` once the scores separate.
    pub ra_minus_b_rate: Option<f64>,
    /// `|s_T| / ln T`; tends to one.
    pub star_score_log_ratio: Option<f64>,
    /// Slope of `ln(1 - align)` against `ln t` over the last decade of
    /// recorded times; tends to -2.
    pub growth_slope: Option<f64>,
}

/// Runs the planar recursion for `horizon` steps, recording diagnostics
/// every `every` steps (plus the final step) and halting if the state
/// stops being finite.
pub fn scalar_run(
    init: ScalarState,
    p: &ScalarParams,
    c: f64,
    horizon: u64,
    every: u64,
) -> Result<ScalarRunSummary, Error> {
    let times = crate::dynamics::record_times_every(horizon, every)?;
    let mut rows = Vec::with_capacity(times.len());
    let mut first_pass = None;
    let mut fit_points: Vec<(f64, f64)> = Vec::new();
    let mut st = init;
    let mut next = times.iter().copied().peekable();
    for t in 0..=horizon {
        if !(st.a.is_finite() && st.b.is_finite()) {
            return Err(Error::NonFiniteScalar { step: t });
        }
        if first_pass.is_none() && check_assumption(&st, p, c).ok {
            first_pass = Some(t);
        }
        if next.peek() == Some(&t) {
            next.next();
            rows.push(diagnose(t, &st, p, c));
            if t >= 1.max(horizon / 10) {
                let gap = 1.0 - planar_curse_alignment(&st, p.ratio);
                if gap > 0.0 && gap.is_finite() {
                    fit_points.push((math::ln(t as f64), math::ln(gap)));
                }
            }
        }
        if t < horizon {
            st = scalar_step(st, p);
        }
    }
    let ra_minus_b_rate = if horizon > 0 {
        let start = p.ratio * init.a - init.b;
        let end = p.ratio * st.a - st.b;
        Some((end - start) / horizon as f64)
    } else {
        None
    };
    let star_score_log_ratio = if horizon >= 2 {
        Some(st.s().abs() / math::ln(horizon as f64))
    } else {
        None
    };
    let growth_slope = math::least_squares(&fit_points).map(|(slope, _, _)| slope);
    Ok(ScalarRunSummary {
        rows,
        final_state: st,
        first_pass,
        ra_minus_b_rate,
        star_score_log_ratio,
        growth_slope,
    })
}
