//! Runnable property suites.
//!
//! Each suite checks one family of claims the library is built on, over
//! randomized inputs drawn from a seeded generator, and reports violations
//! with the offending inputs so a failure is immediately reproducible.

use std::io::Write;

use advshift_core::dynamics::evolve_particle;
use advshift_core::objectives::{
    best_response, pointwise_gradient, pointwise_utility, sigmoid_diff,
};
use advshift_core::rng::stream_rng;
use advshift_core::scalar::{
    admissible_exp_interval, basin_threshold, check_assumption, envelopes, helper_g,
    lyapunov, scalar_step, ScalarParams, ScalarState,
};
use advshift_core::{ModelPair, Setting, Subspace, Vector};
use rand::Rng;

use crate::error::{CliError, CliResult};

#[derive(Debug)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub checked: u64,
    pub failed: u64,
    /// Up to ten counterexamples, in discovery order.
    pub violations: Vec<String>,
}

impl PropertyOutcome {
    fn new(name: &'static str) -> Self {
        PropertyOutcome { name, checked: 0, failed: 0, violations: Vec::new() }
    }

    fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failed += 1;
            if self.violations.len() < 10 {
                self.violations.push(describe());
            }
        }
    }
}

#[derive(Debug)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub properties: Vec<PropertyOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.failed == 0)
    }

    pub fn print(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "suite {}", self.suite)?;
        for p in &self.properties {
            if p.failed == 0 {
                writeln!(w, "  PASS {} ({} cases)", p.name, p.checked)?;
            } else {
                writeln!(
                    w,
                    "  FAIL {} ({} cases, {} violations)",
                    p.name, p.checked, p.failed
                )?;
                for v in &p.violations {
                    writeln!(w, "    counterexample: {v}")?;
                }
            }
        }
        Ok(())
    }
}

pub fn run_suite(name: &str, seed: u64) -> CliResult<SuiteReport> {
    match name {
        "gradients" => Ok(gradients(seed)),
        "closed-form" => Ok(closed_form(seed)),
        "invariants" => Ok(invariants(seed)),
        "envelopes" => Ok(envelopes_suite(seed)),
        _ => Err(CliError::Config(format!(
            "unknown suite '{name}' (choose from invariants, gradients, closed-form, envelopes)"
        ))),
    }
}

fn normal_vec(dim: usize, rng: &mut impl Rng) -> Vector {
    Vector::new((0..dim).map(|_| rng.sample(rand_distr::StandardNormal)).collect()).unwrap()
}

/// Central finite differences against the analytic pointwise gradients,
/// both settings, random low-dimensional instances.
pub fn gradients(seed: u64) -> SuiteReport {
    let mut prop = PropertyOutcome::new("analytic gradient matches central differences at 1e-6");
    let mut rng = stream_rng(seed, 900);
    for case in 0..1200u64 {
        let dim = rng.random_range(2..8usize);
        let star = normal_vec(dim, &mut rng);
        let theta0 = normal_vec(dim, &mut rng);
        let m = match ModelPair::new(star, theta0) {
            Ok(m) => m,
            Err(_) => continue,
        };
        let x = normal_vec(dim, &mut rng);
        for setting in [Setting::Regression, Setting::Classification] {
            let g = pointwise_gradient(&x, &m, setting).unwrap();
            let scale = g.max_abs().max(1.0);
            let mut worst = 0.0f64;
            for i in 0..dim {
                let h = 1e-5 * x.as_slice()[i].abs().max(1.0);
                let mut hi = x.clone();
                hi.as_mut_slice()[i] += h;
                let mut lo = x.clone();
                lo.as_mut_slice()[i] -= h;
                let fd = (pointwise_utility(&hi, &m, setting).unwrap()
                    - pointwise_utility(&lo, &m, setting).unwrap())
                    / (2.0 * h);
                worst = worst.max((fd - g.as_slice()[i]).abs() / scale);
            }
            prop.check(worst <= 1e-6, || {
                format!("case {case} {setting:?}: rel err {worst:.3e} at x={:?}", x.as_slice())
            });
        }
    }
    SuiteReport { suite: "gradients", properties: vec![prop] }
}

/// Simulated squared-error trajectories against the exact closed form.
pub fn closed_form(seed: u64) -> SuiteReport {
    let mut prop =
        PropertyOutcome::new("simulated trajectory matches closed form at 1e-9 relative");
    let mut rng = stream_rng(seed, 901);
    for case in 0..100u64 {
        let dim = rng.random_range(3..13usize);
        let rank = rng.random_range(1..dim);
        let sub = Subspace::haar(dim, rank, seed.wrapping_add(case * 7 + 1)).unwrap();
        let star = normal_vec(dim, &mut rng);
        let theta0 = best_response(&star, &sub).unwrap();
        let m = match ModelPair::new(star, theta0) {
            Ok(m) => m,
            Err(_) => continue,
        };
        let x0 = match normal_vec(dim, &mut rng).normalized() {
            Ok(v) => v,
            Err(_) => continue,
        };
        let gamma = 0.05 + 0.85 * rng.random::<f64>();
        let t = rng.random_range(1..=60u64);
        let mut x = x0.clone();
        evolve_particle(&mut x, &m, Setting::Regression, gamma, t, 0, 0).unwrap();
        let cf = advshift_core::dynamics::regression_closed_form_state(&x0, &m, gamma, t)
            .unwrap();
        let scale = cf.max_abs().max(1.0);
        let mut worst = 0.0f64;
        for (s, c) in x.as_slice().iter().zip(cf.as_slice()) {
            worst = worst.max((s - c).abs() / scale);
        }
        prop.check(worst <= 1e-9, || {
            format!("case {case}: dim {dim} rank {rank} gamma {gamma} T {t}: rel err {worst:.3e}")
        });
    }
    SuiteReport { suite: "closed-form", properties: vec![prop] }
}

/// Draws basin parameters with contraction margin and a start strictly
/// inside the admissible band. Returns (params, state).
fn sample_basin_state(
    rng: &mut impl Rng,
    c: f64,
    a_max: f64,
) -> (ScalarParams, ScalarState) {
    loop {
        let ratio = (rng.random::<f64>() * (4.0f64 / 0.5).ln() + 0.5f64.ln()).exp();
        let eta = 0.4 / (1.0 + ratio + 1.0 / c) * (0.5 + 0.5 * rng.random::<f64>());
        let a = c + 0.5 + (a_max - c - 0.5) * rng.random::<f64>();
        let iv = match admissible_exp_interval(a, ratio) {
            Some(iv) if iv.hi > iv.lo * 1.01 => iv,
            _ => continue,
        };
        let lo = iv.lo * 1.001;
        let hi = iv.hi * 0.999;
        let w = (rng.random::<f64>() * (hi.ln() - lo.ln()) + lo.ln()).exp();
        let st = ScalarState::new(a, -w.ln() - a);
        let p = ScalarParams { eta, ratio };
        if check_assumption(&st, &p, c).ok {
            return (p, st);
        }
    }
}

/// The sign claims of the helper function, the Lyapunov bracket along
/// trapped runs, the per-step conserved-combination identity, and
/// one-step basin preservation.
pub fn invariants(seed: u64) -> SuiteReport {
    let mut helper_neg =
        PropertyOutcome::new("helper is negative above the upper threshold");
    let mut helper_pos =
        PropertyOutcome::new("helper is positive below the lower threshold");
    let mut helper_concave = PropertyOutcome::new("helper is concave in its first argument");
    let zs: Vec<f64> = (0..40)
        .map(|k| -(0.01f64 * (30.0f64 / 0.01).powf(k as f64 / 39.0)))
        .collect();
    for &delta in &[0.0, 0.25, 0.5, 1.0] {
        for &z in &zs {
            let upper = ((-z).exp() + 1.0) / (1.0 + delta);
            for mult in [1.001, 1.01, 1.1, 2.0, 10.0] {
                let x = upper * mult;
                let g = helper_g(delta, x, z);
                helper_neg.check(g < 0.0, || format!("delta={delta} z={z} x={x}: g={g}"));
            }
            let lower = ((-z).exp() - z.exp()) / (1.0 + delta);
            for frac in [0.0, 0.1, 0.5, 0.9, 0.999] {
                let x = lower * frac;
                let g = helper_g(delta, x, z);
                helper_pos.check(g > 0.0, || format!("delta={delta} z={z} x={x}: g={g}"));
            }
            for k in 0..30 {
                let x = upper * 2.0 * (k as f64 + 0.5) / 30.0;
                let h = 1e-2 * x.max(1e-3);
                let second = helper_g(delta, x + h, z) + helper_g(delta, x - h, z)
                    - 2.0 * helper_g(delta, x, z);
                helper_concave
                    .check(second <= 1e-12, || format!("delta={delta} z={z} x={x}: d2={second}"));
            }
        }
    }

    let c = 5.0;
    let mut bracket =
        PropertyOutcome::new("Lyapunov stays in [threshold(a), 1) after entering the basin");
    let mut key_identity =
        PropertyOutcome::new("ratio*a - b advances by eta*ratio*(sig(a)-sig(s)) each step");
    let mut monotone =
        PropertyOutcome::new("model score rises, star score falls after entering the basin");
    let mut rng = stream_rng(seed, 902);
    for run in 0..50u64 {
        let (p, mut st) = sample_basin_state(&mut rng, c, 60.0);
        let mut entered = false;
        for t in 0..1500u64 {
            if !entered {
                entered = check_assumption(&st, &p, c).ok;
            }
            if entered {
                let l = lyapunov(&st);
                let thr = basin_threshold(st.a, p.ratio);
                bracket.check(
                    l.map(|l| l >= thr - 1e-12 && l < 1.0).unwrap_or(false),
                    || format!("run {run} t {t}: a={} b={} L={l:?} thr={thr}", st.a, st.b),
                );
            }
            let next = scalar_step(st, &p);
            let key_now = p.ratio * st.a - st.b;
            let key_next = p.ratio * next.a - next.b;
            let drift = p.eta * p.ratio * sigmoid_diff(st.a, st.s());
            let resid = (key_next - key_now - drift).abs();
            key_identity.check(resid <= 1e-12 * key_now.abs().max(1.0), || {
                format!("run {run} t {t}: residual {resid:.3e}")
            });
            if entered {
                monotone.check(next.a > st.a && next.s() < st.s() && next.b < st.b, || {
                    format!("run {run} t {t}: a {}->{} s {}->{}", st.a, next.a, st.s(), next.s())
                });
            }
            st = next;
        }
    }

    let mut preserve = PropertyOutcome::new("one step preserves the basin check");
    let mut env_u_falls = PropertyOutcome::new("upper envelope falls across a step");
    let mut env_l_holds =
        PropertyOutcome::new("lower envelope stays above the threshold after a step");
    let mut rng = stream_rng(seed, 903);
    for case in 0..10_000u64 {
        let (p, st) = sample_basin_state(&mut rng, c, 100.0);
        let next = scalar_step(st, &p);
        preserve.check(check_assumption(&next, &p, c).ok, || {
            format!("case {case}: a={} b={} eta={} r={}", st.a, st.b, p.eta, p.ratio)
        });
        let (e0, e1) = (envelopes(&st), envelopes(&next));
        env_u_falls.check(
            matches!((e0.upper, e1.upper), (Some(u0), Some(u1)) if u1 < u0),
            || format!("case {case}: a={} b={} upper {:?} -> {:?}", st.a, st.b, e0.upper, e1.upper),
        );
        let thr_next = basin_threshold(next.a, p.ratio);
        env_l_holds.check(e1.lower >= thr_next - 1e-12, || {
            format!("case {case}: a={} b={} envL'={} thr'={}", st.a, st.b, e1.lower, thr_next)
        });
    }

    SuiteReport {
        suite: "invariants",
        properties: vec![
            helper_neg,
            helper_pos,
            helper_concave,
            bracket,
            key_identity,
            monotone,
            preserve,
            env_u_falls,
            env_l_holds,
        ],
    }
}

/// Envelope ordering, the bracket below the Lyapunov value, the threshold
/// implications, and direct-vs-interval agreement of the basin check.
pub fn envelopes_suite(seed: u64) -> SuiteReport {
    let mut order = PropertyOutcome::new("lower envelope never exceeds the upper");
    let mut below_l = PropertyOutcome::new("lower envelope never exceeds the Lyapunov value");
    let mut upper_implies =
        PropertyOutcome::new("upper envelope below one forces Lyapunov below one");
    let mut lower_implies =
        PropertyOutcome::new("lower envelope above 1/(1+r) forces Lyapunov above it");
    let mut rng = stream_rng(seed, 904);
    for case in 0..20_000u64 {
        let a = (rng.random::<f64>() * (100.0f64 / 1e-3).ln() + 1e-3f64.ln()).exp();
        let s = -((rng.random::<f64>() * (50.0f64 / 1e-6).ln() + 1e-6f64.ln()).exp());
        let st = ScalarState::new(a, s - a);
        let env = envelopes(&st);
        let u = env.upper.unwrap();
        order.check(env.lower <= u * (1.0 + 1e-12), || {
            format!("case {case}: a={a} s={s}: lower {} upper {u}", env.lower)
        });
        let l = lyapunov(&st).unwrap();
        below_l.check(env.lower <= l * (1.0 + 1e-12), || {
            format!("case {case}: a={a} s={s}: lower {} L {l}", env.lower)
        });
        if u < 1.0 - 1e-9 {
            upper_implies
                .check(l < 1.0, || format!("case {case}: a={a} s={s}: upper {u} L {l}"));
        }
        let ratio = (rng.random::<f64>() * (10.0f64 / 0.1).ln() + 0.1f64.ln()).exp();
        let floor = 1.0 / (1.0 + ratio);
        if env.lower > floor * (1.0 + 1e-9) {
            lower_implies.check(l > floor * (1.0 - 1e-12), || {
                format!("case {case}: a={a} s={s} r={ratio}: lower {} L {l}", env.lower)
            });
        }
    }

    let mut agree =
        PropertyOutcome::new("direct basin check agrees with the interval form off-boundary");
    let c = 5.0;
    let mut rng = stream_rng(seed, 905);
    for case in 0..100_000u64 {
        let a = (rng.random::<f64>() * (100.0f64 / 0.2).ln() + 0.2f64.ln()).exp();
        let s = if rng.random::<f64>() < 0.5 {
            // wide spread, mostly failing
            -10.0 + 13.0 * rng.random::<f64>()
        } else {
            // concentrated where passes live: s near -(log((1+r)a)) scale
            -((rng.random::<f64>() * (40.0f64 / 1.0).ln()).exp())
        };
        let ratio = (rng.random::<f64>() * (10.0f64 / 0.1).ln() + 0.1f64.ln()).exp();
        let st = ScalarState::new(a, s - a);
        let p = ScalarParams { eta: 0.05, ratio };
        let res = check_assumption(&st, &p, c);
        // boundary bands where the two formulations can round apart
        let w = (-s).exp();
        let near_boundary = (a - c).abs() <= 1e-12 * c
            || match admissible_exp_interval(a, ratio) {
                Some(iv) => {
                    (w - iv.lo).abs() <= 1e-12 * w.max(1.0)
                        || (w - iv.hi).abs() <= 1e-12 * w.max(1.0)
                }
                None => false,
            };
        if near_boundary {
            continue;
        }
        agree.check(res.ok == res.via_interval, || {
            format!(
                "case {case}: a={a} s={s} r={ratio}: direct {} interval {}",
                res.ok, res.via_interval
            )
        });
    }

    SuiteReport {
        suite: "envelopes",
        properties: vec![order, below_l, upper_implies, lower_implies, agree],
    }
}
