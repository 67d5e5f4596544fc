//! Randomized consistency suites: analytic vs finite-difference derivatives,
//! maximality of the Armijo step, the `δ̂` ladder against brute force, and the
//! descent lemma.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::descent_lemma_check;
use crate::error::{fmt_point, Error, Result};
use crate::objective::{
    corpus_get, fd_gradient_default, fd_hessian_default, Objective, Params, Point,
};
use crate::sampling::{rng_for, uniform_in_box};
use crate::steppers::{armijo_backtrack, delta_hat_from, BacktrackParams};

pub const SUITES: [&str; 4] = ["gradient", "armijo", "delta_hat", "descent_lemma"];

pub const GRADIENT_TOL: f64 = 1e-6;
pub const HESSIAN_TOL: f64 = 1e-4;

/// Finite differences cannot resolve the oscillation of the example functions
/// arbitrarily close to their axes; sample points keep this distance.
pub const SMOOTH_MARGIN: f64 = 0.1;

/// Half-width of the sampling box around the origin.
const SAMPLE_HALF_WIDTH: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    pub samples: usize,
    pub failures: usize,
    /// Largest observed error measure (suite specific).
    pub worst: f64,
    pub first_failure: Option<String>,
    pub warning: Option<String>,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            passed: true,
            samples: 0,
            failures: 0,
            worst: 0.0,
            first_failure: None,
            warning: None,
        }
    }

    fn observe(&mut self, err: f64, ok: bool, describe: impl FnOnce() -> String) {
        self.samples += 1;
        if err > self.worst || err.is_nan() {
            self.worst = err;
        }
        if !ok {
            self.failures += 1;
            self.passed = false;
            if self.first_failure.is_none() {
                self.first_failure = Some(describe());
            }
        }
    }

    fn finish(mut self) -> Self {
        if self.samples == 0 {
            self.warning = Some("0 samples: suite passes vacuously".into());
        }
        self
    }

    pub fn summary_line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let mut line = format!(
            "{status} {} samples={} failures={} worst={:.3e}",
            self.name, self.samples, self.failures, self.worst
        );
        if let Some(w) = &self.warning {
            line.push_str(&format!(" warning=\"{w}\""));
        }
        if let Some(f) = &self.first_failure {
            line.push_str(&format!(" first_failure=\"{f}\""));
        }
        line
    }
}

/// Corpus members with representative parameters, including a random
/// symmetric quadratic in dimension 3.
pub fn corpus_instances(seed: u64) -> Result<Vec<Arc<dyn Objective>>> {
    let mut out = Vec::new();
    for name in ["example1", "power_abs", "double_well", "rosenbrock"] {
        out.push(corpus_get(name, &Params::new())?);
    }
    let ex2: Params = [("a", 2.0), ("b", 0.5), ("p", 4.0), ("q", 2.0)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    out.push(corpus_get("example2", &ex2)?);
    let mut rng = rng_for(seed, 0x5155);
    let mut quad = Params::new();
    quad.insert("dim".into(), 3.0);
    for i in 0..3 {
        for j in i..3 {
            quad.insert(format!("m_{i}_{j}"), rng.random_range(-2.0..2.0));
        }
    }
    out.push(corpus_get("quadratic_form", &quad)?);
    Ok(out)
}

/// Uniform point of `[−2, 2]^k` at least `margin` away from the non-smooth locus.
fn smooth_point<R: Rng>(rng: &mut R, obj: &dyn Objective, margin: f64) -> Point {
    let k = obj.dim();
    let lo = vec![-SAMPLE_HALF_WIDTH; k];
    let hi = vec![SAMPLE_HALF_WIDTH; k];
    loop {
        let x = uniform_in_box(rng, &lo, &hi);
        if obj.nonsmooth_distance(&x) >= margin {
            return x;
        }
    }
}

/// Analytic gradient and Hessian against central differences at `samples`
/// points per corpus instance. Errors are `‖a − b‖ / max(‖a‖, 1)`.
pub fn gradient_suite(samples: usize, seed: u64) -> Result<(SuiteReport, SuiteReport)> {
    let mut grad = SuiteReport::new("gradient");
    let mut hess = SuiteReport::new("hessian");
    for (i, obj) in corpus_instances(seed)?.into_iter().enumerate() {
        let mut rng = rng_for(seed, 0x4752 + i as u64);
        for _ in 0..samples {
            let x = smooth_point(&mut rng, obj.as_ref(), SMOOTH_MARGIN);
            let g = obj.gradient(&x);
            let g_fd = fd_gradient_default(obj.as_ref(), &x)?;
            let err = (&g - &g_fd).norm() / g.norm().max(1.0);
            grad.observe(err, err <= GRADIENT_TOL, || {
                format!("{} at {}: {err:.3e}", obj.name(), fmt_point(x.as_slice()))
            });
            if let Some(h) = obj.hessian(&x) {
                let h_fd = fd_hessian_default(obj.as_ref(), &x)?.matrix;
                let err = (&h - &h_fd).norm() / h.norm().max(1.0);
                hess.observe(err, err <= HESSIAN_TOL, || {
                    format!("{} at {}: {err:.3e}", obj.name(), fmt_point(x.as_slice()))
                });
            }
        }
    }
    Ok((grad.finish(), hess.finish()))
}

fn armijo_holds(obj: &dyn Objective, x: &Point, g: &Point, fx: f64, delta: f64, alpha: f64) -> bool {
    obj.value(&(x - g * delta)) - fx <= -alpha * delta * g.norm_squared()
}

/// Random (instance, point, `δ0 ∈ [0.1, 1]`, `α ∈ [0.1, 0.9]`, `β ∈ [0.3, 0.7]`)
/// cases: the returned step satisfies Armijo and, when below `δ0`, its
/// `/β` neighbour does not.
pub fn armijo_suite(samples: usize, seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("armijo");
    let objs = corpus_instances(seed)?;
    let mut rng = rng_for(seed, 0x4152);
    for _ in 0..samples {
        let obj = objs[rng.random_range(0..objs.len())].as_ref();
        let x = smooth_point(&mut rng, obj, 0.0);
        let p = BacktrackParams {
            delta0: rng.random_range(0.1..=1.0),
            alpha: rng.random_range(0.1..=0.9),
            beta: rng.random_range(0.3..=0.7),
            max_halvings: 60,
        };
        let describe = |why: &str| {
            format!(
                "{} at {} with {:?}: {why}",
                obj.name(),
                fmt_point(x.as_slice()),
                p
            )
        };
        let out = match armijo_backtrack(obj, &x, &p) {
            Ok(o) => o,
            Err(e @ Error::StepCollapse { .. }) => {
                report.observe(1.0, false, || describe(&e.to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        let fx = obj.value(&x);
        let g = obj.gradient(&x);
        let delta = out.step_size;
        let accepted = armijo_holds(obj, &x, &g, fx, delta, p.alpha);
        let maximal = delta >= p.delta0 || !armijo_holds(obj, &x, &g, fx, delta / p.beta, p.alpha);
        let ok = accepted && maximal;
        report.observe(if ok { 0.0 } else { 1.0 }, ok, || {
            describe(if accepted { "larger step also passes" } else { "step fails Armijo" })
        });
    }
    Ok(report.finish())
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo.log10()..=hi.log10()))
}

/// Brute-force `δ̂`: scan `n = 0..=50`, keep the first ladder value meeting
/// both strict conditions.
pub fn delta_hat_oracle(lipschitz: f64, radius: f64, grad_norm: f64, delta0: f64, alpha: f64, beta: f64) -> Option<(f64, u32)> {
    let mut found = None;
    for n in (0..=50u32).rev() {
        let d = delta0 * beta.powi(n as i32);
        if alpha / lipschitz > d && radius > d * grad_norm {
            found = Some((d, n));
        }
    }
    found
}

/// The ladder search against [`delta_hat_oracle`] on random inputs; both
/// the value and the index must match exactly.
pub fn delta_hat_suite(samples: usize, seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("delta_hat");
    let mut rng = rng_for(seed, 0x4448);
    for i in 0..samples {
        let l = log_uniform(&mut rng, 1e-3, 1e4);
        let r = log_uniform(&mut rng, 1e-6, 10.0);
        let gn = if i % 50 == 0 { 0.0 } else { log_uniform(&mut rng, 1e-6, 1e4) };
        let p = BacktrackParams {
            delta0: log_uniform(&mut rng, 1e-2, 1.0),
            alpha: rng.random_range(0.01..0.99),
            beta: rng.random_range(0.1..0.9),
            max_halvings: 50,
        };
        let got = delta_hat_from(l, r, gn, &p);
        let want = delta_hat_oracle(l, r, gn, p.delta0, p.alpha, p.beta);
        let ok = match (got, want) {
            (Some((a, m)), Some((b, n))) => a.to_bits() == b.to_bits() && m == n,
            (None, None) => true,
            _ => false,
        };
        report.observe(if ok { 0.0 } else { 1.0 }, ok, || {
            format!("L={l:e} r={r:e} |g|={gn:e} {p:?}: got {got:?}, want {want:?}")
        });
    }
    Ok(report.finish())
}

/// Relative deviation from equality allowed on the top eigenvector.
pub const DESCENT_EQUALITY_TOL: f64 = 1e-10;

/// Diagonal quadratics `½ xᵀ diag(L, …) x` with `δ` on a grid in `(0, 1/L]`:
/// the inequality holds everywhere and is an equality along the top
/// eigenvector. Also checks random corpus points with their local constants.
pub fn descent_lemma_suite(samples: usize, seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("descent_lemma");
    let mut rng = rng_for(seed, 0x444c);
    let objs = corpus_instances(seed)?;
    for i in 0..samples {
        // Diagonal quadratic.
        let k = 1 + i % 4;
        let l = log_uniform(&mut rng, 1e-2, 1e2);
        let mut params = Params::new();
        params.insert("dim".into(), k as f64);
        params.insert("m_0_0".into(), l);
        for j in 1..k {
            params.insert(format!("m_{j}_{j}"), l * rng.random_range(-1.0..1.0));
        }
        let q = corpus_get("quadratic_form", &params)?;
        let deltas: Vec<f64> = (1..=10).map(|m| m as f64 / (10.0 * l)).collect();
        let lo = vec![-SAMPLE_HALF_WIDTH; k];
        let hi = vec![SAMPLE_HALF_WIDTH; k];
        let x = uniform_in_box(&mut rng, &lo, &hi);
        for e in descent_lemma_check(q.as_ref(), &x, l, &deltas)? {
            report.observe(0.0, e.holds, || format!("quadratic L={l} x={} δ={}", fmt_point(x.as_slice()), e.delta));
        }
        let mut top = Point::zeros(k);
        top[0] = rng.random_range(0.1..SAMPLE_HALF_WIDTH);
        for e in descent_lemma_check(q.as_ref(), &top, l, &deltas)? {
            let rel = (e.lhs - e.bound).abs() / e.bound.abs().max(f64::MIN_POSITIVE);
            report.observe(rel, e.holds && rel <= DESCENT_EQUALITY_TOL, || {
                format!("top eigenvector L={l} x={} δ={}: rel {rel:e}", fmt_point(top.as_slice()), e.delta)
            });
        }

        // Corpus member with its own local constant on the step segment.
        let obj = objs[i % objs.len()].as_ref();
        let x = smooth_point(&mut rng, obj, SMOOTH_MARGIN);
        let gn = obj.gradient(&x).norm();
        if let Some(field) = obj.lipschitz_field(&x) {
            let dmax = if gn > 0.0 {
                (1.0 / field.constant).min(field.radius / gn)
            } else {
                1.0 / field.constant
            };
            let deltas: Vec<f64> = (1..=10).map(|m| dmax * m as f64 / 10.0).collect();
            for e in descent_lemma_check(obj, &x, field.constant, &deltas)? {
                report.observe(0.0, e.holds, || {
                    format!("{} at {} δ={}", obj.name(), fmt_point(x.as_slice()), e.delta)
                });
            }
        }
    }
    Ok(report.finish())
}

/// Runs one named suite; `gradient` yields two reports (gradient and Hessian).
pub fn run_suite(name: &str, samples: usize, seed: u64) -> Result<Vec<SuiteReport>> {
    match name {
        "gradient" => {
            let (g, h) = gradient_suite(samples, seed)?;
            Ok(vec![g, h])
        }
        "armijo" => Ok(vec![armijo_suite(samples, seed)?]),
        "delta_hat" => Ok(vec![delta_hat_suite(samples, seed)?]),
        "descent_lemma" => Ok(vec![descent_lemma_suite(samples, seed)?]),
        other => Err(Error::Config(format!(
            "unknown suite `{other}` (expected one of {})",
            SUITES.join(", ")
        ))),
    }
}
