//! Discrete descent rules and the iteration driver.
//!
//! Every rule maps a point `x` to `x − δ(x)∇f(x)` (momentum variants add a
//! velocity term). Backtracking rules pick `δ` from the ladder `{β^m δ0}`.

mod driver;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{fmt_point, Error, Result};
use crate::objective::{checked_gradient, checked_value, ensure_finite, Objective, Point};

pub use driver::{run, RecordEntry, Rule, RunConfig, StopReason, Trace, RULE_SELECTORS};

/// Slack for re-checking guaranteed decrease inequalities in floating point.
pub fn descent_slack(fx: f64) -> f64 {
    1e-12 * (1.0 + fx.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacktrackParams {
    pub delta0: f64,
    pub alpha: f64,
    pub beta: f64,
    pub max_halvings: u32,
}

impl Default for BacktrackParams {
    fn default() -> Self {
        Self {
            delta0: 1.0,
            alpha: 0.5,
            beta: 0.5,
            max_halvings: 60,
        }
    }
}

impl BacktrackParams {
    pub fn new(delta0: f64, alpha: f64, beta: f64) -> Self {
        Self {
            delta0,
            alpha,
            beta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            return Err(Error::Config(format!("delta0 must be positive, got {}", self.delta0)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!("beta must lie in (0,1), got {}", self.beta)));
        }
        if self.max_halvings < 1 {
            return Err(Error::Config("max_halvings must be at least 1".into()));
        }
        Ok(())
    }

    /// The ladder value `β^m δ0`.
    pub fn ladder(&self, m: u32) -> f64 {
        self.delta0 * self.beta.powi(m as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: Point,
    pub step_size: f64,
    pub backtracks: u32,
    /// `f(next) − f(x)`.
    pub armijo_lhs: f64,
    /// The rule's guaranteed bound, e.g. `−α δ ‖∇f(x)‖²`.
    pub armijo_rhs: f64,
}

fn armijo_rhs(alpha: f64, delta: f64, grad_sq: f64) -> f64 {
    -alpha * delta * grad_sq
}

fn collapse(p: &BacktrackParams, x: &Point, what: &str) -> Error {
    Error::StepCollapse {
        halvings: p.max_halvings,
        context: format!("{what} at {}", fmt_point(x.as_slice())),
    }
}

/// Standard GD: `next = x − δ∇f(x)` with no acceptance test.
///
/// The Armijo fields report the realized inequality with coefficient `alpha`;
/// nothing guarantees it holds.
pub fn standard_gd_step(obj: &dyn Objective, x: &Point, delta: f64, alpha: f64) -> Result<StepOutcome> {
    if !(delta > 0.0) {
        return Err(Error::Config(format!("step size must be positive, got {delta}")));
    }
    ensure_finite(x)?;
    let fx = checked_value(obj, x)?;
    let g = checked_gradient(obj, x)?;
    let next = x - &g * delta;
    let fnext = obj.value(&next);
    Ok(StepOutcome {
        next,
        step_size: delta,
        backtracks: 0,
        armijo_lhs: fnext - fx,
        armijo_rhs: armijo_rhs(alpha, delta, g.norm_squared()),
    })
}

struct Probe<'a> {
    obj: &'a dyn Objective,
    x: &'a Point,
    fx: f64,
    g: Point,
    grad_sq: f64,
}

impl<'a> Probe<'a> {
    fn new(obj: &'a dyn Objective, x: &'a Point) -> Result<Self> {
        ensure_finite(x)?;
        let fx = checked_value(obj, x)?;
        let g = checked_gradient(obj, x)?;
        let grad_sq = g.norm_squared();
        Ok(Self {
            obj,
            x,
            fx,
            g,
            grad_sq,
        })
    }

    /// Evaluates the Armijo test at `delta`; returns the candidate when it passes.
    fn try_step(&self, delta: f64, alpha: f64) -> (bool, Point, f64) {
        let next = self.x - &self.g * delta;
        let lhs = self.obj.value(&next) - self.fx;
        // A NaN lhs fails the comparison, which is the intended outcome.
        (lhs <= armijo_rhs(alpha, delta, self.grad_sq), next, lhs)
    }

    fn outcome(&self, p: &BacktrackParams, m: u32, backtracks: u32) -> StepOutcome {
        let delta = p.ladder(m);
        let (_, next, lhs) = self.try_step(delta, p.alpha);
        StepOutcome {
            next,
            step_size: delta,
            backtracks,
            armijo_lhs: lhs,
            armijo_rhs: armijo_rhs(p.alpha, delta, self.grad_sq),
        }
    }

    fn armijo_at(&self, p: &BacktrackParams, m: u32) -> bool {
        self.try_step(p.ladder(m), p.alpha).0
    }

    fn backtrack(&self, p: &BacktrackParams) -> Result<StepOutcome> {
        (0..=p.max_halvings)
            .find(|&m| self.armijo_at(p, m))
            .map(|m| self.outcome(p, m, m))
            .ok_or_else(|| collapse(p, self.x, "no ladder step satisfies Armijo"))
    }
}

/// Backtracking GD: the largest `β^m δ0`, `m ≤ max_halvings`, with
/// `f(x − δ∇f(x)) − f(x) ≤ −α δ ‖∇f(x)‖²`.
pub fn armijo_backtrack(obj: &dyn Objective, x: &Point, p: &BacktrackParams) -> Result<StepOutcome> {
    p.validate()?;
    Probe::new(obj, x)?.backtrack(p)
}

/// Index of the largest ladder value not exceeding `step` (up to rounding).
fn ladder_index(step: f64, p: &BacktrackParams) -> u32 {
    let cap = step * (1.0 + 1e-12);
    let guess = ((step / p.delta0).ln() / p.beta.ln()).floor().max(0.0);
    let mut m = (guess.min(p.max_halvings as f64)) as u32;
    while m > 0 && p.ladder(m - 1) <= cap {
        m -= 1;
    }
    while m < p.max_halvings && p.ladder(m) > cap {
        m += 1;
    }
    m
}

/// Two-way backtracking: start from the previous step, climb the ladder while
/// Armijo keeps holding (capped at `δ0`), or descend until it first holds.
///
/// `prev_step` is snapped to the largest ladder value not exceeding it.
pub fn two_way_backtrack(
    obj: &dyn Objective,
    x: &Point,
    prev_step: f64,
    p: &BacktrackParams,
) -> Result<StepOutcome> {
    p.validate()?;
    if !(prev_step > 0.0 && prev_step <= p.delta0 * (1.0 + 1e-12)) {
        return Err(Error::Config(format!(
            "previous step must lie in (0, delta0], got {prev_step}"
        )));
    }
    let probe = Probe::new(obj, x)?;
    let start = ladder_index(prev_step, p);
    if probe.armijo_at(p, start) {
        let mut m = start;
        while m > 0 && probe.armijo_at(p, m - 1) {
            m -= 1;
        }
        Ok(probe.outcome(p, m, 0))
    } else {
        let mut m = start;
        loop {
            if m >= p.max_halvings {
                return Err(collapse(p, x, "two-way ladder exhausted"));
            }
            m += 1;
            if probe.armijo_at(p, m) {
                return Ok(probe.outcome(p, m, m - start));
            }
        }
    }
}

/// The step size of the Lipschitz-aware rule: the largest `β^n δ0` with
/// `δ < α / L(x)` and `δ ‖∇f(x)‖ < r(x)`, both strict. Returns `(δ̂, n)`.
pub fn delta_hat(obj: &dyn Objective, x: &Point, p: &BacktrackParams) -> Result<(f64, u32)> {
    p.validate()?;
    ensure_finite(x)?;
    let g = checked_gradient(obj, x)?;
    let field = obj.lipschitz_field(x).ok_or_else(|| {
        Error::Config(format!(
            "objective `{}` has no Lipschitz field at {}",
            obj.name(),
            fmt_point(x.as_slice())
        ))
    })?;
    delta_hat_from(field.constant, field.radius, g.norm(), p)
        .ok_or_else(|| collapse(p, x, "no ladder step satisfies both Lipschitz conditions"))
}

/// Ladder search behind [`delta_hat`], on raw `(L, r, ‖∇f‖)`.
pub fn delta_hat_from(lipschitz: f64, radius: f64, grad_norm: f64, p: &BacktrackParams) -> Option<(f64, u32)> {
    let cap = p.alpha / lipschitz;
    (0..=p.max_halvings)
        .map(|n| (p.ladder(n), n))
        .find(|&(d, _)| d < cap && d * grad_norm < radius)
}

/// One step `x − δ̂(x)∇f(x)`, re-checking `f(next) − f(x) ≤ −(1−α) δ̂ ‖∇f(x)‖²`.
pub fn gd_new_step(obj: &dyn Objective, x: &Point, p: &BacktrackParams) -> Result<StepOutcome> {
    let (delta, n) = delta_hat(obj, x, p)?;
    let probe = Probe::new(obj, x)?;
    let (_, next, lhs) = probe.try_step(delta, p.alpha);
    let rhs = armijo_rhs(1.0 - p.alpha, delta, probe.grad_sq);
    if !(lhs <= rhs + descent_slack(probe.fx)) {
        return Err(Error::InvariantViolation(format!(
            "(1-alpha) decrease failed at {}: {lhs:e} > {rhs:e}; Lipschitz field is invalid there",
            fmt_point(x.as_slice())
        )));
    }
    Ok(StepOutcome {
        next,
        step_size: delta,
        backtracks: n,
        armijo_lhs: lhs,
        armijo_rhs: rhs,
    })
}

fn check_momentum_inputs(x: &Point, velocity: &Point, gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Config(format!("gamma must lie in [0,1), got {gamma}")));
    }
    if velocity.len() != x.len() {
        return Err(Error::Config(format!(
            "velocity has dimension {}, point has {}",
            velocity.len(),
            x.len()
        )));
    }
    ensure_finite(velocity)
}

fn momentum_like(
    probe: &Probe<'_>,
    velocity: &Point,
    gamma: f64,
    direction: &Point,
    p: &BacktrackParams,
) -> Result<(StepOutcome, Point)> {
    let base = probe.backtrack(p)?;
    let delta = base.step_size;
    let v_new: DVector<f64> = velocity * gamma + direction * delta;
    let candidate = probe.x - &v_new;
    let lhs = probe.obj.value(&candidate) - probe.fx;
    let rhs = armijo_rhs(p.alpha, delta, probe.grad_sq);
    if lhs <= rhs {
        let out = StepOutcome {
            next: candidate,
            step_size: delta,
            backtracks: base.backtracks,
            armijo_lhs: lhs,
            armijo_rhs: rhs,
        };
        Ok((out, v_new))
    } else {
        let v_pure = &probe.g * delta;
        Ok((base, v_pure))
    }
}

/// Backtracking momentum: try `x − (γv + δ∇f(x))` with `δ` from [`armijo_backtrack`];
/// accept it if the Armijo bound for `δ` holds, otherwise take the plain step.
pub fn momentum_backtracking_step(
    obj: &dyn Objective,
    x: &Point,
    velocity: &Point,
    gamma: f64,
    p: &BacktrackParams,
) -> Result<(StepOutcome, Point)> {
    p.validate()?;
    check_momentum_inputs(x, velocity, gamma)?;
    let probe = Probe::new(obj, x)?;
    let direction = probe.g.clone();
    momentum_like(&probe, velocity, gamma, &direction, p)
}

/// Backtracking NAG: as [`momentum_backtracking_step`] with the gradient in the
/// combined step taken at the look-ahead point `x − γv`.
pub fn nag_backtracking_step(
    obj: &dyn Objective,
    x: &Point,
    velocity: &Point,
    gamma: f64,
    p: &BacktrackParams,
) -> Result<(StepOutcome, Point)> {
    p.validate()?;
    check_momentum_inputs(x, velocity, gamma)?;
    let probe = Probe::new(obj, x)?;
    let lookahead = x - velocity * gamma;
    let direction = checked_gradient(obj, &lookahead)?;
    momentum_like(&probe, velocity, gamma, &direction, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{corpus_get, FnObjective, LocalLipschitz, Params};

    fn half_square() -> FnObjective {
        FnObjective::new(
            "half_square",
            1,
            |x: &Point| 0.5 * x[0] * x[0],
            |x: &Point| x.clone(),
        )
    }

    fn pt(v: &[f64]) -> Point {
        Point::from_row_slice(v)
    }

    /// Field with fixed `L`, `r` on a linear objective with gradient of norm `gn`.
    fn linear(gn: f64, l: f64, r: f64) -> FnObjective {
        FnObjective::new(
            "linear",
            1,
            move |x: &Point| gn * x[0],
            move |_x: &Point| pt(&[gn]),
        )
        .with_lipschitz_field(move |_| LocalLipschitz {
            constant: l,
            radius: r,
        })
    }

    #[test]
    fn standard_step_examples() {
        let quad = corpus_get("quadratic_form", &Params::new()).unwrap();
        let out = standard_gd_step(quad.as_ref(), &pt(&[1.0, 1.0]), 0.1, 0.5).unwrap();
        assert!((out.next - pt(&[0.9, 0.9])).amax() < 1e-15);
        assert_eq!(out.backtracks, 0);

        let mut params = Params::new();
        params.insert("gamma".into(), 0.5);
        let pow = corpus_get("power_abs", &params).unwrap();
        let out = standard_gd_step(pow.as_ref(), &pt(&[1.0]), 1.0, 0.5).unwrap();
        assert_eq!(out.next[0], -0.5);

        let out = standard_gd_step(quad.as_ref(), &pt(&[0.0, 0.0]), 0.3, 0.5).unwrap();
        assert_eq!(out.next, pt(&[0.0, 0.0]));
        assert!(standard_gd_step(quad.as_ref(), &pt(&[0.0, 0.0]), 0.0, 0.5).is_err());
    }

    #[test]
    fn armijo_tie_accepts_full_step() {
        let p = BacktrackParams::new(1.0, 0.5, 0.5);
        let out = armijo_backtrack(&half_square(), &pt(&[1.0]), &p).unwrap();
        assert_eq!(out.step_size, 1.0);
        assert_eq!(out.next[0], 0.0);
        assert_eq!(out.armijo_lhs, -0.5);
        assert_eq!(out.armijo_rhs, -0.5);
    }

    #[test]
    fn armijo_strict_alpha_backtracks_three_times() {
        let p = BacktrackParams::new(1.0, 0.9, 0.5);
        let out = armijo_backtrack(&half_square(), &pt(&[1.0]), &p).unwrap();
        assert_eq!(out.step_size, 0.125);
        assert_eq!(out.backtracks, 3);
        assert_eq!(out.next[0], 0.875);
        assert_eq!(out.armijo_lhs, -0.1171875);
        assert!((out.armijo_rhs + 0.1125).abs() < 1e-15);
    }

    #[test]
    fn armijo_at_critical_point_keeps_delta0() {
        let p = BacktrackParams::new(0.7, 0.5, 0.5);
        let out = armijo_backtrack(&half_square(), &pt(&[0.0]), &p).unwrap();
        assert_eq!(out.step_size, 0.7);
        assert_eq!(out.next[0], 0.0);
    }

    #[test]
    fn armijo_collapse_on_ascent_direction() {
        // Gradient sign flipped: every step increases f.
        let bad = FnObjective::new("bad", 1, |x: &Point| 0.5 * x[0] * x[0], |x: &Point| -x.clone());
        let p = BacktrackParams {
            max_halvings: 5,
            ..BacktrackParams::default()
        };
        assert!(matches!(
            armijo_backtrack(&bad, &pt(&[1.0]), &p),
            Err(Error::StepCollapse { .. })
        ));
    }

    #[test]
    fn two_way_climbs_and_descends() {
        let p = BacktrackParams::new(1.0, 0.5, 0.5);
        let out = two_way_backtrack(&half_square(), &pt(&[1.0]), 0.25, &p).unwrap();
        assert_eq!(out.step_size, 1.0);

        let p9 = BacktrackParams::new(1.0, 0.9, 0.5);
        let out = two_way_backtrack(&half_square(), &pt(&[1.0]), 1.0, &p9).unwrap();
        assert_eq!(out.step_size, 0.125);
        assert_eq!(out.backtracks, 3);

        let out = two_way_backtrack(&half_square(), &pt(&[1.0]), 0.125, &p9).unwrap();
        assert_eq!(out.step_size, 0.125);
        assert_eq!(out.backtracks, 0);

        assert!(two_way_backtrack(&half_square(), &pt(&[1.0]), 2.0, &p).is_err());
    }

    #[test]
    fn ladder_index_snaps_down() {
        let p = BacktrackParams::new(1.0, 0.5, 0.3);
        assert_eq!(ladder_index(1.0, &p), 0);
        assert_eq!(ladder_index(p.ladder(7), &p), 7);
        assert_eq!(ladder_index(0.5, &p), 1);
        assert_eq!(ladder_index(1e-300, &p), p.max_halvings);
    }

    #[test]
    fn delta_hat_examples() {
        let p = BacktrackParams::new(1.0, 0.5, 0.5);
        let (d, n) = delta_hat(&linear(1.0, 1.0, 1.0), &pt(&[0.0]), &p).unwrap();
        assert_eq!((d, n), (0.25, 2));

        let (d, _) = delta_hat(&linear(100.0, 1.0, 1.0), &pt(&[0.0]), &p).unwrap();
        assert_eq!(d, 1.0 / 128.0);

        let (d, n) = delta_hat(&linear(0.1, 0.1, 100.0), &pt(&[0.0]), &p).unwrap();
        assert_eq!((d, n), (1.0, 0));

        let none = half_square();
        assert!(matches!(delta_hat(&none, &pt(&[1.0]), &p), Err(Error::Config(_))));

        let tight = BacktrackParams {
            max_halvings: 3,
            ..p
        };
        assert!(matches!(
            delta_hat(&linear(1e6, 1.0, 1.0), &pt(&[0.0]), &tight),
            Err(Error::StepCollapse { .. })
        ));
    }

    #[test]
    fn gd_new_on_quadratic() {
        let quad = corpus_get("quadratic_form", &Params::new()).unwrap();
        let p = BacktrackParams::new(1.0, 0.5, 0.5);
        let out = gd_new_step(quad.as_ref(), &pt(&[1.0, 0.0]), &p).unwrap();
        assert_eq!(out.step_size, 0.25);
        assert_eq!(out.next, pt(&[0.75, 0.0]));
        assert_eq!(out.armijo_lhs, -0.21875);
        assert_eq!(out.armijo_rhs, -0.125);

        let out = gd_new_step(quad.as_ref(), &pt(&[0.0, 0.0]), &p).unwrap();
        assert_eq!(out.next, pt(&[0.0, 0.0]));
        assert_eq!(out.armijo_lhs, 0.0);
    }

    #[test]
    fn gd_new_on_example1_satisfies_both_conditions() {
        let obj = corpus_get("example1", &Params::new()).unwrap();
        let t = 1.0 / std::f64::consts::PI;
        let x = pt(&[t, t]);
        let p = BacktrackParams::new(1.0, 0.5, 0.5);
        let out = gd_new_step(obj.as_ref(), &x, &p).unwrap();
        let field = obj.lipschitz_field(&x).unwrap();
        let gn = obj.gradient(&x).norm();
        assert!(out.step_size < p.alpha / field.constant);
        assert!(out.step_size * gn < field.radius);
        assert!((&out.next - &x).norm() < field.radius);
    }

    #[test]
    fn gd_new_detects_invalid_field() {
        // Claims L = 1e-3 for a curvature-10 quadratic; the (1−α) bound must fail.
        let stiff = FnObjective::new("stiff", 1, |x: &Point| 5.0 * x[0] * x[0], |x: &Point| x * 10.0)
            .with_lipschitz_field(|_| LocalLipschitz {
                constant: 1e-3,
                radius: 1e9,
            });
        let p = BacktrackParams::new(1.0, 0.5, 0.5);
        assert!(matches!(
            gd_new_step(&stiff, &pt(&[1.0]), &p),
            Err(Error::InvariantViolation(_))
        ));
    }

    #[test]
    fn momentum_falls_back_when_combined_step_overshoots() {
        let p = BacktrackParams::new(1.0, 0.5, 0.5);
        let (out, v) = momentum_backtracking_step(&half_square(), &pt(&[1.0]), &pt(&[0.5]), 0.9, &p).unwrap();
        assert_eq!(out.next[0], 0.0);
        assert_eq!(v[0], 1.0);
    }

    #[test]
    fn momentum_with_zero_velocity_is_backtracking() {
        let p = BacktrackParams::new(1.0, 0.9, 0.5);
        let x = pt(&[1.0]);
        let plain = armijo_backtrack(&half_square(), &x, &p).unwrap();
        let (m, _) = momentum_backtracking_step(&half_square(), &x, &pt(&[0.0]), 0.7, &p).unwrap();
        let (n, _) = nag_backtracking_step(&half_square(), &x, &pt(&[0.0]), 0.7, &p).unwrap();
        assert_eq!(m, plain);
        assert_eq!(n, plain);
        let (m0, _) = momentum_backtracking_step(&half_square(), &x, &pt(&[0.3]), 0.0, &p).unwrap();
        assert_eq!(m0, plain);
    }

    #[test]
    fn nag_lookahead_example() {
        // Look-ahead 1 − 0.5·0.2 = 0.9, ∇f = 0.9, δ = 1: v′ = 0.1 + 0.9 = 1, next = 0,
        // f(0) − f(1) = −0.5 ≤ −0.5 holds, so the combined step is accepted.
        let p = BacktrackParams::new(1.0, 0.5, 0.5);
        let (out, v) = nag_backtracking_step(&half_square(), &pt(&[1.0]), &pt(&[0.2]), 0.5, &p).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15);
        assert!(out.next[0].abs() < 1e-15);
        assert!(out.armijo_lhs <= out.armijo_rhs);
    }

    #[test]
    fn momentum_rejects_bad_inputs() {
        let p = BacktrackParams::default();
        let x = pt(&[1.0]);
        assert!(momentum_backtracking_step(&half_square(), &x, &pt(&[0.0]), 1.0, &p).is_err());
        assert!(momentum_backtracking_step(&half_square(), &x, &pt(&[0.0, 1.0]), 0.5, &p).is_err());
        assert!(nag_backtracking_step(&half_square(), &x, &pt(&[f64::NAN]), 0.5, &p).is_err());
    }

    #[test]
    fn params_validation() {
        for bad in [
            BacktrackParams::new(0.0, 0.5, 0.5),
            BacktrackParams::new(1.0, 1.0, 0.5),
            BacktrackParams::new(1.0, 0.5, 0.0),
            BacktrackParams {
                max_halvings: 0,
                ..BacktrackParams::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
