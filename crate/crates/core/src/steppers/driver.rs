use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    armijo_backtrack, gd_new_step, momentum_backtracking_step, nag_backtracking_step,
    standard_gd_step, two_way_backtrack, BacktrackParams, StepOutcome,
};
use crate::error::{Error, Result};
use crate::objective::{checked_gradient, ensure_finite, Objective, Point};
use crate::smoothrate::{continuous_step, SmoothRate};

pub const RULE_SELECTORS: [&str; 7] = [
    "standard",
    "backtracking",
    "two_way",
    "gd_new",
    "momentum_bt",
    "nag_bt",
    "continuous",
];

#[derive(Debug, Clone)]
pub enum Rule {
    /// Constant step `δ0`.
    Standard,
    Backtracking,
    TwoWay,
    GdNew,
    MomentumBt { gamma: f64 },
    NagBt { gamma: f64 },
    Continuous(Arc<SmoothRate>),
}

impl Rule {
    pub fn selector(&self) -> &'static str {
        match self {
            Rule::Standard => "standard",
            Rule::Backtracking => "backtracking",
            Rule::TwoWay => "two_way",
            Rule::GdNew => "gd_new",
            Rule::MomentumBt { .. } => "momentum_bt",
            Rule::NagBt { .. } => "nag_bt",
            Rule::Continuous(_) => "continuous",
        }
    }

    /// Coefficient `c` such that every step satisfies
    /// `f(x_{n+1}) − f(x_n) ≤ −c δ_n ‖∇f(x_n)‖²`, when the rule guarantees one.
    pub fn descent_coefficient(&self, p: &BacktrackParams) -> Option<f64> {
        match self {
            Rule::Standard => None,
            Rule::GdNew => Some(1.0 - p.alpha),
            Rule::Continuous(sr) => Some(sr.alpha),
            _ => Some(p.alpha),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub divergence_radius: f64,
    pub record_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            grad_tol: 1e-8,
            divergence_radius: 1e8,
            record_every: 1,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.record_every == 0 {
            return Err(Error::Config("max_iters and record_every must be positive".into()));
        }
        if !(self.grad_tol > 0.0) || !(self.divergence_radius > 0.0) {
            return Err(Error::Config(
                "grad_tol and divergence_radius must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    Diverged,
    StepCollapse,
    /// The continuous rule left the box its step-size function is built on.
    BoxExit,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::GradientTolerance => "GradientTolerance",
            StopReason::MaxIterations => "MaxIterations",
            StopReason::Diverged => "Diverged",
            StopReason::StepCollapse => "StepCollapse",
            StopReason::BoxExit => "BoxExit",
        }
    }
}

/// One recorded iterate. `step` is `None` on the final record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub n: usize,
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub step: Option<f64>,
    pub backtracks: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub rule: String,
    pub records: Vec<RecordEntry>,
    pub stop_reason: StopReason,
    pub detail: Option<String>,
    pub iterations: usize,
    pub descent_coefficient: Option<f64>,
}

impl Trace {
    pub fn last(&self) -> &RecordEntry {
        self.records.last().expect("a trace always holds its final record")
    }

    pub fn final_point(&self) -> Point {
        Point::from_row_slice(&self.last().x)
    }
}

struct RuleState {
    prev_step: f64,
    velocity: Point,
}

fn apply(
    obj: &dyn Objective,
    x: &Point,
    rule: &Rule,
    p: &BacktrackParams,
    state: &mut RuleState,
) -> Result<StepOutcome> {
    match rule {
        Rule::Standard => standard_gd_step(obj, x, p.delta0, p.alpha),
        Rule::Backtracking => armijo_backtrack(obj, x, p),
        Rule::TwoWay => {
            let out = two_way_backtrack(obj, x, state.prev_step, p)?;
            state.prev_step = out.step_size;
            Ok(out)
        }
        Rule::GdNew => gd_new_step(obj, x, p),
        Rule::MomentumBt { gamma } => {
            let (out, v) = momentum_backtracking_step(obj, x, &state.velocity, *gamma, p)?;
            state.velocity = v;
            Ok(out)
        }
        Rule::NagBt { gamma } => {
            let (out, v) = nag_backtracking_step(obj, x, &state.velocity, *gamma, p)?;
            state.velocity = v;
            Ok(out)
        }
        Rule::Continuous(sr) => continuous_step(obj, sr, x),
    }
}

/// Iterates `rule` from `x0` until a stopping condition fires.
///
/// Step collapse and leaving the step-size box end the trace with a stop
/// reason; configuration and invariant errors are returned as `Err`.
pub fn run(
    obj: &dyn Objective,
    x0: &Point,
    rule: &Rule,
    p: &BacktrackParams,
    rc: &RunConfig,
) -> Result<Trace> {
    p.validate()?;
    rc.validate()?;
    ensure_finite(x0)?;
    if x0.len() != obj.dim() {
        return Err(Error::Config(format!(
            "initial point has dimension {}, objective `{}` has {}",
            x0.len(),
            obj.name(),
            obj.dim()
        )));
    }
    let mut state = RuleState {
        prev_step: p.delta0,
        velocity: Point::zeros(x0.len()),
    };
    let mut records = Vec::new();
    let mut x = x0.clone();
    let mut n = 0usize;
    let record = |n: usize, x: &Point, f: f64, gn: f64, step: Option<f64>, bt: u32| RecordEntry {
        n,
        x: x.as_slice().to_vec(),
        f,
        grad_norm: gn,
        step,
        backtracks: bt,
    };

    let (stop_reason, detail) = loop {
        let fx = obj.value(&x);
        let diverged = !x.iter().all(|v| v.is_finite()) || x.norm() > rc.divergence_radius;
        if diverged {
            records.push(record(n, &x, fx, f64::NAN, None, 0));
            break (StopReason::Diverged, None);
        }
        let gn = checked_gradient(obj, &x)?.norm();
        if gn <= rc.grad_tol {
            records.push(record(n, &x, fx, gn, None, 0));
            break (StopReason::GradientTolerance, None);
        }
        if n >= rc.max_iters {
            records.push(record(n, &x, fx, gn, None, 0));
            break (StopReason::MaxIterations, None);
        }
        match apply(obj, &x, rule, p, &mut state) {
            Ok(out) => {
                if n % rc.record_every == 0 {
                    records.push(record(n, &x, fx, gn, Some(out.step_size), out.backtracks));
                }
                x = out.next;
                n += 1;
            }
            Err(Error::StepCollapse { halvings, context }) => {
                records.push(record(n, &x, fx, gn, None, halvings));
                let resolvable = p.alpha * p.delta0 * gn * gn > 8.0 * f64::EPSILON * (1.0 + fx.abs());
                let context = if resolvable {
                    context
                } else {
                    format!("{context}; required decrease is below the rounding resolution of f")
                };
                break (StopReason::StepCollapse, Some(context));
            }
            Err(e @ Error::OutsideBox { .. }) => {
                records.push(record(n, &x, fx, gn, None, 0));
                break (StopReason::BoxExit, Some(e.to_string()));
            }
            Err(e) => return Err(e),
        }
    };

    Ok(Trace {
        rule: rule.selector().to_string(),
        records,
        stop_reason,
        detail,
        iterations: n,
        descent_coefficient: rule.descent_coefficient(p),
    })
}
