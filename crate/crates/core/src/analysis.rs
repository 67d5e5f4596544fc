//! Critical-point classification and checks on finished traces.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{fmt_point, Error, Result};
use crate::objective::{checked_gradient, ensure_finite, fd_hessian_default, Objective, Point};
use crate::steppers::{descent_slack, Trace};

pub const DEFAULT_GRAD_TOL: f64 = 1e-8;
/// Relative to the largest eigenvalue magnitude.
pub const DEFAULT_EIG_TOL: f64 = 1e-6;

/// Records used for the trend slopes in [`trajectory_diagnostics`].
const TREND_WINDOW: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CriticalPointKind {
    LocalMinimumLike,
    Saddle,
    GeneralisedSaddle,
    Degenerate,
    NotCritical,
}

impl CriticalPointKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CriticalPointKind::LocalMinimumLike => "LocalMinimumLike",
            CriticalPointKind::Saddle => "Saddle",
            CriticalPointKind::GeneralisedSaddle => "GeneralisedSaddle",
            CriticalPointKind::Degenerate => "Degenerate",
            CriticalPointKind::NotCritical => "NotCritical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointClass {
    pub kind: CriticalPointKind,
    /// Set whenever the Hessian has an eigenvalue below `−tol`, including every saddle.
    pub generalised_saddle: bool,
    /// Spectrum extremes; absent for non-critical points where no Hessian exists.
    pub min_eigenvalue: Option<f64>,
    pub max_eigenvalue: Option<f64>,
    pub grad_norm: f64,
}

/// Hessian at `x`: analytic when the objective has one, finite differences otherwise.
pub fn hessian_at(obj: &dyn Objective, x: &Point) -> Result<DMatrix<f64>> {
    if !obj.is_smooth_at(x) {
        return Err(Error::NotC2 {
            point: fmt_point(x.as_slice()),
        });
    }
    let h = match obj.hessian(x) {
        Some(h) => h,
        None => fd_hessian_default(obj, x)?.matrix,
    };
    if !h.iter().all(|v| v.is_finite()) {
        return Err(Error::NotC2 {
            point: fmt_point(x.as_slice()),
        });
    }
    Ok(h)
}

/// Labels `x` from `‖∇f(x)‖` and the Hessian spectrum. `eig_tol` is relative
/// to the largest eigenvalue magnitude.
pub fn classify_critical_point(
    obj: &dyn Objective,
    x: &Point,
    grad_tol: f64,
    eig_tol: f64,
) -> Result<CriticalPointClass> {
    if !(grad_tol > 0.0) || !(eig_tol > 0.0) {
        return Err(Error::Config(format!(
            "tolerances must be positive (grad_tol={grad_tol}, eig_tol={eig_tol})"
        )));
    }
    ensure_finite(x)?;
    let grad_norm = checked_gradient(obj, x)?.norm();
    if grad_norm > grad_tol {
        let spectrum = hessian_at(obj, x).ok().map(|h| extremes(&h));
        return Ok(CriticalPointClass {
            kind: CriticalPointKind::NotCritical,
            generalised_saddle: false,
            min_eigenvalue: spectrum.map(|s| s.0),
            max_eigenvalue: spectrum.map(|s| s.1),
            grad_norm,
        });
    }
    let h = hessian_at(obj, x)?;
    let eig = SymmetricEigen::new(h).eigenvalues;
    Ok(classify_spectrum(eig.as_slice(), grad_norm, eig_tol))
}

fn extremes(h: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(h.clone()).eigenvalues;
    (eig.min(), eig.max())
}

/// Classification of a critical point with the given Hessian eigenvalues.
pub fn classify_spectrum(eigenvalues: &[f64], grad_norm: f64, eig_tol: f64) -> CriticalPointClass {
    let lmin = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let lmax = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = eig_tol * scale;
    let negative = lmin < -tol;
    let nonsingular = eigenvalues.iter().all(|v| v.abs() > tol);
    let kind = if negative && lmax > tol && nonsingular {
        CriticalPointKind::Saddle
    } else if negative {
        CriticalPointKind::GeneralisedSaddle
    } else if lmin > tol {
        CriticalPointKind::LocalMinimumLike
    } else {
        CriticalPointKind::Degenerate
    };
    CriticalPointClass {
        kind,
        generalised_saddle: negative,
        min_eigenvalue: Some(lmin),
        max_eigenvalue: Some(lmax),
        grad_norm,
    }
}

/// Indices `n` of records whose successor breaks
/// `f(x_{n+1}) − f(x_n) ≤ −α δ_n ‖∇f(x_n)‖² + 1e−12 (1 + |f(x_n)|)`.
///
/// Only pairs of records for consecutive iterations are compared.
pub fn verify_armijo_trace(trace: &Trace, alpha: f64) -> Vec<usize> {
    trace
        .records
        .windows(2)
        .filter_map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let step = a.step?;
            if b.n != a.n + 1 {
                return None;
            }
            let bound = -alpha * step * a.grad_norm * a.grad_norm + descent_slack(a.f);
            (!(b.f - a.f <= bound)).then_some(a.n)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentLemmaEntry {
    pub delta: f64,
    pub lhs: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Checks `f(x − δ∇f(x)) − f(x) ≤ −δ(1 − δL/2)‖∇f(x)‖²` for each `δ`, with a
/// relative tolerance of `1e−10` plus the rounding error of the difference.
pub fn descent_lemma_check(obj: &dyn Objective, x: &Point, lipschitz: f64, deltas: &[f64]) -> Result<Vec<DescentLemmaEntry>> {
    if !(lipschitz > 0.0) {
        return Err(Error::Config(format!("L must be positive, got {lipschitz}")));
    }
    ensure_finite(x)?;
    let fx = obj.value(x);
    let g = checked_gradient(obj, x)?;
    let g2 = g.norm_squared();
    Ok(deltas
        .iter()
        .map(|&delta| {
            let lhs = obj.value(&(x - &g * delta)) - fx;
            let bound = -delta * (1.0 - delta * lipschitz / 2.0) * g2;
            let tol = 1e-10 * bound.abs().max(lhs.abs()) + 4.0 * f64::EPSILON * (1.0 + fx.abs());
            DescentLemmaEntry {
                delta,
                lhs,
                bound,
                holds: lhs <= bound + tol,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Least-squares slope of `ln ‖x_{n+1} − x_n‖` against `n` over the final records.
    pub step_norm_trend: Option<f64>,
    /// Same for `ln ‖x_n‖`.
    pub norm_trend: Option<f64>,
    pub final_step_norm: Option<f64>,
    pub final_norm: f64,
    pub f_monotone: bool,
    pub terminal_class: Option<CriticalPointClass>,
}

fn log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, v)| *v > 0.0 && v.is_finite())
        .map(|&(n, v)| (n, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Trends of step and iterate norms, a monotonicity flag for `f`, and the
/// class of the final point when `obj` is supplied and a Hessian exists there.
pub fn trajectory_diagnostics(trace: &Trace, obj: Option<&dyn Objective>) -> Diagnostics {
    let recs = &trace.records;
    let start = recs.len().saturating_sub(TREND_WINDOW);
    let window = &recs[start..];
    let steps: Vec<(f64, f64)> = window
        .windows(2)
        .map(|w| {
            let d: f64 = w[0].x.iter().zip(&w[1].x).map(|(a, b)| (a - b) * (a - b)).sum();
            (w[0].n as f64, d.sqrt())
        })
        .collect();
    let norms: Vec<(f64, f64)> = window
        .iter()
        .map(|r| (r.n as f64, r.x.iter().map(|v| v * v).sum::<f64>().sqrt()))
        .collect();
    let f_monotone = recs.windows(2).all(|w| w[1].f <= w[0].f);
    let last = trace.last();
    let terminal_class = obj.and_then(|o| {
        let x = Point::from_row_slice(&last.x);
        classify_critical_point(o, &x, DEFAULT_GRAD_TOL, DEFAULT_EIG_TOL).ok()
    });
    Diagnostics {
        step_norm_trend: log_slope(&steps),
        norm_trend: log_slope(&norms),
        final_step_norm: steps.last().map(|s| s.1),
        final_norm: norms.last().map(|s| s.1).unwrap_or(f64::NAN),
        f_monotone,
        terminal_class,
    }
}
