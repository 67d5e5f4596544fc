//! Evaluatable objectives, finite-difference fallbacks and the test-function corpus.
//!
//! An [`Objective`] exposes `f`, `∇f` and optionally `∇²f` together with the
//! local Lipschitz data used by the step rules: a radius `r(x)` and a constant
//! `L(x)` bounding the Lipschitz constant of `∇f` on the ball `B(x, r(x))`.

mod corpus;
mod fd;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{fmt_point, Error, Result};

pub use corpus::{
    corpus_get, DoubleWell, OscillatoryProduct, PowerAbs, QuadraticForm, Rosenbrock,
    CORPUS_NAMES,
};
pub use fd::{
    fd_gradient, fd_gradient_default, fd_hessian, fd_hessian_default, gradient_step,
    hessian_step, FdHessian,
};

pub type Point = DVector<f64>;

/// Map of family parameters keyed by stable names (`gamma`, `a`, `p`, `m_0_1`, ...).
pub type Params = std::collections::BTreeMap<String, f64>;

/// Local Lipschitz datum `(L(x), r(x))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalLipschitz {
    pub constant: f64,
    pub radius: f64,
}

pub trait Objective: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn value(&self, x: &Point) -> f64;

    fn gradient(&self, x: &Point) -> Point;

    /// Analytic Hessian. `None` when the family has none or `x` is not a C² point.
    fn hessian(&self, _x: &Point) -> Option<DMatrix<f64>> {
        None
    }

    /// A Lipschitz constant for `∇f` valid on the whole closed ball `B(center, radius)`.
    fn lipschitz_on_ball(&self, _center: &Point, _radius: f64) -> Option<f64> {
        None
    }

    /// The radius `r(x)` of the local Lipschitz field.
    fn lipschitz_radius(&self, _x: &Point) -> Option<f64> {
        None
    }

    fn lipschitz_field(&self, x: &Point) -> Option<LocalLipschitz> {
        let radius = self.lipschitz_radius(x)?;
        let constant = self.lipschitz_on_ball(x, radius)?;
        Some(LocalLipschitz { constant, radius })
    }

    /// Euclidean distance from `x` to the set where `∇f` fails to be locally Lipschitz.
    fn nonsmooth_distance(&self, _x: &Point) -> f64 {
        f64::INFINITY
    }

    fn is_smooth_at(&self, x: &Point) -> bool {
        self.nonsmooth_distance(x) > 0.0
    }
}

impl fmt::Debug for dyn Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Objective({}, dim={})", self.name(), self.dim())
    }
}

pub type SharedObjective = Arc<dyn Objective>;

pub fn ensure_finite(x: &Point) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Evaluation {
            what: format!("non-finite point {}", fmt_point(x.as_slice())),
        })
    }
}

/// Gradient evaluation that rejects non-finite output.
pub fn checked_gradient(obj: &dyn Objective, x: &Point) -> Result<Point> {
    let g = obj.gradient(x);
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::Evaluation {
            what: format!(
                "non-finite gradient component {i} at {}",
                fmt_point(x.as_slice())
            ),
        });
    }
    Ok(g)
}

pub fn checked_value(obj: &dyn Objective, x: &Point) -> Result<f64> {
    let v = obj.value(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation {
            what: format!("non-finite value at {}", fmt_point(x.as_slice())),
        })
    }
}

type ScalarFn = dyn Fn(&Point) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&Point) -> Point + Send + Sync;
type MatrixFn = dyn Fn(&Point) -> DMatrix<f64> + Send + Sync;
type FieldFn = dyn Fn(&Point) -> LocalLipschitz + Send + Sync;

/// Objective assembled from closures.
pub struct FnObjective {
    name: String,
    dim: usize,
    f: Box<ScalarFn>,
    grad: Box<VectorFn>,
    hess: Option<Box<MatrixFn>>,
    field: Option<Box<FieldFn>>,
}

impl FnObjective {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        f: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&Point) -> Point + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            f: Box::new(f),
            grad: Box::new(grad),
            hess: None,
            field: None,
        }
    }

    pub fn with_hessian(
        mut self,
        hess: impl Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.hess = Some(Box::new(hess));
        self
    }

    /// Attach a pointwise `(L(x), r(x))` field.
    pub fn with_lipschitz_field(
        mut self,
        field: impl Fn(&Point) -> LocalLipschitz + Send + Sync + 'static,
    ) -> Self {
        self.field = Some(Box::new(field));
        self
    }
}

impl Objective for FnObjective {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Point) -> f64 {
        (self.f)(x)
    }

    fn gradient(&self, x: &Point) -> Point {
        (self.grad)(x)
    }

    fn hessian(&self, x: &Point) -> Option<DMatrix<f64>> {
        self.hess.as_ref().map(|h| h(x))
    }

    fn lipschitz_field(&self, x: &Point) -> Option<LocalLipschitz> {
        self.field.as_ref().map(|fld| fld(x))
    }

    fn lipschitz_radius(&self, x: &Point) -> Option<f64> {
        self.lipschitz_field(x).map(|l| l.radius)
    }
}
