use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use super::{Objective, Params, Point};
use crate::error::{Error, Result};

pub const CORPUS_NAMES: [&str; 6] = [
    "example1",
    "example2",
    "power_abs",
    "quadratic_form",
    "double_well",
    "rosenbrock",
];

/// Coordinates closer to zero than this are treated as lying on the axis.
const AXIS_EPS: f64 = 1e-300;

/// Radius used where the gradient is globally Lipschitz.
const GLOBAL_RADIUS: f64 = 1e10;

/// Builds a corpus member by name.
///
/// Unknown parameter keys are rejected so that typos in configs surface early.
pub fn corpus_get(name: &str, params: &Params) -> Result<Arc<dyn Objective>> {
    match name {
        "example1" => {
            check_keys(name, params, &[])?;
            Ok(Arc::new(OscillatoryProduct::example1()))
        }
        "example2" => {
            check_keys(name, params, &["a", "b", "p", "q"])?;
            let a = get(params, "a", 1.0);
            let b = get(params, "b", 1.0);
            let p = get(params, "p", 3.0);
            let q = get(params, "q", 1.0);
            Ok(Arc::new(OscillatoryProduct::new(a, b, p, q)?))
        }
        "power_abs" => {
            check_keys(name, params, &["gamma"])?;
            Ok(Arc::new(PowerAbs::new(get(params, "gamma", 0.5))?))
        }
        "quadratic_form" => Ok(Arc::new(QuadraticForm::from_params(params)?)),
        "double_well" => {
            check_keys(name, params, &[])?;
            Ok(Arc::new(DoubleWell))
        }
        "rosenbrock" => {
            check_keys(name, params, &["a", "b"])?;
            Ok(Arc::new(Rosenbrock::new(
                get(params, "a", 1.0),
                get(params, "b", 100.0),
            )?))
        }
        other => Err(Error::UnknownObjective(other.to_string())),
    }
}

fn get(params: &Params, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn check_keys(name: &str, params: &Params, allowed: &[&str]) -> Result<()> {
    for (k, v) in params {
        if !allowed.contains(&k.as_str()) {
            return Err(invalid(name, format!("unknown parameter `{k}`")));
        }
        if !v.is_finite() {
            return Err(invalid(name, format!("parameter `{k}` is not finite")));
        }
    }
    Ok(())
}

fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParams {
        objective: name.to_string(),
        reason: reason.into(),
    }
}

/// `f(x) = ½ xᵀ A x` for a symmetric `A`.
///
/// Parameters: `dim` (default 2) and entries `m_i_j` (0-based). Missing entries
/// are 0, except that with no entries at all `A` is the identity.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    matrix: DMatrix<f64>,
    spectral_norm: f64,
}

impl QuadraticForm {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let name = "quadratic_form";
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(invalid(name, "matrix must be square and non-empty"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(invalid(name, "matrix entries must be finite"));
        }
        if (&matrix - matrix.transpose()).amax() > 0.0 {
            return Err(invalid(name, "matrix must be symmetric"));
        }
        let spectral_norm = SymmetricEigen::new(matrix.clone()).eigenvalues.amax();
        Ok(Self {
            matrix,
            spectral_norm,
        })
    }

    fn from_params(params: &Params) -> Result<Self> {
        let name = "quadratic_form";
        let dim = get(params, "dim", 2.0);
        if dim < 1.0 || dim.fract() != 0.0 || dim > 1024.0 {
            return Err(invalid(name, format!("dim must be a positive integer, got {dim}")));
        }
        let n = dim as usize;
        let mut entries = Vec::new();
        for (k, &v) in params {
            if k == "dim" {
                continue;
            }
            let idx: Vec<&str> = k.split('_').collect();
            let parsed = match idx.as_slice() {
                ["m", i, j] => i.parse::<usize>().ok().zip(j.parse::<usize>().ok()),
                _ => None,
            };
            let Some((i, j)) = parsed else {
                return Err(invalid(name, format!("unknown parameter `{k}`")));
            };
            if i >= n || j >= n {
                return Err(invalid(name, format!("entry `{k}` out of range for dim {n}")));
            }
            if !v.is_finite() {
                return Err(invalid(name, format!("entry `{k}` is not finite")));
            }
            entries.push((i, j, v));
        }
        let mut m = if entries.is_empty() {
            DMatrix::identity(n, n)
        } else {
            DMatrix::zeros(n, n)
        };
        for &(i, j, v) in &entries {
            if i != j {
                if let Some(&(_, _, w)) = entries.iter().find(|e| e.0 == j && e.1 == i) {
                    if w != v {
                        return Err(invalid(
                            name,
                            format!("m_{i}_{j}={v} and m_{j}_{i}={w} disagree"),
                        ));
                    }
                }
            }
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        Self::new(m)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl Objective for QuadraticForm {
    fn name(&self) -> &str {
        "quadratic_form"
    }

    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn value(&self, x: &Point) -> f64 {
        0.5 * x.dot(&(&self.matrix * x))
    }

    fn gradient(&self, x: &Point) -> Point {
        &self.matrix * x
    }

    fn hessian(&self, _x: &Point) -> Option<DMatrix<f64>> {
        Some(self.matrix.clone())
    }

    fn lipschitz_on_ball(&self, _center: &Point, _radius: f64) -> Option<f64> {
        Some(self.spectral_norm.max(f64::MIN_POSITIVE))
    }

    fn lipschitz_radius(&self, _x: &Point) -> Option<f64> {
        Some(GLOBAL_RADIUS)
    }
}

/// `f(x, y) = x⁴/4 − x²/2 + y²/2`: saddle at the origin, minima at `(±1, 0)`.
#[derive(Debug, Clone, Copy)]
pub struct DoubleWell;

impl Objective for DoubleWell {
    fn name(&self) -> &str {
        "double_well"
    }

    fn dim(&self) -> usize {
        2
    }

    fn value(&self, p: &Point) -> f64 {
        let (x, y) = (p[0], p[1]);
        0.25 * x.powi(4) - 0.5 * x * x + 0.5 * y * y
    }

    fn gradient(&self, p: &Point) -> Point {
        let (x, y) = (p[0], p[1]);
        Point::from_vec(vec![x * x * x - x, y])
    }

    fn hessian(&self, p: &Point) -> Option<DMatrix<f64>> {
        let x = p[0];
        Some(DMatrix::from_row_slice(2, 2, &[3.0 * x * x - 1.0, 0.0, 0.0, 1.0]))
    }

    fn lipschitz_on_ball(&self, c: &Point, r: f64) -> Option<f64> {
        // ∇²f = diag(3x² − 1, 1); |3x² − 1| ≤ max(3(|x| + r)² − 1, 1) on the ball.
        let xm = c[0].abs() + r;
        Some((3.0 * xm * xm - 1.0).max(1.0))
    }

    fn lipschitz_radius(&self, _x: &Point) -> Option<f64> {
        Some(1.0)
    }
}

/// `f(x) = |x|^{1+γ}` on the line, `0 < γ < 1`.
#[derive(Debug, Clone, Copy)]
pub struct PowerAbs {
    gamma: f64,
}

impl PowerAbs {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(invalid("power_abs", format!("gamma must lie in (0,1), got {gamma}")));
        }
        Ok(Self { gamma })
    }
}

impl Objective for PowerAbs {
    fn name(&self) -> &str {
        "power_abs"
    }

    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &Point) -> f64 {
        x[0].abs().powf(1.0 + self.gamma)
    }

    fn gradient(&self, x: &Point) -> Point {
        let t = x[0];
        let d = if t == 0.0 {
            0.0
        } else {
            (1.0 + self.gamma) * t.signum() * t.abs().powf(self.gamma)
        };
        Point::from_vec(vec![d])
    }

    fn hessian(&self, x: &Point) -> Option<DMatrix<f64>> {
        let t = x[0].abs();
        if t < AXIS_EPS {
            return None;
        }
        let g = self.gamma;
        Some(DMatrix::from_element(1, 1, (1.0 + g) * g * t.powf(g - 1.0)))
    }

    fn lipschitz_on_ball(&self, c: &Point, r: f64) -> Option<f64> {
        // f'' is decreasing in |t|, so its supremum on the ball sits at |t| = |c| − r.
        let lo = c[0].abs() - r;
        if !(lo > 0.0) {
            return None;
        }
        let g = self.gamma;
        Some((1.0 + g) * g * lo.powf(g - 1.0))
    }

    fn lipschitz_radius(&self, x: &Point) -> Option<f64> {
        let t = x[0].abs();
        (t >= AXIS_EPS).then_some(0.5 * t)
    }

    fn nonsmooth_distance(&self, x: &Point) -> f64 {
        x[0].abs()
    }
}

/// `f(x, y) = (a − x)² + b (y − x²)²`.
#[derive(Debug, Clone, Copy)]
pub struct Rosenbrock {
    a: f64,
    b: f64,
}

impl Rosenbrock {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(b > 0.0) {
            return Err(invalid("rosenbrock", format!("b must be positive, got {b}")));
        }
        Ok(Self { a, b })
    }
}

impl Objective for Rosenbrock {
    fn name(&self) -> &str {
        "rosenbrock"
    }

    fn dim(&self) -> usize {
        2
    }

    fn value(&self, p: &Point) -> f64 {
        let (x, y) = (p[0], p[1]);
        (self.a - x).powi(2) + self.b * (y - x * x).powi(2)
    }

    fn gradient(&self, p: &Point) -> Point {
        let (x, y) = (p[0], p[1]);
        let r = y - x * x;
        Point::from_vec(vec![
            -2.0 * (self.a - x) - 4.0 * self.b * x * r,
            2.0 * self.b * r,
        ])
    }

    fn hessian(&self, p: &Point) -> Option<DMatrix<f64>> {
        let (x, y) = (p[0], p[1]);
        let b = self.b;
        let hxy = -4.0 * b * x;
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[2.0 - 4.0 * b * y + 12.0 * b * x * x, hxy, hxy, 2.0 * b],
        ))
    }

    fn lipschitz_on_ball(&self, c: &Point, r: f64) -> Option<f64> {
        // Frobenius bound on the Hessian entries over the ball.
        let xm = c[0].abs() + r;
        let ym = c[1].abs() + r;
        let b = self.b;
        let h11 = 2.0 + 4.0 * b * ym + 12.0 * b * xm * xm;
        let h12 = 4.0 * b * xm;
        let h22 = 2.0 * b;
        Some((h11 * h11 + 2.0 * h12 * h12 + h22 * h22).sqrt())
    }

    fn lipschitz_radius(&self, _x: &Point) -> Option<f64> {
        Some(1.0)
    }
}

/// `f(x, y) = a·xᵖ sin^q(1/x) + b·yᵖ sin^q(1/y)`, extended by 0 on the axes.
///
/// With `a = b = 1, p = 3, q = 1` this is `x³ sin(1/x) + y³ sin(1/y)`, which is
/// C¹ everywhere, C² off the axes, and whose gradient is not locally Lipschitz
/// at any axis point.
#[derive(Debug, Clone, Copy)]
pub struct OscillatoryProduct {
    a: f64,
    b: f64,
    p: i32,
    q: i32,
    /// Use the coarse Hessian bound `6(|x|+|y|) + 8 + 1/|x| + 1/|y|`.
    coarse_bound: bool,
    name: &'static str,
}

impl OscillatoryProduct {
    pub fn example1() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            p: 3,
            q: 1,
            coarse_bound: true,
            name: "example1",
        }
    }

    pub fn new(a: f64, b: f64, p: f64, q: f64) -> Result<Self> {
        let name = "example2";
        if p.fract() != 0.0 || !(3.0..=64.0).contains(&p) {
            return Err(invalid(name, format!("p must be an integer >= 3, got {p}")));
        }
        if q.fract() != 0.0 || !(1.0..=64.0).contains(&q) {
            return Err(invalid(name, format!("q must be an integer >= 1, got {q}")));
        }
        Ok(Self {
            a,
            b,
            p: p as i32,
            q: q as i32,
            coarse_bound: false,
            name,
        })
    }

    fn coef(&self, i: usize) -> f64 {
        if i == 0 {
            self.a
        } else {
            self.b
        }
    }

    fn g(&self, t: f64) -> f64 {
        if t.abs() < AXIS_EPS {
            return 0.0;
        }
        t.powi(self.p) * (1.0 / t).sin().powi(self.q)
    }

    fn dg(&self, t: f64) -> f64 {
        if t.abs() < AXIS_EPS {
            return 0.0;
        }
        let (p, q) = (self.p, self.q);
        let (s, c) = (1.0 / t).sin_cos();
        p as f64 * t.powi(p - 1) * s.powi(q) - q as f64 * t.powi(p - 2) * s.powi(q - 1) * c
    }

    fn d2g(&self, t: f64) -> f64 {
        let (p, q) = (self.p, self.q);
        let (pf, qf) = (p as f64, q as f64);
        let (s, c) = (1.0 / t).sin_cos();
        let mut v = pf * (pf - 1.0) * t.powi(p - 2) * s.powi(q)
            - 2.0 * qf * (pf - 1.0) * t.powi(p - 3) * s.powi(q - 1) * c
            - qf * t.powi(p - 4) * s.powi(q);
        if q >= 2 {
            v += qf * (qf - 1.0) * t.powi(p - 4) * s.powi(q - 2) * c * c;
        }
        v
    }

    /// Sup of |g''| over `|t| ∈ [lo, hi]`, from `|sin|, |cos| ≤ 1` termwise.
    fn d2g_bound(&self, lo: f64, hi: f64) -> f64 {
        let (pf, qf) = (self.p as f64, self.q as f64);
        let terms = [
            (pf * (pf - 1.0), self.p - 2),
            (2.0 * qf * (pf - 1.0), self.p - 3),
            (qf * (qf - 1.0) + qf, self.p - 4),
        ];
        terms
            .iter()
            .map(|&(k, e)| k * lo.powi(e).max(hi.powi(e)))
            .sum()
    }
}

impl Objective for OscillatoryProduct {
    fn name(&self) -> &str {
        self.name
    }

    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &Point) -> f64 {
        self.a * self.g(x[0]) + self.b * self.g(x[1])
    }

    fn gradient(&self, x: &Point) -> Point {
        Point::from_vec(vec![self.a * self.dg(x[0]), self.b * self.dg(x[1])])
    }

    fn hessian(&self, x: &Point) -> Option<DMatrix<f64>> {
        if x.iter().any(|t| t.abs() < AXIS_EPS) {
            return None;
        }
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[self.a * self.d2g(x[0]), 0.0, 0.0, self.b * self.d2g(x[1])],
        ))
    }

    fn lipschitz_on_ball(&self, c: &Point, r: f64) -> Option<f64> {
        let lo: Vec<f64> = c.iter().map(|t| t.abs() - r).collect();
        if lo.iter().any(|&v| !(v > 0.0)) {
            return None;
        }
        let hi: Vec<f64> = c.iter().map(|t| t.abs() + r).collect();
        if self.coarse_bound {
            // 6(|x|+|y|) + 8 + 1/|x| + 1/|y|, each term at its worst point of the ball.
            Some(6.0 * (hi[0] + hi[1]) + 8.0 + 1.0 / lo[0] + 1.0 / lo[1])
        } else {
            Some(
                (0..2)
                    .map(|i| self.coef(i).abs() * self.d2g_bound(lo[i], hi[i]))
                    .sum::<f64>()
                    .max(f64::MIN_POSITIVE),
            )
        }
    }

    fn lipschitz_radius(&self, x: &Point) -> Option<f64> {
        let d = self.nonsmooth_distance(x);
        (d >= AXIS_EPS).then_some(0.5 * d)
    }

    fn nonsmooth_distance(&self, x: &Point) -> f64 {
        x.iter().map(|t| t.abs()).fold(f64::INFINITY, f64::min)
    }

    fn is_smooth_at(&self, x: &Point) -> bool {
        x.iter().all(|t| t.abs() >= AXIS_EPS)
    }
}
