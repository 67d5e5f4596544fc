//! Smooth step-size function `h(x)` glued from local Lipschitz data by a
//! partition of unity, and the continuous descent map `H(x) = x − h(x)∇f(x)`.
//!
//! The construction is restricted to an axis-aligned box. Balls
//! `B(z_j, r_j)` centred on a regular grid cover the box; each carries a
//! gradient Lipschitz constant `L_j`. With bumps `b_j` and `φ_j = b_j / Σ_i b_i`,
//!
//! ```text
//! h(x) = Σ_j  d_j · φ_j(x) · min{1/(2 L_j), δ0, 1}
//! ```
//!
//! where the damping `d_j` is `1 / (10^j (M_j + 1))` (faithful mode, `j` in
//! row-major grid order starting at 1) or `1 / (9 K (M_j + 1))` (practical
//! mode, `K` bounding the number of balls meeting any `r/4`-neighbourhood).
//! `M_j` bounds `‖∇φ_j‖ · ‖∇f‖` on ball `j`. Both choices keep
//! `Σ_j d_j M_j ≤ 1/9`, which gives the injectivity margin
//! `‖H(y₁) − H(y₂)‖ ≥ (2/9) ‖y₁ − y₂‖` for nearby pairs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{fmt_point, Error, Result};
use crate::io::{check_schema, to_json};
use crate::objective::{checked_gradient, ensure_finite, Objective, Point};
use crate::sampling::{rng_for, uniform_in_ball, uniform_in_box};
use crate::steppers::{descent_slack, StepOutcome};

pub const SMOOTHRATE_SCHEMA: &str = "smoothrate/1";

/// Partition denominators below this are treated as holes in the cover.
const MIN_DENOMINATOR: f64 = 1e-15;

/// Faithful damping `10^-j` underflows past this many balls.
const MAX_FAITHFUL_BALLS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    /// Accepts degenerate axes (`lower == upper`); see [`BoxBounds::is_degenerate`].
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Config(format!(
                "box bounds need equal, non-zero lengths (got {} and {})",
                lower.len(),
                upper.len()
            )));
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::Config(format!("invalid box axis [{lo}, {hi}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower.iter().zip(&self.upper).any(|(lo, hi)| lo >= hi)
    }

    pub fn contains(&self, x: &Point) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| hi - lo).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingMode {
    Faithful,
    Practical,
}

impl DampingMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DampingMode::Faithful => "faithful",
            DampingMode::Practical => "practical",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "faithful" => Ok(DampingMode::Faithful),
            "practical" => Ok(DampingMode::Practical),
            other => Err(Error::Config(format!("unknown damping mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzSource {
    Analytic,
    Sampled,
}

#[derive(Debug, Clone, Copy)]
pub struct CoveringOptions {
    /// Armijo coefficient the adjusted constants must support.
    pub alpha: f64,
    pub lipschitz_samples: usize,
    pub safety: f64,
    pub seed: u64,
}

impl Default for CoveringOptions {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            lipschitz_samples: 1000,
            safety: 1.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covering {
    pub bounds: BoxBounds,
    pub spacing: f64,
    pub grid_shape: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    /// Lipschitz constants of `∇f` on each ball.
    pub raw_lipschitz: Vec<f64>,
    /// `max(L/(2(1−α)), L)`: every `δ ≤ 1/L_j` then satisfies Armijo on ball `j`.
    pub local_lipschitz: Vec<f64>,
    pub lipschitz_source: LipschitzSource,
}

impl Covering {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn center(&self, j: usize) -> Point {
        Point::from_row_slice(&self.centers[j])
    }
}

fn grid_axis(lo: f64, hi: f64, spacing: f64) -> Vec<f64> {
    let width = hi - lo;
    let intervals = ((width / spacing) - 1e-9).ceil().max(1.0) as usize;
    (0..=intervals)
        .map(|i| {
            if i == intervals {
                hi
            } else {
                lo + width * (i as f64) / (intervals as f64)
            }
        })
        .collect()
}

/// Sampled Lipschitz estimate of `∇f` on `B(center, radius)`:
/// `safety · max ‖∇f(y) − ∇f(z)‖ / ‖y − z‖` over random pairs, raised to the
/// largest sampled Hessian operator norm when an analytic Hessian exists.
pub fn estimate_local_lipschitz(
    obj: &dyn Objective,
    center: &Point,
    radius: f64,
    n_samples: usize,
    safety: f64,
    seed: u64,
) -> Result<f64> {
    if !(radius > 0.0) || !(safety >= 1.0) || n_samples == 0 {
        return Err(Error::Config(format!(
            "need radius > 0, safety >= 1 and samples > 0 (got {radius}, {safety}, {n_samples})"
        )));
    }
    ensure_finite(center)?;
    let mut rng = rng_for(seed, 0x4c49_5053);
    let mut best: f64 = 0.0;
    for _ in 0..n_samples {
        let y = uniform_in_ball(&mut rng, center, radius);
        let z = uniform_in_ball(&mut rng, center, radius);
        let gy = checked_gradient(obj, &y)?;
        let gz = checked_gradient(obj, &z)?;
        let d = (&y - &z).norm();
        if d > 0.0 {
            best = best.max((gy - gz).norm() / d);
        }
        for p in [&y, &z] {
            if let Some(h) = obj.hessian(p) {
                let op = nalgebra::SymmetricEigen::new(h).eigenvalues.amax();
                best = best.max(op);
            }
        }
    }
    Ok((safety * best).max(f64::MIN_POSITIVE))
}

/// Regular-grid covering of `bounds` with balls of radius `spacing·√k`.
pub fn build_covering(
    obj: &dyn Objective,
    bounds: &BoxBounds,
    spacing: f64,
    opts: &CoveringOptions,
) -> Result<Covering> {
    if bounds.dim() != obj.dim() {
        return Err(Error::Config(format!(
            "box has dimension {}, objective has {}",
            bounds.dim(),
            obj.dim()
        )));
    }
    if bounds.is_degenerate() {
        return Err(Error::Config("covering box is empty or degenerate".into()));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::Config(format!("spacing must be positive, got {spacing}")));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0,1), got {}", opts.alpha)));
    }
    let k = bounds.dim();
    let axes: Vec<Vec<f64>> = (0..k)
        .map(|i| grid_axis(bounds.lower[i], bounds.upper[i], spacing))
        .collect();
    let grid_shape: Vec<usize> = axes.iter().map(Vec::len).collect();
    let total: usize = grid_shape.iter().product();
    if total > 1_000_000 {
        return Err(Error::Config(format!("grid of {total} balls is too large")));
    }

    // Row-major: the last axis varies fastest.
    let mut centers = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut c = vec![0.0; k];
        for i in (0..k).rev() {
            c[i] = axes[i][rem % grid_shape[i]];
            rem /= grid_shape[i];
        }
        centers.push(c);
    }
    let radius = spacing * (k as f64).sqrt();
    for c in &centers {
        let z = Point::from_row_slice(c);
        let d = obj.nonsmooth_distance(&z);
        if !(d > radius) {
            return Err(Error::NonSmoothBox(format!(
                "ball around {} of radius {radius} comes within {d:e} of the non-smooth locus",
                fmt_point(c)
            )));
        }
    }

    let analytic = obj
        .lipschitz_on_ball(&Point::from_row_slice(&centers[0]), radius)
        .is_some();
    let raw_lipschitz: Vec<f64> = centers
        .par_iter()
        .enumerate()
        .map(|(j, c)| {
            let z = Point::from_row_slice(c);
            if analytic {
                obj.lipschitz_on_ball(&z, radius).ok_or_else(|| {
                    Error::NonSmoothBox(format!("no Lipschitz bound on ball around {}", fmt_point(c)))
                })
            } else {
                estimate_local_lipschitz(
                    obj,
                    &z,
                    radius,
                    opts.lipschitz_samples,
                    opts.safety,
                    opts.seed.wrapping_add(j as u64),
                )
            }
        })
        .collect::<Result<_>>()?;
    let local_lipschitz = raw_lipschitz
        .iter()
        .map(|&l| (l / (2.0 * (1.0 - opts.alpha))).max(l))
        .collect();

    Ok(Covering {
        bounds: bounds.clone(),
        spacing,
        grid_shape,
        radii: vec![radius; total],
        centers,
        raw_lipschitz,
        local_lipschitz,
        lipschitz_source: if analytic {
            LipschitzSource::Analytic
        } else {
            LipschitzSource::Sampled
        },
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SmoothRateOptions {
    pub delta0: f64,
    pub alpha: f64,
    pub mj_samples: usize,
    pub safety: f64,
    pub mode: DampingMode,
    pub seed: u64,
}

impl Default for SmoothRateOptions {
    fn default() -> Self {
        Self {
            delta0: 1.0,
            alpha: 0.5,
            mj_samples: 1000,
            safety: 1.5,
            mode: DampingMode::Faithful,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothRate {
    pub covering: Covering,
    pub mj: Vec<f64>,
    /// Per-ball weight `d_j · min{1/(2L_j), δ0, 1}`.
    pub coefficients: Vec<f64>,
    pub delta0: f64,
    pub alpha: f64,
    pub mode: DampingMode,
    /// Overlap bound `K` used by practical damping.
    pub overlap: usize,
    pub mj_samples: usize,
    pub safety: f64,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct SmoothRateDocument {
    schema: String,
    #[serde(flatten)]
    rate: SmoothRate,
}

/// Bump value and the gradient factor `db/d(x−z) = factor · (x − z)`.
fn bump(x: &Point, center: &[f64], radius: f64) -> (f64, f64) {
    let r2 = radius * radius;
    let t2 = x
        .iter()
        .zip(center)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / r2;
    if t2 >= 1.0 {
        return (0.0, 0.0);
    }
    let s = 1.0 - t2;
    let b = (-1.0 / s).exp();
    (b, b * (-2.0 / (s * s)) / r2)
}

impl SmoothRate {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: serde_json::Value = serde_json::from_str(text)?;
        check_schema(&doc, SMOOTHRATE_SCHEMA)?;
        let doc: SmoothRateDocument = serde_json::from_value(doc)?;
        Ok(doc.rate)
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(&SmoothRateDocument {
            schema: SMOOTHRATE_SCHEMA.to_string(),
            rate: self.clone(),
        })
    }

    pub fn bounds(&self) -> &BoxBounds {
        &self.covering.bounds
    }

    /// All partition weights `φ_j(x)`; `x` must lie in the box.
    pub fn partition(&self, x: &Point) -> Result<Vec<f64>> {
        let (bumps, sum) = self.bumps(x)?;
        Ok(bumps.into_iter().map(|b| b / sum).collect())
    }

    fn bumps(&self, x: &Point) -> Result<(Vec<f64>, f64)> {
        if !self.covering.bounds.contains(x) {
            return Err(Error::OutsideBox {
                point: fmt_point(x.as_slice()),
            });
        }
        let cov = &self.covering;
        let bumps: Vec<f64> = (0..cov.len())
            .map(|j| bump(x, &cov.centers[j], cov.radii[j]).0)
            .collect();
        let sum: f64 = bumps.iter().sum();
        if !(sum >= MIN_DENOMINATOR) {
            return Err(Error::CoveringGap {
                point: fmt_point(x.as_slice()),
                denominator: sum,
            });
        }
        Ok((bumps, sum))
    }

    /// `∇φ_j(x)` for a single `j`, at any `x` where the bump sum is positive.
    fn partition_gradient(&self, x: &Point, j: usize) -> Option<Point> {
        let cov = &self.covering;
        let k = x.len();
        let mut sum = 0.0;
        let mut grad_sum = Point::zeros(k);
        let mut bj = 0.0;
        let mut grad_bj = Point::zeros(k);
        for i in 0..cov.len() {
            let (b, factor) = bump(x, &cov.centers[i], cov.radii[i]);
            if b == 0.0 {
                continue;
            }
            let g = (x - Point::from_row_slice(&cov.centers[i])) * factor;
            sum += b;
            grad_sum += &g;
            if i == j {
                bj = b;
                grad_bj = g;
            }
        }
        if !(sum >= MIN_DENOMINATOR) {
            return None;
        }
        Some((grad_bj * sum - grad_sum * bj) / (sum * sum))
    }

    /// The step size `h(x)`, `0 < h(x) ≤ δ0` on the box.
    pub fn eval_h(&self, x: &Point) -> Result<f64> {
        let (bumps, sum) = self.bumps(x)?;
        let weighted: f64 = bumps
            .iter()
            .zip(&self.coefficients)
            .map(|(b, c)| b * c)
            .sum();
        Ok(weighted / sum)
    }

    /// `H(x) = x − h(x)∇f(x)` without the Armijo re-check or box-exit test.
    pub fn map(&self, obj: &dyn Objective, x: &Point) -> Result<Point> {
        let h = self.eval_h(x)?;
        Ok(x - checked_gradient(obj, x)? * h)
    }
}

fn overlap_bound(cov: &Covering) -> usize {
    // Lattice points within distance 1.25·r of any point, counted per axis.
    let k = cov.bounds.dim();
    let widths = cov.bounds.widths();
    let radius = cov.radii[0];
    (0..k)
        .map(|i| {
            let n = cov.grid_shape[i];
            if n < 2 {
                return 1;
            }
            let step = widths[i] / (n - 1) as f64;
            ((2.5 * radius / step).floor() as usize + 1).min(n)
        })
        .product()
}

/// Builds `h` from a covering; `M_j` is sampled with `mj_samples` points per ball.
pub fn build_smooth_rate(obj: &dyn Objective, cov: &Covering, opts: &SmoothRateOptions) -> Result<SmoothRate> {
    if !(opts.delta0 > 0.0) {
        return Err(Error::Config(format!("delta0 must be positive, got {}", opts.delta0)));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0,1), got {}", opts.alpha)));
    }
    if opts.mj_samples == 0 || !(opts.safety >= 1.0) {
        return Err(Error::Config("mj_samples must be positive and safety >= 1".into()));
    }
    if cov.is_empty() {
        return Err(Error::Config("empty covering".into()));
    }
    if opts.mode == DampingMode::Faithful && cov.len() > MAX_FAITHFUL_BALLS {
        return Err(Error::Config(format!(
            "faithful damping with {} balls underflows; use practical mode or a coarser grid",
            cov.len()
        )));
    }
    let mut sr = SmoothRate {
        covering: cov.clone(),
        mj: vec![0.0; cov.len()],
        coefficients: vec![0.0; cov.len()],
        delta0: opts.delta0,
        alpha: opts.alpha,
        mode: opts.mode,
        overlap: overlap_bound(cov),
        mj_samples: opts.mj_samples,
        safety: opts.safety,
        seed: opts.seed,
    };

    // Gap check on a lattice that includes every box corner.
    let k = cov.bounds.dim();
    let per_axis = 21usize.min((4096f64.powf(1.0 / k as f64)).floor().max(2.0) as usize);
    let widths = cov.bounds.widths();
    for flat in 0..per_axis.pow(k as u32) {
        let mut rem = flat;
        let x = Point::from_fn(k, |i, _| {
            let idx = rem % per_axis;
            rem /= per_axis;
            cov.bounds.lower[i] + widths[i] * idx as f64 / (per_axis - 1) as f64
        });
        sr.bumps(&x)?;
    }

    let mj: Vec<f64> = (0..cov.len())
        .into_par_iter()
        .map(|j| {
            let mut rng = rng_for(opts.seed.wrapping_add(j as u64), 0x4d4a);
            let z = cov.center(j);
            let r = cov.radii[j];
            let mut max_phi: f64 = 0.0;
            let mut max_grad: f64 = 0.0;
            let mut taken = 0;
            while taken < opts.mj_samples {
                let y = uniform_in_ball(&mut rng, &z, r);
                max_grad = max_grad.max(checked_gradient(obj, &y)?.norm());
                if !cov.bounds.contains(&y) {
                    continue;
                }
                taken += 1;
                if let Some(g) = sr.partition_gradient(&y, j) {
                    max_phi = max_phi.max(g.norm());
                }
            }
            Ok(opts.safety * max_phi * opts.safety * max_grad)
        })
        .collect::<Result<_>>()?;

    let overlap = sr.overlap as f64;
    let coefficients = (0..cov.len())
        .map(|j| {
            let base = (0.5 / cov.local_lipschitz[j]).min(opts.delta0).min(1.0);
            let damping = match opts.mode {
                DampingMode::Faithful => 10f64.powi(-(j as i32 + 1)) / (mj[j] + 1.0),
                DampingMode::Practical => 1.0 / (9.0 * overlap * (mj[j] + 1.0)),
            };
            damping * base
        })
        .collect();
    sr.mj = mj;
    sr.coefficients = coefficients;
    Ok(sr)
}

/// Free-standing form of [`SmoothRate::eval_h`].
pub fn eval_h(sr: &SmoothRate, x: &Point) -> Result<f64> {
    sr.eval_h(x)
}

/// One step of the continuous rule, re-checking
/// `f(H(x)) − f(x) ≤ −α h(x) ‖∇f(x)‖²`. Leaving the box is reported as
/// [`Error::OutsideBox`].
pub fn continuous_step(obj: &dyn Objective, sr: &SmoothRate, x: &Point) -> Result<StepOutcome> {
    ensure_finite(x)?;
    let h = sr.eval_h(x)?;
    let fx = obj.value(x);
    let g = checked_gradient(obj, x)?;
    let next = x - &g * h;
    let lhs = obj.value(&next) - fx;
    let rhs = -sr.alpha * h * g.norm_squared();
    if !(lhs <= rhs + descent_slack(fx)) {
        return Err(Error::InvariantViolation(format!(
            "continuous Armijo bound failed at {}: {lhs:e} > {rhs:e}",
            fmt_point(x.as_slice())
        )));
    }
    if !sr.bounds().contains(&next) {
        return Err(Error::OutsideBox {
            point: fmt_point(next.as_slice()),
        });
    }
    Ok(StepOutcome {
        next,
        step_size: h,
        backtracks: 0,
        armijo_lhs: lhs,
        armijo_rhs: rhs,
    })
}

/// Result of one named invariant check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub samples: usize,
    /// Worst observed value of the checked quantity, in the check's own units.
    pub worst: f64,
    pub point: Option<Vec<f64>>,
}

impl CheckOutcome {
    pub fn summary_line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let at = self
            .point
            .as_ref()
            .map(|p| format!(" at {}", fmt_point(p)))
            .unwrap_or_default();
        format!("{status} {} samples={} worst={:.6e}{at}", self.name, self.samples, self.worst)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub samples: usize,
    pub pairs: usize,
    pub smoothness_points: usize,
    pub lipschitz_pairs_per_ball: usize,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            samples: 10_000,
            pairs: 10_000,
            smoothness_points: 100,
            lipschitz_pairs_per_ball: 100,
            seed: 0,
        }
    }
}

/// Injectivity margin implied by the damping: `1 − 2/3 − 1/9`.
pub const INJECTIVITY_MARGIN: f64 = 2.0 / 9.0;

struct Tracker {
    name: &'static str,
    samples: usize,
    worst: f64,
    point: Option<Vec<f64>>,
    failed: bool,
}

impl Tracker {
    fn new(name: &'static str, initial: f64) -> Self {
        Self {
            name,
            samples: 0,
            worst: initial,
            point: None,
            failed: false,
        }
    }

    /// Records `value`; `worse` orders values, `ok` decides pass/fail.
    fn see(&mut self, x: &Point, value: f64, worse: bool, ok: bool) {
        self.samples += 1;
        if !ok && !self.failed {
            self.failed = true;
            self.worst = value;
            self.point = Some(x.as_slice().to_vec());
        } else if !self.failed && worse {
            self.worst = value;
            self.point = Some(x.as_slice().to_vec());
        }
    }

    fn finish(self) -> CheckOutcome {
        CheckOutcome {
            name: self.name.to_string(),
            passed: !self.failed,
            samples: self.samples,
            worst: self.worst,
            point: self.point,
        }
    }
}

/// Runs the pointwise invariants of a built step-size function: coverage,
/// per-ball Lipschitz validity, range, Armijo, partition sum, injectivity
/// margin and smoothness.
pub fn verify_smooth_rate(obj: &dyn Objective, sr: &SmoothRate, opts: &CheckOptions) -> Result<Vec<CheckOutcome>> {
    let cov = &sr.covering;
    let b = &cov.bounds;
    let mut rng = rng_for(opts.seed, 0x5652);

    let mut coverage = Tracker::new("coverage", 0.0);
    let mut range = Tracker::new("range", f64::INFINITY);
    let mut armijo = Tracker::new("armijo", f64::NEG_INFINITY);
    let mut partition = Tracker::new("partition", 0.0);
    for _ in 0..opts.samples {
        let x = uniform_in_box(&mut rng, &b.lower, &b.upper);
        let nearest = (0..cov.len())
            .map(|j| (&x - cov.center(j)).norm() / cov.radii[j])
            .fold(f64::INFINITY, f64::min);
        coverage.see(&x, nearest, nearest > coverage.worst, nearest < 1.0);

        let h = sr.eval_h(&x)?;
        range.see(&x, h, h < range.worst, h > 0.0 && h <= sr.delta0);

        let fx = obj.value(&x);
        let g = checked_gradient(obj, &x)?;
        let lhs = obj.value(&(&x - &g * h)) - fx;
        let excess = lhs + sr.alpha * h * g.norm_squared();
        armijo.see(&x, excess, excess > armijo.worst, excess <= descent_slack(fx));

        let dev = (sr.partition(&x)?.iter().sum::<f64>() - 1.0).abs();
        partition.see(&x, dev, dev > partition.worst, dev <= 1e-12);
    }

    let mut lipschitz = Tracker::new("lipschitz", 0.0);
    for j in 0..cov.len() {
        let mut brng = rng_for(opts.seed.wrapping_add(j as u64), 0x4c56);
        let z = cov.center(j);
        for _ in 0..opts.lipschitz_pairs_per_ball {
            let y1 = uniform_in_ball(&mut brng, &z, cov.radii[j]);
            let y2 = uniform_in_ball(&mut brng, &z, cov.radii[j]);
            let d = (&y1 - &y2).norm();
            if d == 0.0 {
                continue;
            }
            let ratio = (checked_gradient(obj, &y1)? - checked_gradient(obj, &y2)?).norm()
                / (d * cov.raw_lipschitz[j]);
            lipschitz.see(&y1, ratio, ratio > lipschitz.worst, ratio <= 1.0 + 1e-9);
        }
    }

    let mut injectivity = Tracker::new("injectivity", f64::INFINITY);
    let mut taken = 0;
    while taken < opts.pairs {
        let j = rng.random_range(0..cov.len());
        let z = cov.center(j);
        let r = cov.radii[j];
        let y1 = uniform_in_ball(&mut rng, &z, r);
        let y2 = uniform_in_ball(&mut rng, &y1, r / 4.0);
        if !b.contains(&y1) || !b.contains(&y2) || (&y2 - &z).norm() >= r {
            continue;
        }
        let d = (&y1 - &y2).norm();
        if d == 0.0 {
            continue;
        }
        taken += 1;
        let ratio = (sr.map(obj, &y1)? - sr.map(obj, &y2)?).norm() / d;
        injectivity.see(&y1, ratio, ratio < injectivity.worst, ratio >= INJECTIVITY_MARGIN);
    }

    let mut smoothness = Tracker::new("smoothness", 0.0);
    let margin = 1e-4;
    for _ in 0..opts.smoothness_points {
        let lo: Vec<f64> = b.lower.iter().map(|v| v + margin).collect();
        let hi: Vec<f64> = b.upper.iter().map(|v| v - margin).collect();
        let x = uniform_in_box(&mut rng, &lo, &hi);
        let coarse = fd_grad_h(sr, &x, 1e-5)?;
        let fine = fd_grad_h(sr, &x, 1e-6)?;
        let h = sr.eval_h(&x)?;
        let scale = fine.norm() + 1e-7 * h;
        let rel = (&coarse - &fine).norm() / scale;
        smoothness.see(&x, rel, rel > smoothness.worst, (&coarse - &fine).norm() <= 1e-3 * fine.norm() + 1e-7 * h);
    }

    Ok(vec![
        coverage.finish(),
        lipschitz.finish(),
        range.finish(),
        armijo.finish(),
        partition.finish(),
        injectivity.finish(),
        smoothness.finish(),
    ])
}

use rand::Rng;

fn fd_grad_h(sr: &SmoothRate, x: &Point, step: f64) -> Result<Point> {
    let mut g = Point::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let hp = sr.eval_h(&probe)?;
        probe[i] = x[i] - step;
        let hm = sr.eval_h(&probe)?;
        probe[i] = x[i];
        g[i] = (hp - hm) / (2.0 * step);
    }
    Ok(g)
}
