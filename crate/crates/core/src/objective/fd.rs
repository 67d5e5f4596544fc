use nalgebra::DMatrix;

use super::{Objective, Point};
use crate::error::{fmt_point, Error, Result};

/// Default central-difference step for gradients at coordinate value `xi`.
pub fn gradient_step(xi: f64) -> f64 {
    1e-5 * xi.abs().max(1.0)
}

/// Default central-difference step for Hessians at coordinate value `xi`.
pub fn hessian_step(xi: f64) -> f64 {
    1e-4 * xi.abs().max(1.0)
}

/// Central-difference gradient with a fixed step `h` on every coordinate.
pub fn fd_gradient(obj: &dyn Objective, x: &Point, h: f64) -> Result<Point> {
    fd_gradient_with(obj, x, |_| h)
}

/// Central-difference gradient with the per-coordinate default steps.
pub fn fd_gradient_default(obj: &dyn Objective, x: &Point) -> Result<Point> {
    fd_gradient_with(obj, x, gradient_step)
}

fn fd_gradient_with(obj: &dyn Objective, x: &Point, step: impl Fn(f64) -> f64) -> Result<Point> {
    if !(x.iter().all(|v| v.is_finite())) {
        return Err(Error::Evaluation {
            what: format!("non-finite point {}", fmt_point(x.as_slice())),
        });
    }
    let mut g = Point::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let h = step(x[i]);
        if !(h > 0.0) {
            return Err(Error::Config(format!("finite-difference step must be positive, got {h}")));
        }
        probe[i] = x[i] + h;
        let fp = obj.value(&probe);
        probe[i] = x[i] - h;
        let fm = obj.value(&probe);
        probe[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::Evaluation {
                what: format!(
                    "non-finite f while differencing coordinate {i} at {}",
                    fmt_point(x.as_slice())
                ),
            });
        }
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

#[derive(Debug, Clone)]
pub struct FdHessian {
    pub matrix: DMatrix<f64>,
    /// Max |H_ij − H_ji| of the raw difference quotients, relative to max |H_ij|.
    pub asymmetry: f64,
}

pub fn fd_hessian(obj: &dyn Objective, x: &Point, h: f64) -> Result<FdHessian> {
    fd_hessian_with(obj, x, |_| h)
}

pub fn fd_hessian_default(obj: &dyn Objective, x: &Point) -> Result<FdHessian> {
    fd_hessian_with(obj, x, hessian_step)
}

fn fd_hessian_with(obj: &dyn Objective, x: &Point, step: impl Fn(f64) -> f64) -> Result<FdHessian> {
    let n = x.len();
    let mut raw = DMatrix::zeros(n, n);
    let mut probe = x.clone();
    for j in 0..n {
        let h = step(x[j]);
        probe[j] = x[j] + h;
        let gp = obj.gradient(&probe);
        probe[j] = x[j] - h;
        let gm = obj.gradient(&probe);
        probe[j] = x[j];
        for i in 0..n {
            let d = (gp[i] - gm[i]) / (2.0 * h);
            if !d.is_finite() {
                return Err(Error::Evaluation {
                    what: format!(
                        "non-finite gradient while differencing coordinate {j} at {}",
                        fmt_point(x.as_slice())
                    ),
                });
            }
            raw[(i, j)] = d;
        }
    }
    let scale = raw.amax().max(f64::MIN_POSITIVE);
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((raw[(i, j)] - raw[(j, i)]).abs());
        }
    }
    let asymmetry = asym / scale;
    if asymmetry > 1e-3 {
        log::warn!(
            "finite-difference Hessian asymmetric ({asymmetry:.3e}) at {}; point may not be C2",
            fmt_point(x.as_slice())
        );
    }
    let matrix = (&raw + raw.transpose()) * 0.5;
    Ok(FdHessian { matrix, asymmetry })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{corpus_get, Params};

    fn quad() -> std::sync::Arc<dyn Objective> {
        corpus_get("quadratic_form", &Params::new()).unwrap()
    }

    #[test]
    fn quadratic_gradient_is_exact() {
        let g = fd_gradient(quad().as_ref(), &Point::from_vec(vec![1.0, 1.0]), 1e-5).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-9 && (g[1] - 1.0).abs() < 1e-9);
        let g0 = fd_gradient(quad().as_ref(), &Point::zeros(2), 1e-5).unwrap();
        assert!(g0.norm() < 1e-9);
    }

    #[test]
    fn example1_first_coordinate_at_inverse_pi() {
        let obj = corpus_get("example1", &Params::new()).unwrap();
        let t = 1.0 / std::f64::consts::PI;
        let g = fd_gradient(obj.as_ref(), &Point::from_vec(vec![t, t]), 1e-6).unwrap();
        // 3t² sin(π) − t cos(π) = t
        assert!((g[0] - t).abs() < 1e-8, "{}", g[0]);
    }

    #[test]
    fn saddle_quadratic_hessian() {
        let mut p = Params::new();
        p.insert("m_0_0".into(), 1.0);
        p.insert("m_1_1".into(), -1.0);
        let obj = corpus_get("quadratic_form", &p).unwrap();
        for x in [[0.0, 0.0], [1.5, -2.0]] {
            let h = fd_hessian(obj.as_ref(), &Point::from_row_slice(&x), 1e-4).unwrap();
            let want = DMatrix::from_diagonal(&Point::from_vec(vec![1.0, -1.0]));
            assert!((h.matrix - want).amax() < 1e-6);
        }
        let h = fd_hessian_default(quad().as_ref(), &Point::zeros(2)).unwrap();
        assert!((h.matrix - DMatrix::identity(2, 2)).amax() < 1e-9);
    }

    #[test]
    fn example1_hessian_against_symbolic_second_derivative() {
        let obj = corpus_get("example1", &Params::new()).unwrap();
        let t = 1.0 / std::f64::consts::PI;
        // Oracle: d²/dt² t³ sin(1/t) = 6t sin(1/t) − 4 cos(1/t) − sin(1/t)/t, at 1/t = π.
        let want = 6.0 * t * std::f64::consts::PI.sin() - 4.0 * std::f64::consts::PI.cos()
            - std::f64::consts::PI.sin() / t;
        let h = fd_hessian(obj.as_ref(), &Point::from_vec(vec![t, t]), 1e-5).unwrap();
        assert!((h.matrix[(0, 0)] - want).abs() < 1e-4);
        assert!((h.matrix[(1, 1)] - want).abs() < 1e-4);
        assert!(h.matrix[(0, 1)].abs() < 1e-4);
    }

    #[test]
    fn non_finite_value_names_coordinate() {
        let obj = crate::objective::FnObjective::new(
            "blowup",
            2,
            |x: &Point| if x[1] > 0.5 { f64::NAN } else { 0.0 },
            |x: &Point| Point::zeros(x.len()),
        );
        let err = fd_gradient(&obj, &Point::from_vec(vec![0.0, 0.5]), 1e-3).unwrap_err();
        assert!(err.to_string().contains("coordinate 1"), "{err}");
    }
}
