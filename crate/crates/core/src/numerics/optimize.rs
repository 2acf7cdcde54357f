use rayon::prelude::*;

use crate::error::{Error, Result};

use super::linalg::solve_linear;
use super::matrix::{dot, norm2, norm_inf, Matrix};

/// Central-difference step for gradients.
pub const GRADIENT_STEP: f64 = 1e-6;
/// Central-difference step for Newton Jacobians.
pub const JACOBIAN_STEP: f64 = 1e-7;
/// Accepted local minima must have a finite-difference gradient norm below this.
pub const GRADIENT_TOLERANCE: f64 = 1e-6;
/// Minima closer than this are merged.
pub const MERGE_RADIUS: f64 = 1e-4;
pub const MINIMIZE_MAX_ITERATIONS: usize = 500;

pub const NEWTON_TOLERANCE: f64 = 1e-10;
pub const NEWTON_MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalMinimum {
    pub point: Vec<f64>,
    pub value: f64,
}

pub fn central_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + h;
            let fp = f(&xp);
            xp[i] = x[i] - h;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

fn clamp_to_box(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(lo, hi);
    }
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Probes `±r·eᵢ` around a stationary point and returns a lower point if one
/// exists, so descent does not stop on saddles or maxima.
fn escape_direction<F: Fn(&[f64]) -> f64>(f: &F, min: &LocalMinimum, bounds: &[(f64, f64)]) -> Option<Vec<f64>> {
    let x = &min.point;
    let r = 1e-3 * (1.0 + norm_inf(x));
    let mut best: Option<(Vec<f64>, f64)> = None;
    for i in 0..x.len() {
        for sign in [1.0, -1.0] {
            let mut p = x.clone();
            p[i] += sign * r;
            clamp_to_box(&mut p, bounds);
            let v = finite_or_inf(f(&p));
            if v < min.value - 1e-12 * (1.0 + min.value.abs()) && best.as_ref().is_none_or(|b| v < b.1) {
                best = Some((p, v));
            }
        }
    }
    best.map(|b| b.0)
}

/// Local descent with saddle escapes.
fn local_minimize<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], bounds: &[(f64, f64)]) -> Result<LocalMinimum> {
    let mut min = bfgs(f, x0, bounds)?;
    for _ in 0..5 {
        match escape_direction(f, &min, bounds) {
            Some(p) => min = bfgs(f, &p, bounds)?,
            None => return Ok(min),
        }
    }
    Ok(min)
}

/// Quasi-Newton (BFGS) descent from `x0`, projected onto the box.
fn bfgs<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], bounds: &[(f64, f64)]) -> Result<LocalMinimum> {
    let m = x0.len();
    let eval = |x: &[f64]| finite_or_inf(f(x));
    let mut x = x0.to_vec();
    clamp_to_box(&mut x, bounds);
    let mut fx = eval(&x);
    if !fx.is_finite() {
        return Err(Error::NoConvergence { iterations: 0, residual: fx });
    }
    let mut g = central_gradient(&eval, &x, GRADIENT_STEP);
    let mut hinv = Matrix::identity(m);
    for iter in 0..MINIMIZE_MAX_ITERATIONS {
        let gnorm = norm2(&g);
        if gnorm <= 1e-10 {
            break;
        }
        let mut d: Vec<f64> = hinv.mul_vec(&g).expect("square").iter().map(|v| -v).collect();
        let mut slope = dot(&d, &g);
        if slope >= 0.0 {
            // lost positive definiteness: restart from steepest descent
            hinv = Matrix::identity(m);
            d = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-14 {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            clamp_to_box(&mut trial, bounds);
            let ft = eval(&trial);
            if ft <= fx + 1e-4 * alpha * slope {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            // no further decrease possible at this resolution
            if gnorm <= GRADIENT_TOLERANCE {
                break;
            }
            return Err(Error::NoConvergence { iterations: iter, residual: gnorm });
        };
        let gn = central_gradient(&eval, &xn, GRADIENT_STEP);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * norm2(&s) * norm2(&y) && sy > 0.0 {
            let hy = hinv.mul_vec(&y).expect("square");
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..m {
                for j in 0..m {
                    hinv[(i, j)] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }
        let moved = norm_inf(&s);
        x = xn;
        fx = fnew;
        g = gn;
        if moved <= 1e-15 * (1.0 + norm_inf(&x)) {
            break;
        }
        if iter + 1 == MINIMIZE_MAX_ITERATIONS && norm2(&g) > GRADIENT_TOLERANCE {
            return Err(Error::NoConvergence { iterations: MINIMIZE_MAX_ITERATIONS, residual: norm2(&g) });
        }
    }
    let gnorm = norm2(&central_gradient(&eval, &x, GRADIENT_STEP));
    if gnorm > GRADIENT_TOLERANCE {
        return Err(Error::NoConvergence { iterations: MINIMIZE_MAX_ITERATIONS, residual: gnorm });
    }
    Ok(LocalMinimum { point: x, value: fx })
}

/// Radical inverse of `i` in `base`, the building block of Halton points.
fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

const PRIMES: [usize; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Deterministic start points: the box centre followed by a Halton sequence.
pub fn start_points(bounds: &[(f64, f64)], n_starts: usize) -> Vec<Vec<f64>> {
    (0..n_starts)
        .map(|s| {
            bounds
                .iter()
                .enumerate()
                .map(|(d, &(lo, hi))| {
                    let u = if s == 0 {
                        0.5
                    } else {
                        radical_inverse(s, PRIMES[d % PRIMES.len()])
                    };
                    lo + u * (hi - lo)
                })
                .collect()
        })
        .collect()
}

/// Local minima of `f` over a box, from `n_starts` independent descents.
///
/// Starts that fail to converge are dropped. Minima within `MERGE_RADIUS` of
/// each other are merged, keeping the lower value. The result is sorted by
/// ascending value.
pub fn minimize_multistart<F>(f: F, bounds: &[(f64, f64)], n_starts: usize) -> Result<Vec<LocalMinimum>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n_starts == 0 {
        return Err(Error::InvalidParameter("n_starts must be at least 1".into()));
    }
    if bounds.iter().any(|(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::InvalidParameter("box bounds must be finite with lo <= hi".into()));
    }
    let starts = start_points(bounds, n_starts);
    let found: Vec<LocalMinimum> = starts
        .par_iter()
        .filter_map(|x0| local_minimize(&f, x0, bounds).ok())
        .collect();
    let mut merged: Vec<LocalMinimum> = Vec::new();
    for cand in found {
        match merged.iter_mut().find(|m| {
            norm2(&m.point.iter().zip(&cand.point).map(|(a, b)| a - b).collect::<Vec<_>>()) <= MERGE_RADIUS
        }) {
            Some(existing) => {
                if cand.value < existing.value {
                    *existing = cand;
                }
            }
            None => merged.push(cand),
        }
    }
    merged.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(merged)
}

/// Central finite-difference Jacobian of a vector field.
pub fn finite_difference_jacobian<F>(f: &F, x: &[f64], h: f64) -> Result<Matrix>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let m = x.len();
    let mut xp = x.to_vec();
    let mut cols = Vec::with_capacity(m);
    for j in 0..m {
        xp[j] = x[j] + h;
        let fp = f(&xp)?;
        xp[j] = x[j] - h;
        let fm = f(&xp)?;
        xp[j] = x[j];
        cols.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<f64>>());
    }
    let rows = cols.first().map_or(0, Vec::len);
    let mut jac = Matrix::zeros(rows, m);
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            jac[(i, j)] = *v;
        }
    }
    Ok(jac)
}

/// Newton's method with a finite-difference Jacobian and backtracking on
/// `‖F‖₂`. Converges when `‖F(x)‖∞ ≤ NEWTON_TOLERANCE`.
///
/// `F` may fail (e.g. outside its domain); a failing trial point is treated
/// like a rejected step.
pub fn newton_solve<F>(f: F, x0: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = x0.to_vec();
    let mut fx = f(&x)?;
    if fx.len() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "vector field maps {} variables to {} residuals",
            x.len(),
            fx.len()
        )));
    }
    for iter in 0..=NEWTON_MAX_ITERATIONS {
        let res = norm_inf(&fx);
        if !res.is_finite() {
            return Err(Error::NoConvergence { iterations: iter, residual: res });
        }
        if res <= NEWTON_TOLERANCE {
            return Ok(x);
        }
        if iter == NEWTON_MAX_ITERATIONS {
            return Err(Error::NoConvergence { iterations: iter, residual: res });
        }
        let jac = finite_difference_jacobian(&f, &x, JACOBIAN_STEP)?;
        let rhs: Vec<f64> = fx.iter().map(|v| -v).collect();
        let step = solve_linear(&jac, &rhs).map_err(|e| match e {
            Error::SingularMatrix { .. } => Error::SingularJacobian,
            other => other,
        })?;
        let norm0 = norm2(&fx);
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= 1e-10 {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + alpha * b).collect();
            if let Ok(ft) = f(&trial) {
                let n = norm2(&ft);
                if n.is_finite() && n <= (1.0 - 1e-4 * alpha) * norm0 {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((xn, fnew)) => {
                x = xn;
                fx = fnew;
            }
            None => {
                return Err(Error::NoConvergence { iterations: iter, residual: res });
            }
        }
    }
    unreachable!("loop returns on its last iteration")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let mins = minimize_multistart(|x: &[f64]| (x[0] - 2.0).powi(2), &[(-5.0, 5.0)], 8).unwrap();
        assert_eq!(mins.len(), 1);
        assert!((mins[0].point[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn double_well() {
        let f = |x: &[f64]| (x[0] * x[0] - 1.0).powi(2) + x[1] * x[1];
        let mins = minimize_multistart(f, &[(-2.0, 2.0), (-2.0, 2.0)], 16).unwrap();
        assert_eq!(mins.len(), 2, "{mins:?}");
        let mut xs: Vec<f64> = mins.iter().map(|m| m.point[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] + 1.0).abs() < 1e-6 && (xs[1] - 1.0).abs() < 1e-6);
        for m in &mins {
            assert!(m.point[1].abs() < 1e-6);
        }
    }

    #[test]
    fn convex_quadratic_single_minimizer() {
        // f = ½ xᵀ H x - bᵀ x, minimizer H⁻¹ b
        let h = Matrix::from_rows(&[[4.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 2.0]]);
        let b = [1.0, -2.0, 0.5];
        let f = |x: &[f64]| 0.5 * dot(x, &h.mul_vec(x).unwrap()) - dot(&b, x);
        let want = solve_linear(&h, &b).unwrap();
        let mins = minimize_multistart(f, &[(-5.0, 5.0); 3], 12).unwrap();
        assert_eq!(mins.len(), 1);
        for (g, w) in mins[0].point.iter().zip(&want) {
            assert!((g - w).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_starts_rejected() {
        assert!(minimize_multistart(|x: &[f64]| x[0], &[(0.0, 1.0)], 0).is_err());
    }

    #[test]
    fn newton_scalar_root() {
        let x = newton_solve(|x: &[f64]| Ok(vec![x[0] * x[0] - 4.0]), &[3.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn newton_linear_system() {
        let x = newton_solve(|x: &[f64]| Ok(vec![x[0] + x[1] - 3.0, x[0] - x[1] - 1.0]), &[0.0, 0.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-10 && (x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn newton_singular_jacobian() {
        let r = newton_solve(|x: &[f64]| Ok(vec![x[0] + x[1] - 1.0, 2.0 * x[0] + 2.0 * x[1] - 3.0]), &[0.0, 0.0]);
        assert_eq!(r, Err(Error::SingularJacobian));
    }

    #[test]
    fn newton_no_root() {
        let r = newton_solve(|x: &[f64]| Ok(vec![x[0] * x[0] + 1.0]), &[0.5]);
        assert!(r.is_err());
    }
}
