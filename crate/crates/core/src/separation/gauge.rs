//! Boundary line search and gauge evaluation.
//!
//! For an interior point `x0` and a direction `d = x̄ - x0`, the shifted gauge is
//! `φ(x̄) = 1/λ*` where `λ*` is the root of `λ ↦ f(x0 + λd)`, `f = max_j g_j`.
//! Roots are found by plain bisection; only a sign change is needed, so
//! non-convex representations of a convex set are handled the same way.

use serde::{Deserialize, Serialize};

use super::SeparationError;
use crate::model::{max_constraint, Constraint, SolverConfig};

/// `|f(x̂)|` must drop below this before the boundary search stops.
pub const TOL_F: f64 = 1e-9;

/// Outcome of the boundary line search between `x0` and `x̄`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeResult {
    pub lambda_star: f64,
    /// Shifted gauge `φ_{C - x0}(x̄ - x0) = 1/λ*`.
    pub gauge_value: f64,
    /// `x̂ = x0 + λ*(x̄ - x0)`, on the feasible side of the boundary.
    pub boundary_point: Vec<f64>,
    pub interior_point: Vec<f64>,
    pub separated_point: Vec<f64>,
    /// `f(x̂)`.
    pub boundary_value: f64,
    /// Indices `j` with `g_j(x̂) >= -activity_tol`.
    pub active_set: Vec<usize>,
}

fn along(x0: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
    x0.iter().zip(dir).map(|(a, d)| a + t * d).collect()
}

/// `f` along the ray; evaluation failures count as outside the set.
fn ray_value(constraints: &[Constraint], x0: &[f64], dir: &[f64], t: f64) -> f64 {
    max_constraint(constraints, &along(x0, dir, t))
        .map(|(v, _)| v)
        .unwrap_or(f64::INFINITY)
}

/// Bisection on `[lo, hi]` with `h(lo) <= 0 < h(hi)`. Returns the feasible end
/// and its value once `hi - lo <= width` and `|h(lo)| <= tol_f`, or when the
/// interval cannot shrink further.
fn bisect(
    h: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    mut h_lo: f64,
    width: f64,
    tol_f: f64,
    max_steps: usize,
) -> (f64, f64) {
    for _ in 0..max_steps {
        if hi - lo <= width && h_lo.abs() <= tol_f {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = h(mid);
        if v <= 0.0 {
            lo = mid;
            h_lo = v;
        } else {
            hi = mid;
        }
    }
    (lo, h_lo)
}

fn check_dims(x0: &[f64], x: &[f64]) -> Result<(), SeparationError> {
    if x0.len() != x.len() {
        return Err(SeparationError::Dimension {
            expected: x0.len(),
            got: x.len(),
        });
    }
    Ok(())
}

fn interior_value(constraints: &[Constraint], x0: &[f64]) -> Result<f64, SeparationError> {
    let (f0, _) = max_constraint(constraints, x0)?;
    if f0 >= 0.0 {
        return Err(SeparationError::NotInterior { value: f0 });
    }
    Ok(f0)
}

/// Find the boundary point on the segment from interior `x0` to infeasible `xbar`.
pub fn line_search_boundary(
    constraints: &[Constraint],
    x0: &[f64],
    xbar: &[f64],
    cfg: &SolverConfig,
) -> Result<GaugeResult, SeparationError> {
    check_dims(x0, xbar)?;
    let f0 = interior_value(constraints, x0)?;
    let f1 = match max_constraint(constraints, xbar) {
        Ok((v, _)) => v,
        Err(_) => f64::INFINITY,
    };
    if f1 <= 0.0 {
        return Err(SeparationError::PointFeasible { value: f1 });
    }
    let dir: Vec<f64> = xbar.iter().zip(x0).map(|(b, a)| b - a).collect();
    let (lambda, f_hat) = bisect(
        |t| ray_value(constraints, x0, &dir, t),
        0.0,
        1.0,
        f0,
        cfg.line_search_tol,
        TOL_F,
        cfg.line_search_max_steps,
    );
    if f_hat.abs() > TOL_F || lambda <= 0.0 {
        return Err(SeparationError::LineSearchStalled {
            tol_f: TOL_F,
            residual: f_hat.abs(),
        });
    }
    let xhat = along(x0, &dir, lambda);
    let mut active_set = Vec::new();
    for (j, c) in constraints.iter().enumerate() {
        if c.expr.eval(&xhat)? >= -cfg.activity_tol {
            active_set.push(j);
        }
    }
    debug_assert!(!active_set.is_empty());
    Ok(GaugeResult {
        lambda_star: lambda,
        gauge_value: 1.0 / lambda,
        boundary_point: xhat,
        interior_point: x0.to_vec(),
        separated_point: xbar.to_vec(),
        boundary_value: f_hat,
        active_set,
    })
}

/// Shifted gauge `φ_{C - x0}(x - x0)` for any `x`, feasible or not.
///
/// Feasible points are handled by doubling `λ > 1` until the ray leaves the
/// set; a ray that stays inside for `λ` up to `2^60` is reported as
/// [`SeparationError::Unbracketed`].
pub fn gauge(
    constraints: &[Constraint],
    x0: &[f64],
    x: &[f64],
    cfg: &SolverConfig,
) -> Result<f64, SeparationError> {
    check_dims(x0, x)?;
    let f0 = interior_value(constraints, x0)?;
    let dir: Vec<f64> = x.iter().zip(x0).map(|(b, a)| b - a).collect();
    if dir.iter().all(|d| *d == 0.0) {
        return Ok(0.0);
    }
    let h = |t: f64| ray_value(constraints, x0, &dir, t);
    let (mut lo, mut h_lo, mut hi) = (0.0, f0, 1.0);
    let h1 = h(1.0);
    if h1 <= 0.0 {
        lo = 1.0;
        h_lo = h1;
        hi = 2.0;
        let mut doublings = 0;
        loop {
            let v = h(hi);
            if v > 0.0 {
                break;
            }
            lo = hi;
            h_lo = v;
            hi *= 2.0;
            doublings += 1;
            if doublings > 60 {
                return Err(SeparationError::Unbracketed);
            }
        }
    }
    let (lambda, _) = bisect(
        h,
        lo,
        hi,
        h_lo,
        cfg.line_search_tol * hi,
        TOL_F,
        cfg.line_search_max_steps,
    );
    if lambda <= 0.0 {
        return Err(SeparationError::Unbracketed);
    }
    Ok(1.0 / lambda)
}
