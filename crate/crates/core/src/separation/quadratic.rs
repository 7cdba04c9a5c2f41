//! Supportingness of gradient cuts for convex quadratics `xᵀAx + bᵀx + c0 <= 0`.
//!
//! Gradient cuts from infeasible points support the sublevel set exactly when
//! `b` is outside the range of `A`: then some kernel direction `v` of `A` has
//! `bᵀv ≠ 0`, and `g` is affine along it.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::SeparationError;
use crate::model::QuadraticForm;

/// Relative residual threshold for `b ∈ R(A)`.
pub const RANGE_TOL: f64 = 1e-8;
const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadraticVerdict {
    AlwaysSupporting,
    NeverSupportingFromInfeasible,
}

impl std::fmt::Display for QuadraticVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QuadraticVerdict::AlwaysSupporting => "always supporting (b ∉ range(A))",
            QuadraticVerdict::NeverSupportingFromInfeasible => {
                "never supporting from infeasible points (b ∈ range(A))"
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticClassification {
    pub verdict: QuadraticVerdict,
    /// `‖Az − b‖` of the least-squares solution.
    pub residual: f64,
    pub min_eigenvalue: f64,
    /// Minimum of `g`; `None` when `g` is unbounded below.
    pub min_value: Option<f64>,
}

pub fn classify_quadratic(q: &QuadraticForm) -> Result<QuadraticClassification, SeparationError> {
    let lmin = q.min_eigenvalue();
    if lmin < -PSD_TOL {
        return Err(SeparationError::NotPsd(lmin));
    }
    let a = q.a();
    let b = q.b();
    let z = if q.n() == 0 {
        DVector::zeros(0)
    } else {
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let cutoff = 1e-10 * smax.max(1.0);
        svd.solve(b, cutoff)
            .map_err(|e| SeparationError::Numerical(e.into()))?
    };
    let residual = (a * &z - b).norm();
    let in_range = residual <= RANGE_TOL * (1.0 + b.norm());
    let min_value = in_range.then(|| q.c0() - 0.25 * b.dot(&z));
    if let Some(m) = min_value {
        if m > 0.0 {
            return Err(SeparationError::EmptySublevelSet(m));
        }
    }
    Ok(QuadraticClassification {
        verdict: if in_range {
            QuadraticVerdict::NeverSupportingFromInfeasible
        } else {
            QuadraticVerdict::AlwaysSupporting
        },
        residual,
        min_eigenvalue: lmin,
        min_value,
    })
}
