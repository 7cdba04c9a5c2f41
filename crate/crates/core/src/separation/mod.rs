//! Cut generation and the supporting-hyperplane toolkit.
//!
//! * [`kelley_cut`]: linearization of a violated constraint at the point itself.
//! * [`line_search_boundary`] + [`esh_cut`]: bisection from an interior point to
//!   the boundary, then linearization of every active constraint there.
//! * [`gauge`]: evaluation of the (shifted) gauge function by the same line search.
//! * [`check_supporting`], [`affine_on_segment`], [`classify_quadratic`],
//!   [`gauge_subgradient_check`]: verification of supportingness and of the
//!   subgradient characterization of supporting cuts.

mod gauge;
mod quadratic;
mod support;

use thiserror::Error;

use crate::expr::EvalError;
use crate::lp::{Cut, CutKind, CutOrigin, LpError};
use crate::model::Constraint;

pub use gauge::{gauge, line_search_boundary, GaugeResult, TOL_F};
pub use quadratic::{classify_quadratic, QuadraticClassification, QuadraticVerdict, RANGE_TOL};
pub use support::{
    affine_on_segment, check_supporting, gauge_subgradient_check, GaugeSamples, SubgradientCheck,
    SupportProbe, SupportVerdict, SUPPORT_TOL,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeparationError {
    #[error("point does not violate `{constraint}` (value {value:.3e})")]
    NotViolated { constraint: String, value: f64 },
    #[error("cannot separate: gradient of `{constraint}` vanishes at {point:?}")]
    VanishingGradient { constraint: String, point: Vec<f64> },
    #[error(
        "gradient of active constraint `{constraint}` vanishes at boundary point {point:?} \
         (non-vanishing gradient condition violated)"
    )]
    ActiveGradientVanishes { constraint: String, point: Vec<f64> },
    #[error("interior point is not strictly interior (max constraint {value:.3e})")]
    NotInterior { value: f64 },
    #[error("point to separate is feasible (max constraint {value:.3e})")]
    PointFeasible { value: f64 },
    #[error("line search could not reach |f| <= {tol_f:e} (|f| = {residual:.3e})")]
    LineSearchStalled { tol_f: f64, residual: f64 },
    #[error("gauge line search cannot bracket the boundary along the ray")]
    Unbracketed,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("segment endpoints coincide")]
    DegenerateSegment,
    #[error("at least 3 samples are needed, got {0}")]
    TooFewSamples(usize),
    #[error("cut is not tight at the supporting point: alphaᵀx̂ = {lhs} (expected 1)")]
    EqualityPrecondition { lhs: f64 },
    #[error("matrix is not positive semi-definite (smallest eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("sublevel set is empty (minimum value {0:.3e})")]
    EmptySublevelSet(f64),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Cut(#[from] LpError),
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Gradient cut `g(x̄) + ∇g(x̄)ᵀ(x - x̄) <= 0` of a violated constraint.
pub fn kelley_cut(constraint: &Constraint, xbar: &[f64]) -> Result<Cut, SeparationError> {
    let r = constraint.expr.eval_grad(xbar)?;
    if r.value <= 0.0 {
        return Err(SeparationError::NotViolated {
            constraint: constraint.name.clone(),
            value: r.value,
        });
    }
    if r.gradient.iter().all(|g| *g == 0.0) {
        return Err(SeparationError::VanishingGradient {
            constraint: constraint.name.clone(),
            point: xbar.to_vec(),
        });
    }
    let beta = dot(&r.gradient, xbar) - r.value;
    Ok(Cut::new(
        r.gradient,
        beta,
        CutOrigin {
            kind: CutKind::Kelley,
            constraint: constraint.name.clone(),
            point: xbar.to_vec(),
        },
    )?)
}

/// Gradient cuts of every active constraint at the boundary point of `gr`.
pub fn esh_cut(constraints: &[Constraint], gr: &GaugeResult) -> Result<Vec<Cut>, SeparationError> {
    let xhat = &gr.boundary_point;
    gr.active_set
        .iter()
        .map(|&j| {
            let c = &constraints[j];
            let r = c.expr.eval_grad(xhat)?;
            if r.gradient.iter().all(|g| *g == 0.0) {
                return Err(SeparationError::ActiveGradientVanishes {
                    constraint: c.name.clone(),
                    point: xhat.clone(),
                });
            }
            let beta = dot(&r.gradient, xhat) - r.value;
            Ok(Cut::new(
                r.gradient,
                beta,
                CutOrigin {
                    kind: CutKind::Esh,
                    constraint: c.name.clone(),
                    point: xhat.clone(),
                },
            )?)
        })
        .collect()
}
