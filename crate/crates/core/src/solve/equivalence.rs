//! ESH cuts read as gradient cuts of the gauge reformulation
//! `min { cᵀx : φ(x - x0) <= 1 }`.
//!
//! With `d = x̄ - x0` and active gradient `v` at `x̂`, the ESH cut
//! `vᵀ(x - x̂) <= 0` rescales to `αᵀ(x - x0) <= 1` with `α = φ(x̄)/(vᵀd)·v`.
//! The harness checks that `α` satisfies the subgradient inequality of `φ`.

use serde::{Deserialize, Serialize};

use super::{resolve_interior_point, SolveError};
use crate::lp::Cut;
use crate::model::{Problem, SolverConfig};
use crate::separation::{
    dot, esh_cut, gauge, line_search_boundary, GaugeSamples, SeparationError, SubgradientCheck,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceCut {
    pub constraint: String,
    pub cut: Cut,
    /// `vᵀ(x̄ - x0)` for the normalized cut direction `v`.
    pub v_dot_d: f64,
    /// `α` of `αᵀ(x - x0) <= 1`.
    pub alpha: Vec<f64>,
    pub check: SubgradientCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub interior_point: Vec<f64>,
    pub separated_point: Vec<f64>,
    pub lambda_star: f64,
    pub gauge_value: f64,
    pub boundary_point: Vec<f64>,
    pub cuts: Vec<EquivalenceCut>,
    pub passed: bool,
}

/// Grid with `per_axis` points per coordinate spanning `[lower, upper]`.
pub fn grid_samples(lower: &[f64], upper: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = lower
        .iter()
        .zip(upper)
        .map(|(l, u)| match per_axis {
            0 => Vec::new(),
            1 => vec![0.5 * (l + u)],
            k => (0..k)
                .map(|i| l + (u - l) * i as f64 / (k - 1) as f64)
                .collect(),
        })
        .collect();
    let mut points = vec![Vec::with_capacity(lower.len())];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    points
}

/// Separate `xbar` by ESH and check every resulting cut against the gauge.
/// Samples are a `per_axis` grid over the problem box.
pub fn check_esh_kcp_equivalence(
    p: &Problem,
    cfg: &SolverConfig,
    xbar: &[f64],
    per_axis: usize,
) -> Result<EquivalenceReport, SolveError> {
    let x0 = resolve_interior_point(p, cfg)?;
    let points = grid_samples(p.lower(), p.upper(), per_axis);
    let samples = GaugeSamples::new(p.constraints(), &x0, points, cfg)?;
    check_esh_kcp_equivalence_on(p, cfg, xbar, &samples)
}

/// As [`check_esh_kcp_equivalence`], against gauge values sampled once for
/// many separated points. The interior point is `samples.x0`.
pub fn check_esh_kcp_equivalence_on(
    p: &Problem,
    cfg: &SolverConfig,
    xbar: &[f64],
    samples: &GaugeSamples,
) -> Result<EquivalenceReport, SolveError> {
    let x0 = &samples.x0;
    let constraints = p.constraints();
    let gr = line_search_boundary(constraints, x0, xbar, cfg)?;
    let d: Vec<f64> = xbar.iter().zip(x0).map(|(a, b)| a - b).collect();
    if gr.gauge_value <= 1.0 {
        return Err(SolveError::Precondition(format!(
            "gauge of the separated point is {} (expected > 1)",
            gr.gauge_value
        )));
    }
    let phi_hat = gauge(constraints, x0, &gr.boundary_point, cfg)?;
    let mut cuts = Vec::new();
    for cut in esh_cut(constraints, &gr)? {
        let v = cut.alpha();
        let v_dot_d = dot(v, &d);
        if v_dot_d <= 0.0 {
            return Err(SolveError::Precondition(format!(
                "cut direction does not point towards the separated point (vᵀd = {v_dot_d})"
            )));
        }
        let alpha: Vec<f64> = v.iter().map(|vi| gr.gauge_value / v_dot_d * vi).collect();
        let check = match samples.check(&alpha, &gr.boundary_point, phi_hat) {
            Ok(c) => c,
            Err(e @ SeparationError::EqualityPrecondition { .. }) => {
                return Err(SolveError::Precondition(format!(
                    "{e}; tighten line_search_tol"
                )))
            }
            Err(e) => return Err(e.into()),
        };
        cuts.push(EquivalenceCut {
            constraint: cut.origin().constraint.clone(),
            cut,
            v_dot_d,
            alpha,
            check,
        });
    }
    Ok(EquivalenceReport {
        passed: cuts.iter().all(|c| c.check.passed),
        interior_point: x0.clone(),
        separated_point: xbar.to_vec(),
        lambda_star: gr.lambda_star,
        gauge_value: gr.gauge_value,
        boundary_point: gr.boundary_point,
        cuts,
    })
}
