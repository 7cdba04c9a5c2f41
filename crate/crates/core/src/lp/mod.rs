//! Linear relaxations: box bounds plus an accumulating pool of cuts.

mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use simplex::SimplexStats;

/// Two cuts whose normalized coefficients agree within this are duplicates.
pub const DEDUP_TOL: f64 = 1e-9;
/// Absolute tolerance for feasibility of a returned LP vertex.
pub const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("cut has a zero coefficient vector")]
    ZeroAlpha,
    #[error("cut has non-finite coefficients")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid bounds for variable {0}")]
    Bounds(usize),
    #[error("simplex exceeded {0} pivots (cycling guard)")]
    Cycling(usize),
    #[error("numerical failure in simplex: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutKind {
    Kelley,
    Esh,
    User,
}

/// Where a cut came from: algorithm, generating constraint and point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutOrigin {
    pub kind: CutKind,
    pub constraint: String,
    pub point: Vec<f64>,
}

impl CutOrigin {
    pub fn user() -> Self {
        CutOrigin {
            kind: CutKind::User,
            constraint: String::new(),
            point: Vec::new(),
        }
    }
}

/// `alphaᵀx <= beta`, stored with `max_i |alpha_i| = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    alpha: Vec<f64>,
    beta: f64,
    origin: CutOrigin,
}

impl Cut {
    /// Builds the cut and rescales `(alpha, beta)` jointly to unit max-norm.
    pub fn new(alpha: Vec<f64>, beta: f64, origin: CutOrigin) -> Result<Self, LpError> {
        if alpha.iter().any(|a| !a.is_finite()) || !beta.is_finite() {
            return Err(LpError::NonFinite);
        }
        let scale = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        if scale == 0.0 {
            return Err(LpError::ZeroAlpha);
        }
        let alpha = alpha.into_iter().map(|a| a / scale).collect();
        Ok(Cut {
            alpha,
            beta: beta / scale,
            origin,
        })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn origin(&self) -> &CutOrigin {
        &self.origin
    }

    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.alpha.iter().zip(x).map(|(a, v)| a * v).sum()
    }

    /// `alphaᵀx - beta`; positive means `x` is cut off.
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.lhs(x) - self.beta
    }

    pub fn same_hyperplane(&self, other: &Cut) -> bool {
        self.alpha.len() == other.alpha.len()
            && (self.beta - other.beta).abs() <= DEDUP_TOL
            && self
                .alpha
                .iter()
                .zip(&other.alpha)
                .all(|(a, b)| (a - b).abs() <= DEDUP_TOL)
    }

    /// Coefficients rescaled so that the right-hand side is 1, relative to
    /// `center`: `a_unitᵀ(x - center) <= 1`. Needs `beta > alphaᵀcenter`.
    pub fn unit_rhs(&self, center: &[f64]) -> Option<Vec<f64>> {
        let rhs = self.beta - self.lhs(center);
        (rhs > 0.0).then(|| self.alpha.iter().map(|a| a / rhs).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Empty when infeasible.
    pub x: Vec<f64>,
    /// `+inf` when infeasible.
    pub objective_value: f64,
    pub stats: SimplexStats,
}

/// `min cᵀx` s.t. `l <= x <= u` and every pool cut.
#[derive(Debug, Clone, PartialEq)]
pub struct LpModel {
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: Vec<f64>,
    cuts: Vec<Cut>,
}

impl LpModel {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, objective: Vec<f64>) -> Result<Self, LpError> {
        let n = objective.len();
        for v in [&lower, &upper] {
            if v.len() != n {
                return Err(LpError::Dimension {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        for i in 0..n {
            if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] <= upper[i]) {
                return Err(LpError::Bounds(i));
            }
        }
        if objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite);
        }
        Ok(LpModel {
            lower,
            upper,
            objective,
            cuts: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.objective.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    /// Replace the variable box, keeping the cut pool.
    pub fn set_bounds(&mut self, lower: Vec<f64>, upper: Vec<f64>) -> Result<(), LpError> {
        let fresh = LpModel::new(lower, upper, self.objective.clone())?;
        self.lower = fresh.lower;
        self.upper = fresh.upper;
        Ok(())
    }

    /// Append `cut` unless an equal normalized cut is already pooled.
    pub fn add_cut(&mut self, cut: Cut) -> Result<bool, LpError> {
        if cut.alpha.len() != self.n() {
            return Err(LpError::Dimension {
                expected: self.n(),
                got: cut.alpha.len(),
            });
        }
        if self.cuts.iter().any(|c| c.same_hyperplane(&cut)) {
            return Ok(false);
        }
        self.cuts.push(cut);
        Ok(true)
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        lp_solve(self)
    }
}

/// Solve the relaxation with the bounded-variable two-phase simplex.
pub fn lp_solve(model: &LpModel) -> Result<LpSolution, LpError> {
    let rows: Vec<(&[f64], f64)> = model.cuts.iter().map(|c| (c.alpha(), c.beta())).collect();
    let out = simplex::solve(&model.lower, &model.upper, &model.objective, &rows)?;
    let Some(x) = out.x else {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            objective_value: f64::INFINITY,
            stats: out.stats,
        });
    };
    for (i, v) in x.iter().enumerate() {
        if *v < model.lower[i] || *v > model.upper[i] {
            return Err(LpError::Numerical(format!(
                "variable {i} = {v} outside its bounds"
            )));
        }
    }
    if let Some(c) = model.cuts.iter().find(|c| c.violation(&x) > FEAS_TOL) {
        return Err(LpError::Numerical(format!(
            "vertex violates a pooled cut by {:.3e}",
            c.violation(&x)
        )));
    }
    let objective_value = model.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective_value,
        stats: out.stats,
    })
}
