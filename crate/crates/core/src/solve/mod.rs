//! Cutting-plane loops: Kelley's method, the extended supporting hyperplane
//! method, branch-and-bound over integer variables, and the harness that
//! checks ESH cuts against gradient cuts of the gauge.

mod bnb;
mod equivalence;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{Cut, LpError, LpModel, LpStatus};
use crate::model::{find_interior_point, InteriorPointError, ModelError, Problem, SolverConfig};
use crate::separation::{esh_cut, kelley_cut, line_search_boundary, SeparationError};

pub use bnb::solve_bnb;
pub use equivalence::{
    check_esh_kcp_equivalence, check_esh_kcp_equivalence_on, grid_samples, EquivalenceCut,
    EquivalenceReport,
};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Separation(#[from] SeparationError),
    #[error("no interior point for the supporting hyperplane method: {0}")]
    NoInteriorPoint(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

impl From<InteriorPointError> for SolveError {
    fn from(e: InteriorPointError) -> Self {
        SolveError::NoInteriorPoint(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Kelley,
    Esh,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Kelley => "kelley",
            Algorithm::Esh => "esh",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    OptimalEps,
    Infeasible,
    IterationLimit,
    Error,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::OptimalEps => "optimal_eps",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::IterationLimit => "iteration_limit",
            SolveStatus::Error => "error",
        })
    }
}

/// One relaxation solve and the cuts it triggered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Branch-and-bound node; 0 outside branch-and-bound.
    pub node: usize,
    /// Relaxation optimum `x̄`.
    pub x: Vec<f64>,
    /// `max_j g_j(x̄)`; `None` when some `g_j` is undefined at `x̄`.
    pub violation: Option<f64>,
    pub objective: f64,
    /// Cuts that entered the pool in this iteration.
    pub cuts: Vec<Cut>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub algorithm: Algorithm,
    pub status: SolveStatus,
    pub message: Option<String>,
    pub iterations: Vec<IterationRecord>,
    pub final_point: Option<Vec<f64>>,
    pub final_objective: Option<f64>,
    pub interior_point: Option<Vec<f64>>,
    pub nodes: usize,
}

impl SolveTrace {
    pub fn total_cuts(&self) -> usize {
        self.iterations.iter().map(|r| r.cuts.len()).sum()
    }

    pub fn cuts(&self) -> impl Iterator<Item = &Cut> {
        self.iterations.iter().flat_map(|r| r.cuts.iter())
    }

    /// `status=... objective=... iterations=... cuts=...`
    pub fn summary(&self) -> String {
        let objective = match self.final_objective {
            Some(v) => format!("{v:.6}"),
            None => "none".into(),
        };
        format!(
            "status={} objective={} iterations={} cuts={}",
            self.status,
            objective,
            self.iterations.len(),
            self.total_cuts()
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    /// `iteration,objective,violation` rows; undefined violations print as `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,objective,violation\n");
        for r in &self.iterations {
            let v = r.violation.map_or("inf".to_string(), |v| format!("{v:e}"));
            out.push_str(&format!("{},{:e},{}\n", r.iteration, r.objective, v));
        }
        out
    }
}

pub(crate) enum Separator {
    Kelley,
    Esh { interior: Vec<f64> },
}

pub(crate) enum NodeOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    IterationLimit,
    Failed(String),
}

/// A cut pool and the records of every relaxation solved against it.
pub(crate) struct Session<'a> {
    pub problem: &'a Problem,
    pub cfg: &'a SolverConfig,
    pub separator: Separator,
    pub lp: LpModel,
    pub records: Vec<IterationRecord>,
}

impl<'a> Session<'a> {
    pub fn new(
        problem: &'a Problem,
        cfg: &'a SolverConfig,
        separator: Separator,
    ) -> Result<Self, SolveError> {
        let lp = LpModel::new(
            problem.lower().to_vec(),
            problem.upper().to_vec(),
            problem.objective().to_vec(),
        )?;
        Ok(Session {
            problem,
            cfg,
            separator,
            lp,
            records: Vec::new(),
        })
    }

    fn separate(&self, xbar: &[f64]) -> Result<Vec<Cut>, String> {
        let constraints = self.problem.constraints();
        match &self.separator {
            Separator::Kelley => {
                let mut cuts = Vec::new();
                for c in constraints {
                    let v = c.expr.eval(xbar).map_err(|e| e.to_string())?;
                    if v > 0.0 {
                        cuts.push(kelley_cut(c, xbar).map_err(|e| e.to_string())?);
                    }
                }
                Ok(cuts)
            }
            Separator::Esh { interior } => {
                let gr = line_search_boundary(constraints, interior, xbar, self.cfg)
                    .map_err(|e| e.to_string())?;
                esh_cut(constraints, &gr).map_err(|e| e.to_string())
            }
        }
    }

    /// Cutting-plane loop on the current box until ε-feasible, infeasible or
    /// out of iterations.
    pub fn run_node(&mut self, node: usize) -> NodeOutcome {
        loop {
            if self.records.len() >= self.cfg.max_iters {
                return NodeOutcome::IterationLimit;
            }
            let sol = match self.lp.solve() {
                Ok(s) => s,
                Err(e) => return NodeOutcome::Failed(e.to_string()),
            };
            if sol.status == LpStatus::Infeasible {
                return NodeOutcome::Infeasible;
            }
            let xbar = sol.x;
            let violation = self.problem.max_constraint(&xbar).ok().map(|(v, _)| v);
            let mut record = IterationRecord {
                iteration: self.records.len(),
                node,
                x: xbar.clone(),
                violation,
                objective: sol.objective_value,
                cuts: Vec::new(),
            };
            if matches!(violation, Some(v) if v <= self.cfg.eps_feas) {
                self.records.push(record);
                return NodeOutcome::Optimal {
                    x: xbar,
                    objective: sol.objective_value,
                };
            }
            let cuts = match self.separate(&xbar) {
                Ok(c) => c,
                Err(msg) => {
                    self.records.push(record);
                    return NodeOutcome::Failed(msg);
                }
            };
            for cut in cuts {
                match self.lp.add_cut(cut.clone()) {
                    Ok(true) => record.cuts.push(cut),
                    Ok(false) => {}
                    Err(e) => {
                        self.records.push(record);
                        return NodeOutcome::Failed(e.to_string());
                    }
                }
            }
            let stalled = record.cuts.is_empty();
            self.records.push(record);
            if stalled {
                return NodeOutcome::Failed(format!(
                    "no new cut separates the relaxation optimum {xbar:?}"
                ));
            }
        }
    }
}

/// Interior point for ESH: configuration, then problem file, then search from
/// the box center. Supplied points must be strictly interior.
pub fn resolve_interior_point(p: &Problem, cfg: &SolverConfig) -> Result<Vec<f64>, SolveError> {
    let given = cfg
        .interior_point
        .as_deref()
        .or(p.interior_point())
        .map(<[f64]>::to_vec);
    if let Some(x0) = given {
        if x0.len() != p.n() {
            return Err(SolveError::NoInteriorPoint(format!(
                "interior point has length {}, expected {}",
                x0.len(),
                p.n()
            )));
        }
        return match p.max_constraint(&x0) {
            Ok((v, _)) if v < 0.0 => Ok(x0),
            Ok((v, _)) => Err(SolveError::NoInteriorPoint(format!(
                "supplied point {x0:?} is not strictly interior (max constraint {v:.3e}); \
                 supply another point or relax the problem with epsilon_relax"
            ))),
            Err(e) => Err(SolveError::NoInteriorPoint(e.to_string())),
        };
    }
    let center: Vec<f64> = p
        .lower()
        .iter()
        .zip(p.upper())
        .map(|(l, u)| 0.5 * (l + u))
        .collect();
    Ok(find_interior_point(p, &center, cfg.interior_search_steps)?)
}

pub(crate) fn finish(
    session: Session<'_>,
    algorithm: Algorithm,
    outcome: NodeOutcome,
) -> SolveTrace {
    let interior_point = match &session.separator {
        Separator::Esh { interior } => Some(interior.clone()),
        Separator::Kelley => None,
    };
    let (status, message, final_point, final_objective) = match outcome {
        NodeOutcome::Optimal { x, objective } => {
            (SolveStatus::OptimalEps, None, Some(x), Some(objective))
        }
        NodeOutcome::Infeasible => {
            let lp = &session.lp;
            let contradiction = interior_point.as_deref().is_some_and(|x0| {
                x0.iter()
                    .zip(lp.lower().iter().zip(lp.upper()))
                    .all(|(v, (l, u))| l <= v && v <= u)
            });
            if contradiction {
                (
                    SolveStatus::Error,
                    Some(
                        "relaxation became infeasible although the interior point is feasible; \
                         cuts are numerically inconsistent"
                            .to_string(),
                    ),
                    None,
                    None,
                )
            } else {
                (SolveStatus::Infeasible, None, None, None)
            }
        }
        NodeOutcome::IterationLimit => {
            let last = session.records.last();
            (
                SolveStatus::IterationLimit,
                None,
                last.map(|r| r.x.clone()),
                last.map(|r| r.objective),
            )
        }
        NodeOutcome::Failed(msg) => (SolveStatus::Error, Some(msg), None, None),
    };
    SolveTrace {
        algorithm,
        status,
        message,
        iterations: session.records,
        final_point,
        final_objective,
        interior_point,
        nodes: 1,
    }
}

/// Kelley's cutting-plane method: cut every violated constraint at the
/// relaxation optimum. Integrality is ignored.
pub fn solve_kelley(p: &Problem, cfg: &SolverConfig) -> Result<SolveTrace, SolveError> {
    cfg.validate()?;
    let mut session = Session::new(p, cfg, Separator::Kelley)?;
    let outcome = session.run_node(0);
    Ok(finish(session, Algorithm::Kelley, outcome))
}

/// Extended supporting hyperplane method: cut at the boundary point between
/// the interior point and the relaxation optimum. Integrality is ignored.
pub fn solve_esh(p: &Problem, cfg: &SolverConfig) -> Result<SolveTrace, SolveError> {
    cfg.validate()?;
    let interior = resolve_interior_point(p, cfg)?;
    let mut session = Session::new(p, cfg, Separator::Esh { interior })?;
    let outcome = session.run_node(0);
    Ok(finish(session, Algorithm::Esh, outcome))
}

pub fn solve(
    p: &Problem,
    cfg: &SolverConfig,
    algorithm: Algorithm,
) -> Result<SolveTrace, SolveError> {
    match algorithm {
        Algorithm::Kelley => solve_kelley(p, cfg),
        Algorithm::Esh => solve_esh(p, cfg),
    }
}
