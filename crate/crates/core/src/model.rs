//! Problem definition, file format, solver configuration and the
//! ε-relaxation / interior-point helpers.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, EvalError, Expr, ParseError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("reading problem file: {0}")]
    Io(#[from] std::io::Error),
    #[error("problem schema: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("constraint `{constraint}`: {source}")]
    Expression {
        constraint: String,
        source: ParseError,
    },
    #[error("variable `{name}`: bounds [{lower}, {upper}] must be finite with lower <= upper")]
    Bounds {
        name: String,
        lower: f64,
        upper: f64,
    },
    #[error("invalid variable name `{0}`")]
    VariableName(String),
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("problem has no variables")]
    NoVariables,
    #[error("problem has no constraints")]
    NoConstraints,
    #[error("{what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("constraint `{0}` references a variable index out of range")]
    VariableIndex(String),
    #[error("{0} must be finite")]
    NonFinite(&'static str),
    #[error("relaxation epsilon must be finite and strictly positive, got {0}")]
    Epsilon(f64),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("quadratic form: {0}")]
    Quadratic(String),
}

/// A named constraint `expr <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub expr: Expr,
}

impl Constraint {
    pub fn new(name: impl Into<String>, expr: Expr) -> Self {
        Constraint {
            name: name.into(),
            expr,
        }
    }
}

/// Largest constraint value at `x` together with the lowest index attaining it.
pub fn max_constraint(constraints: &[Constraint], x: &[f64]) -> Result<(f64, usize), EvalError> {
    let mut best = (f64::NEG_INFINITY, 0);
    for (j, c) in constraints.iter().enumerate() {
        let v = c.expr.eval(x)?;
        if v > best.0 {
            best = (v, j);
        }
    }
    Ok(best)
}

/// `min cᵀx` over `{ g_j(x) <= 0 } ∩ [l, u]`, with optional integrality.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    names: Vec<String>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    integer: Vec<bool>,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    interior_point: Option<Vec<f64>>,
}

/// Variable declaration: name, bounds and integrality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    #[serde(default)]
    pub integer: bool,
}

impl VariableSpec {
    pub fn continuous(name: &str, lb: f64, ub: f64) -> Self {
        VariableSpec {
            name: name.to_string(),
            lb,
            ub,
            integer: false,
        }
    }

    pub fn integer(name: &str, lb: f64, ub: f64) -> Self {
        VariableSpec {
            integer: true,
            ..Self::continuous(name, lb, ub)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintSpec {
    name: String,
    expr: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    variables: Vec<VariableSpec>,
    objective: Vec<f64>,
    constraints: Vec<ConstraintSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    interior_point: Option<Vec<f64>>,
}

fn valid_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Problem {
    pub fn new(
        variables: Vec<VariableSpec>,
        objective: Vec<f64>,
        constraints: Vec<Constraint>,
        interior_point: Option<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        if variables.is_empty() {
            return Err(ModelError::NoVariables);
        }
        let n = variables.len();
        for (i, v) in variables.iter().enumerate() {
            if !valid_identifier(&v.name) {
                return Err(ModelError::VariableName(v.name.clone()));
            }
            if variables[..i].iter().any(|w| w.name == v.name) {
                return Err(ModelError::DuplicateVariable(v.name.clone()));
            }
            if !(v.lb.is_finite() && v.ub.is_finite() && v.lb <= v.ub) {
                return Err(ModelError::Bounds {
                    name: v.name.clone(),
                    lower: v.lb,
                    upper: v.ub,
                });
            }
        }
        if objective.len() != n {
            return Err(ModelError::Dimension {
                what: "objective",
                expected: n,
                got: objective.len(),
            });
        }
        if objective.iter().any(|c| !c.is_finite()) {
            return Err(ModelError::NonFinite("objective"));
        }
        if constraints.is_empty() {
            return Err(ModelError::NoConstraints);
        }
        for c in &constraints {
            if c.expr.max_var().is_some_and(|m| m >= n) {
                return Err(ModelError::VariableIndex(c.name.clone()));
            }
        }
        if let Some(p) = &interior_point {
            if p.len() != n {
                return Err(ModelError::Dimension {
                    what: "interior_point",
                    expected: n,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite("interior_point"));
            }
        }
        Ok(Problem {
            names: variables.iter().map(|v| v.name.clone()).collect(),
            lower: variables.iter().map(|v| v.lb).collect(),
            upper: variables.iter().map(|v| v.ub).collect(),
            integer: variables.iter().map(|v| v.integer).collect(),
            objective,
            constraints,
            interior_point,
        })
    }

    /// Parse the JSON problem format.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: ProblemFile = serde_json::from_str(text)?;
        let names: Vec<&str> = file.variables.iter().map(|v| v.name.as_str()).collect();
        let constraints = file
            .constraints
            .iter()
            .map(|c| {
                expr::parse(&c.expr, &names)
                    .map(|e| Constraint::new(c.name.clone(), e))
                    .map_err(|source| ModelError::Expression {
                        constraint: c.name.clone(),
                        source,
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Problem::new(
            file.variables,
            file.objective,
            constraints,
            file.interior_point,
        )
    }

    pub fn to_json(&self) -> String {
        let file = ProblemFile {
            variables: self.variable_specs(),
            objective: self.objective.clone(),
            constraints: self
                .constraints
                .iter()
                .map(|c| ConstraintSpec {
                    name: c.name.clone(),
                    expr: c.expr.render(&self.names),
                })
                .collect(),
            interior_point: self.interior_point.clone(),
        };
        serde_json::to_string_pretty(&file).expect("problem serializes")
    }

    pub fn variable_specs(&self) -> Vec<VariableSpec> {
        (0..self.n())
            .map(|i| VariableSpec {
                name: self.names[i].clone(),
                lb: self.lower[i],
                ub: self.upper[i],
                integer: self.integer[i],
            })
            .collect()
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn integrality(&self) -> &[bool] {
        &self.integer
    }

    pub fn has_integers(&self) -> bool {
        self.integer.iter().any(|&b| b)
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn interior_point(&self) -> Option<&[f64]> {
        self.interior_point.as_deref()
    }

    pub fn with_interior_point(mut self, point: Option<Vec<f64>>) -> Result<Self, ModelError> {
        if let Some(p) = &point {
            if p.len() != self.n() {
                return Err(ModelError::Dimension {
                    what: "interior_point",
                    expected: self.n(),
                    got: p.len(),
                });
            }
        }
        self.interior_point = point;
        Ok(self)
    }

    /// Copy with replaced variable bounds; bounds must remain valid.
    pub fn with_bounds(&self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ModelError> {
        let mut specs = self.variable_specs();
        for (i, s) in specs.iter_mut().enumerate() {
            s.lb = lower[i];
            s.ub = upper[i];
        }
        Problem::new(
            specs,
            self.objective.clone(),
            self.constraints.clone(),
            self.interior_point.clone(),
        )
    }

    pub fn in_bounds(&self, x: &[f64]) -> bool {
        x.len() == self.n()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// `f(x) = max_j g_j(x)` and the lowest attaining index.
    pub fn max_constraint(&self, x: &[f64]) -> Result<(f64, usize), EvalError> {
        max_constraint(&self.constraints, x)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<Problem, ModelError> {
    Problem::from_json(&fs::read_to_string(path)?)
}

pub fn save_problem(problem: &Problem, path: impl AsRef<Path>) -> Result<(), ModelError> {
    fs::write(path, problem.to_json())?;
    Ok(())
}

/// Replace every `g_j <= 0` by `g_j - eps <= 0`, i.e. the set `{ g_j <= eps }`.
pub fn epsilon_relax(problem: &Problem, eps: f64) -> Result<Problem, ModelError> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(ModelError::Epsilon(eps));
    }
    let mut relaxed = problem.clone();
    for c in &mut relaxed.constraints {
        c.expr = Expr::add(c.expr.clone(), Expr::Const(-eps));
    }
    Ok(relaxed)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InteriorPointError {
    #[error("start point is outside the variable bounds")]
    StartOutOfBounds,
    #[error("constraint evaluation failed at the start point: {0}")]
    Eval(#[from] EvalError),
    #[error(
        "no strictly interior point found after {steps} steps (best max constraint {best:.3e}); \
         supply an interior point or relax the problem with epsilon_relax"
    )]
    NotFound { steps: usize, best: f64 },
}

/// Subgradient descent on `f = max_j g_j`, projected onto the variable box.
///
/// Returns the best point seen, which always satisfies `f < 0`. A start that
/// is already strictly interior is returned unchanged.
pub fn find_interior_point(
    problem: &Problem,
    start: &[f64],
    max_steps: usize,
) -> Result<Vec<f64>, InteriorPointError> {
    if !problem.in_bounds(start) {
        return Err(InteriorPointError::StartOutOfBounds);
    }
    let (f0, _) = problem.max_constraint(start)?;
    if f0 < 0.0 {
        return Ok(start.to_vec());
    }
    let width = problem
        .lower
        .iter()
        .zip(&problem.upper)
        .map(|(l, u)| u - l)
        .fold(0.0f64, f64::max);
    let base_step = if width > 0.0 { 0.1 * width } else { 1.0 };

    let mut x = start.to_vec();
    let mut best = (f0, x.clone());
    for k in 0..max_steps {
        let (_, j) = match problem.max_constraint(&x) {
            Ok(v) => v,
            Err(_) => break,
        };
        let grad = match problem.constraints[j].expr.eval_grad(&x) {
            Ok(r) => r.gradient,
            Err(_) => break,
        };
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        let mut step = base_step / ((k + 1) as f64).sqrt();
        let mut moved = false;
        for _ in 0..30 {
            let cand: Vec<f64> = x
                .iter()
                .zip(&grad)
                .enumerate()
                .map(|(i, (xi, gi))| {
                    (xi - step * gi / norm).clamp(problem.lower[i], problem.upper[i])
                })
                .collect();
            match problem.max_constraint(&cand) {
                Ok((fc, _)) => {
                    if fc < best.0 {
                        best = (fc, cand.clone());
                    }
                    x = cand;
                    moved = true;
                    break;
                }
                Err(_) => step *= 0.5,
            }
        }
        if !moved {
            break;
        }
    }
    let (fb, xb) = best;
    if fb < 0.0 {
        debug_assert!(problem
            .max_constraint(&xb)
            .map(|v| v.0 < 0.0)
            .unwrap_or(false));
        Ok(xb)
    } else {
        Err(InteriorPointError::NotFound {
            steps: max_steps,
            best: fb,
        })
    }
}

/// Tolerances and limits shared by the cutting-plane solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Termination threshold on `max_j g_j` at the relaxation optimum.
    pub eps_feas: f64,
    /// Shift used when the caller asks for the ε-relaxed problem.
    pub eps_relax: f64,
    /// Bisection interval width at which the boundary line search stops.
    pub line_search_tol: f64,
    /// `g_j(x̂) >= -activity_tol` marks constraint `j` active.
    pub activity_tol: f64,
    /// Limit on relaxation solves.
    pub max_iters: usize,
    pub interior_point: Option<Vec<f64>>,
    pub line_search_max_steps: usize,
    pub max_nodes: usize,
    pub interior_search_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps_feas: 1e-6,
            eps_relax: 1e-6,
            line_search_tol: 1e-12,
            activity_tol: 1e-7,
            max_iters: 10_000,
            interior_point: None,
            line_search_max_steps: 200,
            max_nodes: 10_000,
            interior_search_steps: 2_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let tols = [
            ("eps_feas", self.eps_feas),
            ("eps_relax", self.eps_relax),
            ("line_search_tol", self.line_search_tol),
            ("activity_tol", self.activity_tol),
        ];
        for (name, v) in tols {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::Config(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        if self.max_iters == 0 || self.line_search_max_steps == 0 || self.max_nodes == 0 {
            return Err(ModelError::Config("iteration limits must be >= 1".into()));
        }
        Ok(())
    }
}

/// `g(x) = xᵀAx + bᵀx + c0` with symmetric `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c0: f64,
}

impl QuadraticForm {
    /// `a` is symmetrized as `(A + Aᵀ) / 2`.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c0: f64) -> Result<Self, ModelError> {
        if !a.is_square() {
            return Err(ModelError::Quadratic("A must be square".into()));
        }
        if a.nrows() != b.len() {
            return Err(ModelError::Quadratic(format!(
                "A is {}x{} but b has length {}",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) || !c0.is_finite() {
            return Err(ModelError::Quadratic("entries must be finite".into()));
        }
        let a = (&a + a.transpose()) * 0.5;
        Ok(QuadraticForm { a, b, c0 })
    }

    pub fn from_rows(rows: &[Vec<f64>], b: &[f64], c0: f64) -> Result<Self, ModelError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(ModelError::Quadratic("A must be square".into()));
        }
        let a = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        QuadraticForm::new(a, DVector::from_column_slice(b), c0)
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        (x.transpose() * &self.a * &x)[0] + self.b.dot(&x) + self.c0
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        (&self.a * &x * 2.0 + &self.b).iter().copied().collect()
    }

    /// Smallest eigenvalue of `A`.
    pub fn min_eigenvalue(&self) -> f64 {
        if self.n() == 0 {
            return 0.0;
        }
        self.a
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Expression tree over variables `0..n`, dropping zero coefficients.
    pub fn to_expr(&self) -> Expr {
        let n = self.n();
        let mut terms = Vec::new();
        for i in 0..n {
            let aii = self.a[(i, i)];
            if aii != 0.0 {
                terms.push(Expr::mul(Expr::Const(aii), Expr::pow(Expr::Var(i), 2.0)));
            }
            for j in i + 1..n {
                let aij = 2.0 * self.a[(i, j)];
                if aij != 0.0 {
                    terms.push(Expr::mul(
                        Expr::Const(aij),
                        Expr::mul(Expr::Var(i), Expr::Var(j)),
                    ));
                }
            }
        }
        for i in 0..n {
            if self.b[i] != 0.0 {
                terms.push(Expr::mul(Expr::Const(self.b[i]), Expr::Var(i)));
            }
        }
        terms.push(Expr::Const(self.c0));
        let mut it = terms.into_iter();
        let first = it.next().expect("at least the constant term");
        it.fold(first, Expr::add)
    }
}
