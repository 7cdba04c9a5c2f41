//! Command-line front end.
//!
//! Exit codes: 0 success (including iteration limits), 1 infeasible, 2 usage
//! or input error, 3 numerical or algorithmic failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::lp::{Cut, CutKind, CutOrigin};
use crate::model::{epsilon_relax, load_problem, ModelError, Problem, QuadraticForm, SolverConfig};
use crate::separation::{
    check_supporting, classify_quadratic, esh_cut, kelley_cut, line_search_boundary,
    SeparationError, SupportProbe,
};
use crate::solve::{
    check_esh_kcp_equivalence, resolve_interior_point, solve_bnb, Algorithm, SolveError,
    SolveStatus,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "gaugecut",
    version,
    about = "Cutting-plane solver for convex programs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run Kelley or ESH (with branch-and-bound for integer variables)
    Solve(SolveArgs),
    /// Generate the cuts that separate a point
    Separate(SeparateArgs),
    /// Search for a point where a cut holds with equality
    CheckSupport(CheckSupportArgs),
    /// Classify gradient cuts of a convex quadratic xᵀAx + bᵀx + c0 <= 0
    ClassifyQuadratic(ClassifyArgs),
    /// Check an ESH cut against the gauge subgradient inequality
    Equivalence(EquivalenceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Kelley,
    Esh,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Kelley => Algorithm::Kelley,
            AlgorithmArg::Esh => Algorithm::Esh,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraceFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Tolerances {
    /// Termination threshold on max_j g_j
    #[arg(long)]
    pub eps_feas: Option<f64>,
    #[arg(long)]
    pub line_search_tol: Option<f64>,
    #[arg(long)]
    pub activity_tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub max_nodes: Option<usize>,
    /// Interior point a,b,...; overrides the problem file
    #[arg(long, allow_hyphen_values = true)]
    pub interior_point: Option<Vector>,
}

impl Tolerances {
    pub fn config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::default();
        if let Some(v) = self.eps_feas {
            cfg.eps_feas = v;
        }
        if let Some(v) = self.line_search_tol {
            cfg.line_search_tol = v;
        }
        if let Some(v) = self.activity_tol {
            cfg.activity_tol = v;
        }
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.max_nodes {
            cfg.max_nodes = v;
        }
        cfg.interior_point = self.interior_point.clone().map(|v| v.0);
        cfg
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub problem: PathBuf,
    #[arg(long, value_enum, default_value = "esh")]
    pub algorithm: AlgorithmArg,
    /// Write the iteration trace here
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: TraceFormat,
    /// Solve the ε-relaxed problem g_j <= eps instead
    #[arg(long)]
    pub relax: Option<f64>,
    #[command(flatten)]
    pub tol: Tolerances,
}

#[derive(Debug, Args)]
pub struct SeparateArgs {
    pub problem: PathBuf,
    /// Point to separate, a,b,...
    #[arg(long, allow_hyphen_values = true)]
    pub point: Vector,
    #[arg(long, value_enum, default_value = "kelley")]
    pub method: AlgorithmArg,
    /// Write the cuts as JSON here
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub tol: Tolerances,
}

#[derive(Debug, Args)]
pub struct CheckSupportArgs {
    pub problem: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Vector,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    /// Candidate witness to try before searching
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<Vector>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub tol: Tolerances,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Rows separated by ';', entries by spaces
    #[arg(long = "A", allow_hyphen_values = true)]
    pub a: Matrix,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Vector,
    #[arg(long, allow_hyphen_values = true)]
    pub c0: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EquivalenceArgs {
    pub problem: PathBuf,
    /// Infeasible point x̄, a,b,...
    #[arg(long, allow_hyphen_values = true)]
    pub point: Vector,
    /// Sample grid points per axis over the variable box
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub tol: Tolerances,
}

/// Numbers separated by commas and/or whitespace.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(pub Vec<f64>);

impl FromStr for Vector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_vector(s).map(Vector)
    }
}

/// Square matrix, rows separated by ';'.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix(pub Vec<Vec<f64>>);

impl FromStr for Matrix {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_matrix(s).map(Matrix)
    }
}

pub fn parse_vector(s: &str) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| format!("invalid number `{t}`"))
        })
        .collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err("empty vector".into());
    }
    Ok(v)
}

pub fn parse_matrix(s: &str) -> Result<Vec<Vec<f64>>, String> {
    let rows: Vec<Vec<f64>> = s.split(';').map(parse_vector).collect::<Result<_, _>>()?;
    if rows.iter().any(|r| r.len() != rows.len()) {
        return Err(format!("matrix must be square, got {} rows", rows.len()));
    }
    Ok(rows)
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.to_string(),
        }
    }

    fn numerical(message: impl ToString) -> Self {
        Failure {
            code: EXIT_NUMERICAL,
            message: message.to_string(),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::input(e)
    }
}

impl From<SeparationError> for Failure {
    fn from(e: SeparationError) -> Self {
        use SeparationError::*;
        match e {
            NotViolated { .. }
            | NotInterior { .. }
            | PointFeasible { .. }
            | Dimension { .. }
            | DegenerateSegment
            | TooFewSamples(_)
            | NotPsd(_)
            | EmptySublevelSet(_) => Failure::input(e),
            _ => Failure::numerical(e),
        }
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Model(m) => m.into(),
            SolveError::Separation(s) => s.into(),
            SolveError::Precondition(_) => Failure::input(e),
            SolveError::Lp(_) | SolveError::NoInteriorPoint(_) => Failure::numerical(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::input(e)
    }
}

fn write_json<T: Serialize>(path: &Option<PathBuf>, value: &T) -> Result<(), Failure> {
    if let Some(p) = path {
        let text = serde_json::to_string_pretty(value).expect("serializable output");
        fs::write(p, text + "\n")?;
    }
    Ok(())
}

fn configured(tol: &Tolerances) -> Result<SolverConfig, Failure> {
    let cfg = tol.config();
    cfg.validate()?;
    Ok(cfg)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", parts.join(", "))
}

fn run_solve(a: &SolveArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let cfg = configured(&a.tol)?;
    let mut problem = load_problem(&a.problem)?;
    if let Some(eps) = a.relax {
        problem = epsilon_relax(&problem, eps)?;
    }
    let trace = solve_bnb(&problem, &cfg, a.algorithm.into())?;
    if let Some(path) = &a.trace {
        let text = match a.format {
            TraceFormat::Json => trace.to_json() + "\n",
            TraceFormat::Csv => trace.to_csv(),
        };
        fs::write(path, text)?;
    }
    writeln!(out, "{}", trace.summary())?;
    if let Some(x) = &trace.final_point {
        writeln!(out, "x = {}", fmt_vec(x))?;
    }
    if let Some(m) = &trace.message {
        writeln!(out, "message: {m}")?;
    }
    Ok(match trace.status {
        SolveStatus::OptimalEps | SolveStatus::IterationLimit => EXIT_OK,
        SolveStatus::Infeasible => EXIT_INFEASIBLE,
        SolveStatus::Error => EXIT_NUMERICAL,
    })
}

/// Cuts produced by `separate`, exactly as the library returns them.
pub fn separate_cuts(
    problem: &Problem,
    cfg: &SolverConfig,
    point: &[f64],
    method: Algorithm,
) -> Result<Vec<Cut>, SolveError> {
    if point.len() != problem.n() {
        return Err(SeparationError::Dimension {
            expected: problem.n(),
            got: point.len(),
        }
        .into());
    }
    let constraints = problem.constraints();
    match method {
        Algorithm::Kelley => {
            let mut cuts = Vec::new();
            for c in constraints {
                if c.expr.eval(point).map_err(SeparationError::from)? > 0.0 {
                    cuts.push(kelley_cut(c, point)?);
                }
            }
            if cuts.is_empty() {
                let (value, j) = problem
                    .max_constraint(point)
                    .map_err(SeparationError::from)?;
                return Err(SeparationError::NotViolated {
                    constraint: constraints[j].name.clone(),
                    value,
                }
                .into());
            }
            Ok(cuts)
        }
        Algorithm::Esh => {
            let x0 = resolve_interior_point(problem, cfg)?;
            let gr = line_search_boundary(constraints, &x0, point, cfg)?;
            Ok(esh_cut(constraints, &gr)?)
        }
    }
}

fn run_separate(a: &SeparateArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let cfg = configured(&a.tol)?;
    let problem = load_problem(&a.problem)?;
    let cuts = separate_cuts(&problem, &cfg, &a.point.0, a.method.into())?;
    for c in &cuts {
        writeln!(
            out,
            "cut {} `{}`: alpha={} beta={} (generated at {})",
            serde_json::to_string(&c.origin().kind)
                .unwrap_or_default()
                .trim_matches('"'),
            c.origin().constraint,
            fmt_vec(c.alpha()),
            c.beta(),
            fmt_vec(&c.origin().point)
        )?;
    }
    write_json(&a.output, &cuts)?;
    Ok(EXIT_OK)
}

fn run_check_support(a: &CheckSupportArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let cfg = configured(&a.tol)?;
    let problem = load_problem(&a.problem)?;
    if a.alpha.0.len() != problem.n() {
        return Err(Failure::input(format!(
            "alpha has length {}, expected {}",
            a.alpha.0.len(),
            problem.n()
        )));
    }
    let origin = CutOrigin {
        kind: CutKind::User,
        constraint: String::new(),
        point: a.point.clone().map(|v| v.0).unwrap_or_default(),
    };
    let cut = Cut::new(a.alpha.0.clone(), a.beta, origin).map_err(Failure::input)?;
    let interior = resolve_interior_point(&problem, &cfg).ok();
    let probe = SupportProbe {
        interior,
        seed: a.seed,
        ..SupportProbe::default()
    };
    let verdict = check_supporting(problem.constraints(), &cut, &probe)?;
    let witness = verdict
        .witness
        .as_deref()
        .map_or("none".to_string(), fmt_vec);
    writeln!(
        out,
        "supporting={} gap={:e} witness={}",
        verdict.supporting, verdict.max_violation_gap, witness
    )?;
    write_json(&a.output, &verdict)?;
    Ok(EXIT_OK)
}

fn run_classify(a: &ClassifyArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let q = QuadraticForm::from_rows(&a.a.0, &a.b.0, a.c0)?;
    let c = classify_quadratic(&q)?;
    writeln!(out, "{}", c.verdict)?;
    write_json(&a.output, &c)?;
    Ok(EXIT_OK)
}

fn run_equivalence(a: &EquivalenceArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let cfg = configured(&a.tol)?;
    let problem = load_problem(&a.problem)?;
    let report = check_esh_kcp_equivalence(&problem, &cfg, &a.point.0, a.grid)?;
    writeln!(
        out,
        "passed={} gauge={} boundary={}",
        report.passed,
        report.gauge_value,
        fmt_vec(&report.boundary_point)
    )?;
    for c in &report.cuts {
        writeln!(
            out,
            "  `{}`: alpha={} checked={} skipped={} worst_excess={:e}",
            c.constraint,
            fmt_vec(&c.alpha),
            c.check.checked,
            c.check.skipped,
            c.check.worst_excess
        )?;
    }
    write_json(&a.output, &report)?;
    Ok(if report.passed {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    })
}

/// Parse `args` (program name first) and execute, writing to the given streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => run_solve(a, out),
        Command::Separate(a) => run_separate(a, out),
        Command::CheckSupport(a) => run_check_support(a, out),
        Command::ClassifyQuadratic(a) => run_classify(a, out),
        Command::Equivalence(a) => run_equivalence(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

pub fn run() -> i32 {
    run_with(
        std::env::args_os(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    )
}
