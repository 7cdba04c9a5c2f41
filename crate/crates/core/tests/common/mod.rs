#![allow(dead_code)]

use std::path::PathBuf;

use gaugecut::model::{load_problem, Constraint, Problem, QuadraticForm, VariableSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const FIXTURES: &[&str] = &[
    "circle.json",
    "circle_exp.json",
    "circle_integer.json",
    "thin_slab.json",
    "infeasible.json",
    "lens.json",
    "parabola.json",
];

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> Problem {
    load_problem(fixture_path(name)).unwrap()
}

pub fn uniform_in_box(rng: &mut ChaCha8Rng, p: &Problem) -> Vec<f64> {
    p.lower()
        .iter()
        .zip(p.upper())
        .map(|(l, u)| if l < u { rng.random_range(*l..*u) } else { *l })
        .collect()
}

/// Rejection samples of feasible points in the variable box.
pub fn feasible_samples(rng: &mut ChaCha8Rng, p: &Problem, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        assert!(tries < 10_000_000, "feasible region too small to sample");
        let x = uniform_in_box(rng, p);
        if matches!(p.max_constraint(&x), Ok((v, _)) if v <= 0.0) {
            out.push(x);
        }
    }
    out
}

pub fn numbered_vars(n: usize, lo: f64, hi: f64) -> Vec<VariableSpec> {
    (0..n)
        .map(|i| VariableSpec::continuous(&format!("x{i}"), lo, hi))
        .collect()
}

/// `A = RᵀR` with `R` of shape `rank × n`, entries uniform in `[-1, 1]`.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> DMatrix<f64> {
    let r = DMatrix::from_fn(rank, n, |_, _| rng.random_range(-1.0..1.0));
    r.transpose() * r
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

/// Convex quadratic with `g(0) = c0 < 0`, so the origin is interior.
pub fn random_quadratic_with_interior_origin(rng: &mut ChaCha8Rng, n: usize) -> QuadraticForm {
    let rank = rng.random_range(1..=n);
    let a = random_psd(rng, n, rank);
    let b = random_vector(rng, n);
    let c0 = -rng.random_range(0.2..1.5);
    QuadraticForm::new(a, b, c0).unwrap()
}

pub fn quadratic_problem(q: &QuadraticForm, half_width: f64) -> Problem {
    let n = q.n();
    Problem::new(
        numbered_vars(n, -half_width, half_width),
        vec![-1.0; n],
        vec![Constraint::new("quadratic", q.to_expr())],
        Some(vec![0.0; n]),
    )
    .unwrap()
}
