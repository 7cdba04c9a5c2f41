//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

mod common;

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use gaugecut::model::{Problem, QuadraticForm, SolverConfig};
use gaugecut::separation::{
    affine_on_segment, classify_quadratic, esh_cut, gauge, kelley_cut, line_search_boundary,
    GaugeSamples, QuadraticVerdict,
};
use gaugecut::solve::{
    check_esh_kcp_equivalence_on, grid_samples, solve_bnb, solve_esh, solve_kelley, Algorithm,
    SolveStatus, SolveTrace,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn circle() -> Problem {
    fixture("circle.json")
}

fn origin_cfg() -> SolverConfig {
    SolverConfig {
        interior_point: Some(vec![0.0, 0.0]),
        ..SolverConfig::default()
    }
}

fn kelley_cut_on_circle() -> Outcome {
    let p = circle();
    let cut = kelley_cut(&p.constraints()[0], &[1.5, 1.5]).map_err(|e| e.to_string())?;
    let err = (cut.alpha()[0] - 1.0)
        .abs()
        .max((cut.alpha()[1] - 1.0).abs())
        .max((cut.beta() - 11.0 / 6.0).abs());
    ensure(
        err <= 1e-12,
        format!("alpha={:?} beta={} err={err:.1e}", cut.alpha(), cut.beta()),
    )
}

fn esh_cut_on_circle() -> Outcome {
    let p = circle();
    let gr = line_search_boundary(p.constraints(), &[0.0, 0.0], &[1.5, 1.5], &origin_cfg())
        .map_err(|e| e.to_string())?;
    let point_err = gr
        .boundary_point
        .iter()
        .fold(0.0f64, |m, v| m.max((v - FRAC_1_SQRT_2).abs()));
    let cuts = esh_cut(p.constraints(), &gr).map_err(|e| e.to_string())?;
    let cut = cuts.first().ok_or("no cut")?;
    let cut_err = (cut.alpha()[0] - 1.0)
        .abs()
        .max((cut.alpha()[1] - 1.0).abs())
        .max((cut.beta() - SQRT_2).abs());
    ensure(
        cuts.len() == 1 && point_err <= 1e-8 && cut_err <= 1e-7,
        format!("x̂ err={point_err:.1e} cut err={cut_err:.1e}"),
    )
}

fn gauge_on_circle() -> Outcome {
    let p = circle();
    let cfg = origin_cfg();
    let phi = |x: &[f64]| gauge(p.constraints(), &[0.0, 0.0], x, &cfg).map_err(|e| e.to_string());
    let base = phi(&[1.5, 1.5])?;
    let mut worst = (base - 4.5f64.sqrt()).abs();
    if worst > 1e-7 {
        return Err(format!("φ(1.5, 1.5) = {base}"));
    }
    for t in [0.5, 2.0, 10.0] {
        worst = worst.max((phi(&[1.5 * t, 1.5 * t])? - t * base).abs());
    }
    ensure(worst <= 1e-7, format!("φ={base:.12} worst err={worst:.1e}"))
}

/// Check every cut recorded in an ESH run against one shared gauge grid.
/// Returns the number of cuts and the number of unbracketed grid points.
fn every_esh_cut_is_a_gauge_subgradient(
    p: &Problem,
    cfg: &SolverConfig,
) -> Result<(usize, usize), String> {
    let trace = solve_esh(p, cfg).map_err(|e| e.to_string())?;
    if trace.status != SolveStatus::OptimalEps {
        return Err(format!("ESH run ended with {}", trace.status));
    }
    let x0 = trace.interior_point.clone().ok_or("no interior point")?;
    let points = grid_samples(p.lower(), p.upper(), 21);
    let samples =
        GaugeSamples::new(p.constraints(), &x0, points, cfg).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for rec in trace.iterations.iter().filter(|r| !r.cuts.is_empty()) {
        let report =
            check_esh_kcp_equivalence_on(p, cfg, &rec.x, &samples).map_err(|e| e.to_string())?;
        for cut in &rec.cuts {
            if !report.cuts.iter().any(|c| c.cut.same_hyperplane(cut)) {
                return Err(format!(
                    "iteration {}: recorded cut not reproduced",
                    rec.iteration
                ));
            }
        }
        for c in &report.cuts {
            if !c.check.passed {
                return Err(format!(
                    "iteration {}: excess {:.2e} at {:?}",
                    rec.iteration, c.check.worst_excess, c.check.worst_point
                ));
            }
            checked += 1;
        }
    }
    let skipped = samples.values.iter().filter(|v| v.is_none()).count();
    Ok((checked, skipped))
}

fn equivalence_harness() -> Outcome {
    let cfg = SolverConfig::default();
    let (mut cuts, mut skipped) = every_esh_cut_is_a_gauge_subgradient(&circle(), &origin_cfg())
        .map_err(|e| format!("circle: {e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..20 {
        let n = 2 + i % 3;
        let q = random_quadratic_with_interior_origin(&mut rng, n);
        let p = quadratic_problem(&q, 3.0);
        let (c, s) = every_esh_cut_is_a_gauge_subgradient(&p, &cfg)
            .map_err(|e| format!("quadratic {i} (n={n}): {e}"))?;
        cuts += c;
        skipped += s;
    }
    Ok(format!(
        "{cuts} cuts checked on 21^n grids ({skipped} grid points with unbounded rays skipped)"
    ))
}

/// PSD quadratic whose linear term lies in `range(A)` or not, by request.
fn classifier_instance(rng: &mut ChaCha8Rng, n: usize, in_range: bool) -> QuadraticForm {
    let rank = if in_range {
        rng.random_range(1..=n)
    } else {
        rng.random_range(0..n)
    };
    let a = if rank == 0 {
        DMatrix::zeros(n, n)
    } else {
        random_psd(rng, n, rank)
    };
    let z0 = random_vector(rng, n);
    let u = rng.random_range(0.0..1.0);
    if in_range {
        let b = &a * &z0;
        let c0 = 0.25 * z0.dot(&(&a * &z0)) - 1.0 - u;
        QuadraticForm::new(a, b, c0).unwrap()
    } else {
        let kernel = kernel_basis(&a);
        let mut k = DVector::zeros(n);
        for v in &kernel {
            k += v * rng.random_range(-1.0..1.0);
        }
        // keep the kernel component away from zero
        let k = &k / k.norm() * rng.random_range(0.5..1.5);
        QuadraticForm::new(a.clone(), &a * z0 + k, u - 0.5).unwrap()
    }
}

fn kernel_basis(a: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let eig = a.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    (0..a.ncols())
        .filter(|&i| eig.eigenvalues[i].abs() <= 1e-9 * scale)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect()
}

/// Infeasible point: a random direction scaled up until `g > 0`.
fn infeasible_point(rng: &mut ChaCha8Rng, q: &QuadraticForm) -> Vec<f64> {
    let w = random_vector(rng, q.n());
    for s in (0..60).map(|k| 2f64.powi(k)) {
        for sign in [1.0, -1.0] {
            let x: Vec<f64> = w.iter().map(|v| sign * s * v).collect();
            if q.eval(&x) > 0.0 {
                return x;
            }
        }
    }
    panic!("quadratic is nonpositive along a random line");
}

/// Brute-force verdict: some kernel direction makes `g` affine along a
/// segment from `x̄` that ends inside the sublevel set.
fn oracle_verdict(q: &QuadraticForm, xbar: &[f64]) -> QuadraticVerdict {
    let expr = q.to_expr();
    let g = q.eval(xbar);
    for v in kernel_basis(q.a()) {
        let slope = q.b().dot(&v);
        if slope.abs() <= 1e-8 {
            continue;
        }
        let t = -2.0 * g / slope;
        let y: Vec<f64> = xbar.iter().zip(v.iter()).map(|(x, d)| x + t * d).collect();
        if affine_on_segment(&expr, xbar, &y, 9).unwrap_or(false) && q.eval(&y) <= 0.0 {
            return QuadraticVerdict::AlwaysSupporting;
        }
    }
    QuadraticVerdict::NeverSupportingFromInfeasible
}

fn classifier_agrees_with_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut agree = 0;
    let mut singular = 0;
    let mut outside = 0;
    for i in 0..50 {
        let n = 1 + i % 4;
        let in_range = rng.random_bool(0.5);
        let q = classifier_instance(&mut rng, n, in_range);
        let xbar = infeasible_point(&mut rng, &q);
        let got = classify_quadratic(&q).map_err(|e| format!("case {i}: {e}"))?;
        let want = oracle_verdict(&q, &xbar);
        if got.verdict == want {
            agree += 1;
        } else {
            println!("  case {i}: classifier {} oracle {want}", got.verdict);
        }
        singular += usize::from(!kernel_basis(q.a()).is_empty());
        outside += usize::from(!in_range);
    }
    ensure(
        agree == 50,
        format!("{agree}/50 agree ({singular} singular, {outside} with b outside range)"),
    )
}

fn final_objective(t: &SolveTrace) -> Result<f64, String> {
    t.final_objective
        .ok_or_else(|| format!("status {}", t.status))
}

fn last_violation(t: &SolveTrace) -> f64 {
    t.iterations
        .last()
        .and_then(|r| r.violation)
        .unwrap_or(f64::INFINITY)
}

fn convex_convergence() -> Outcome {
    let p = circle();
    let cfg = origin_cfg();
    let kelley = solve_kelley(&p, &cfg).map_err(|e| e.to_string())?;
    let esh = solve_esh(&p, &cfg).map_err(|e| e.to_string())?;
    let mut ok = true;
    for t in [&kelley, &esh] {
        ok &= t.status == SolveStatus::OptimalEps
            && (final_objective(t)? + SQRT_2).abs() <= 1e-3
            && last_violation(t) <= 1e-6;
    }
    ok &= esh.iterations.len() <= kelley.iterations.len();
    ensure(
        ok,
        format!(
            "kelley {:.6} in {} iterations, esh {:.6} in {} iterations",
            final_objective(&kelley)?,
            kelley.iterations.len(),
            final_objective(&esh)?,
            esh.iterations.len()
        ),
    )
}

fn nonconvex_representation() -> Outcome {
    let p = fixture("circle_exp.json");
    let t = solve_esh(&p, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let objective = final_objective(&t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let points = feasible_samples(&mut rng, &p, 1000);
    let worst = t
        .cuts()
        .flat_map(|c| points.iter().map(move |x| c.violation(x)))
        .fold(f64::NEG_INFINITY, f64::max);
    ensure(
        (objective + SQRT_2).abs() <= 1e-3 && worst <= 1e-9,
        format!(
            "objective {objective:.6}, {} cuts, worst violation {worst:.1e}",
            t.total_cuts()
        ),
    )
}

fn support_gap_contrast() -> Outcome {
    let p = circle();
    let xbar = [10.0, 10.0];
    let gap = |alpha: &[f64], beta: f64| beta - alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
    let kelley = kelley_cut(&p.constraints()[0], &xbar).map_err(|e| e.to_string())?;
    let gr = line_search_boundary(p.constraints(), &[0.0, 0.0], &xbar, &origin_cfg())
        .map_err(|e| e.to_string())?;
    let esh = esh_cut(p.constraints(), &gr).map_err(|e| e.to_string())?;
    let kelley_gap = gap(kelley.alpha(), kelley.beta());
    let esh_gap = gap(esh[0].alpha(), esh[0].beta());
    ensure(
        kelley_gap >= 1e-3 && esh_gap.abs() <= 1e-7,
        format!("kelley gap {kelley_gap:.6}, esh gap {esh_gap:.1e}"),
    )
}

fn integer_circle() -> Outcome {
    let p = fixture("circle_integer.json");
    let t = solve_bnb(&p, &SolverConfig::default(), Algorithm::Esh).map_err(|e| e.to_string())?;
    let objective = final_objective(&t)?;
    let x = t.final_point.clone().ok_or("no incumbent")?;
    let lattice_best = (-10..=10)
        .flat_map(|i| (-10..=10).map(move |j| [i as f64, j as f64]))
        .filter(|x| p.max_constraint(x).is_ok_and(|(v, _)| v <= 0.0))
        .map(|x| p.objective_value(&x))
        .fold(f64::INFINITY, f64::min);
    ensure(
        (objective + 1.0).abs() <= 1e-9
            && (objective - lattice_best).abs() <= 1e-9
            && (x == [1.0, 0.0] || x == [0.0, 1.0]),
        format!(
            "objective {objective} at {x:?}, lattice {lattice_best}, {} nodes",
            t.nodes
        ),
    )
}

fn gradients_match_finite_differences() -> Outcome {
    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for name in FIXTURES {
        let p = fixture(name);
        for _ in 0..100 {
            let x = uniform_in_box(&mut rng, &p);
            for c in p.constraints() {
                let r = c.expr.eval_grad(&x).map_err(|e| format!("{name}: {e}"))?;
                let scale = r.gradient.iter().fold(1.0f64, |m, g| m.max(g.abs()));
                for (i, g) in r.gradient.iter().enumerate() {
                    let mut fwd = x.clone();
                    let mut back = x.clone();
                    fwd[i] += h;
                    back[i] -= h;
                    let fd = (c.expr.eval(&fwd).map_err(|e| e.to_string())?
                        - c.expr.eval(&back).map_err(|e| e.to_string())?)
                        / (2.0 * h);
                    worst = worst.max((fd - g).abs() / scale);
                }
                checked += 1;
            }
        }
    }
    ensure(
        worst <= 1e-6,
        format!("{checked} gradients, worst relative error {worst:.1e}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (
            "kelley cut at (1.5, 1.5) is x + y <= 11/6",
            kelley_cut_on_circle,
        ),
        (
            "esh cut at (1.5, 1.5) is x + y <= sqrt 2",
            esh_cut_on_circle,
        ),
        ("gauge value and positive homogeneity", gauge_on_circle),
        ("esh cuts are gauge subgradient cuts", equivalence_harness),
        (
            "quadratic classifier agrees with oracle",
            classifier_agrees_with_oracle,
        ),
        ("kelley and esh converge on the circle", convex_convergence),
        (
            "esh on a nonconvex representation",
            nonconvex_representation,
        ),
        (
            "support gap of kelley vs esh at (10, 10)",
            support_gap_contrast,
        ),
        ("branch and bound on the integer circle", integer_circle),
        (
            "gradients match finite differences",
            gradients_match_finite_differences,
        ),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.2}s)", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} ({secs:.2}s)", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
