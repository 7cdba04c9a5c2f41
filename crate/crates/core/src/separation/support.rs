//! Certificates that a cut supports the feasible set, and the gauge
//! subgradient inequality for cuts normalized to `αᵀ(x - x0) <= 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dot, gauge, SeparationError};
use crate::expr::Expr;
use crate::lp::Cut;
use crate::model::{max_constraint, Constraint, SolverConfig};

/// Equality and feasibility tolerance for supporting witnesses.
pub const SUPPORT_TOL: f64 = 1e-7;
const AFFINE_TOL: f64 = 1e-8;

/// Search budget for [`check_supporting`] when the generation point is not a witness.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportProbe {
    /// Point strictly inside the set; without it only the generation point is tried.
    pub interior: Option<Vec<f64>>,
    pub directions: usize,
    pub refine_iters: usize,
    pub seed: u64,
}

impl Default for SupportProbe {
    fn default() -> Self {
        SupportProbe {
            interior: None,
            directions: 64,
            refine_iters: 400,
            seed: 0,
        }
    }
}

impl SupportProbe {
    pub fn with_interior(interior: Vec<f64>) -> Self {
        SupportProbe {
            interior: Some(interior),
            ..SupportProbe::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportVerdict {
    pub supporting: bool,
    pub witness: Option<Vec<f64>>,
    /// `β - max αᵀx` over the boundary points examined.
    pub max_violation_gap: f64,
}

fn is_witness(constraints: &[Constraint], cut: &Cut, x: &[f64]) -> bool {
    (cut.lhs(x) - cut.beta()).abs() <= SUPPORT_TOL
        && matches!(max_constraint(constraints, x), Ok((v, _)) if v <= SUPPORT_TOL)
}

fn normalize(u: &mut [f64]) -> bool {
    let norm = dot(u, u).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    u.iter_mut().for_each(|v| *v /= norm);
    true
}

/// Boundary point hit by the ray from `x0` along `u`, if the ray leaves the set.
fn boundary_along(
    constraints: &[Constraint],
    x0: &[f64],
    u: &[f64],
    cfg: &SolverConfig,
) -> Option<Vec<f64>> {
    let probe: Vec<f64> = x0.iter().zip(u).map(|(a, d)| a + d).collect();
    let phi = gauge(constraints, x0, &probe, cfg).ok()?;
    (phi > 0.0).then(|| x0.iter().zip(u).map(|(a, d)| a + d / phi).collect())
}

/// Search for a feasible point where the cut holds with equality.
///
/// The generation point recorded in the cut's origin is tried first. Otherwise
/// `αᵀx` is maximized over boundary points `x0 + u/φ(x0 + u)` by a pattern
/// search over ray directions `u`, started from `α` and from seeded random
/// directions. The second path is a heuristic and may miss a witness.
pub fn check_supporting(
    constraints: &[Constraint],
    cut: &Cut,
    probe: &SupportProbe,
) -> Result<SupportVerdict, SeparationError> {
    let n = cut.alpha().len();
    let point = &cut.origin().point;
    let mut best_gap = f64::INFINITY;
    let mut best_point: Option<Vec<f64>> = None;
    if point.len() == n {
        if is_witness(constraints, cut, point) {
            return Ok(SupportVerdict {
                supporting: true,
                witness: Some(point.clone()),
                max_violation_gap: cut.beta() - cut.lhs(point),
            });
        }
        if matches!(max_constraint(constraints, point), Ok((v, _)) if v <= SUPPORT_TOL) {
            best_gap = cut.beta() - cut.lhs(point);
            best_point = Some(point.clone());
        }
    }
    let Some(x0) = &probe.interior else {
        return Ok(SupportVerdict {
            supporting: false,
            witness: None,
            max_violation_gap: best_gap,
        });
    };
    if x0.len() != n {
        return Err(SeparationError::Dimension {
            expected: n,
            got: x0.len(),
        });
    }
    let cfg = SolverConfig::default();
    let score = |u: &[f64]| -> Option<(f64, Vec<f64>)> {
        let b = boundary_along(constraints, x0, u, &cfg)?;
        Some((cut.lhs(&b), b))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(probe.seed);
    let mut starts = vec![cut.alpha().to_vec()];
    while starts.len() <= probe.directions {
        let mut u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        if normalize(&mut u) {
            starts.push(u);
        }
    }
    let mut scored: Vec<(f64, Vec<f64>, Vec<f64>)> = starts
        .into_iter()
        .filter_map(|mut u| {
            normalize(&mut u);
            score(&u).map(|(s, b)| (s, u, b))
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(4);

    for (mut value, mut u, mut b) in scored {
        let mut step = 0.25;
        let mut iters = 0;
        while step > 1e-12 && iters < probe.refine_iters {
            iters += 1;
            let mut improved = false;
            for i in 0..n {
                for sign in [1.0, -1.0] {
                    let mut cand = u.clone();
                    cand[i] += sign * step;
                    if !normalize(&mut cand) {
                        continue;
                    }
                    if let Some((s, bp)) = score(&cand) {
                        if s > value {
                            value = s;
                            u = cand;
                            b = bp;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        let gap = cut.beta() - value;
        if gap < best_gap {
            best_gap = gap;
            best_point = Some(b);
        }
    }
    let witness = best_point.filter(|b| is_witness(constraints, cut, b));
    Ok(SupportVerdict {
        supporting: witness.is_some(),
        witness,
        max_violation_gap: best_gap,
    })
}

/// Whether `λ ↦ g(x0 + λ(xbar - x0))` is affine on `[0, 1]`, judged by second
/// differences at `samples` equispaced points.
pub fn affine_on_segment(
    g: &Expr,
    x0: &[f64],
    xbar: &[f64],
    samples: usize,
) -> Result<bool, SeparationError> {
    if x0.len() != xbar.len() {
        return Err(SeparationError::Dimension {
            expected: x0.len(),
            got: xbar.len(),
        });
    }
    if samples < 3 {
        return Err(SeparationError::TooFewSamples(samples));
    }
    if x0 == xbar {
        return Err(SeparationError::DegenerateSegment);
    }
    let rho = (0..samples)
        .map(|k| {
            let t = k as f64 / (samples - 1) as f64;
            let x: Vec<f64> = x0.iter().zip(xbar).map(|(a, b)| a + t * (b - a)).collect();
            g.eval(&x)
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let scale = rho.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    Ok(rho
        .windows(3)
        .all(|w| (w[2] - 2.0 * w[1] + w[0]).abs() <= AFFINE_TOL * scale))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgradientCheck {
    pub passed: bool,
    pub checked: usize,
    /// Samples whose ray never leaves the set, so `φ` could not be bracketed.
    pub skipped: usize,
    /// Largest `φ(x̂) + αᵀ(y - x̂) - φ(y)` over checked samples.
    pub worst_excess: f64,
    pub worst_point: Option<Vec<f64>>,
}

/// `αᵀ(x̂ - x0) = 1` up to `SUPPORT_TOL`.
fn touches_at(x0: &[f64], alpha: &[f64], xhat: &[f64]) -> Result<(), SeparationError> {
    for v in [alpha, xhat] {
        if v.len() != x0.len() {
            return Err(SeparationError::Dimension {
                expected: x0.len(),
                got: v.len(),
            });
        }
    }
    let shifted: Vec<f64> = xhat.iter().zip(x0).map(|(a, b)| a - b).collect();
    let lhs = dot(alpha, &shifted);
    if (lhs - 1.0).abs() > SUPPORT_TOL {
        return Err(SeparationError::EqualityPrecondition { lhs });
    }
    Ok(())
}

/// Gauge values at a fixed set of points, for checking many cuts against the
/// same samples. `None` marks a point whose ray never leaves the set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeSamples {
    pub x0: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<Option<f64>>,
}

impl GaugeSamples {
    pub fn new(
        constraints: &[Constraint],
        x0: &[f64],
        points: Vec<Vec<f64>>,
        cfg: &SolverConfig,
    ) -> Result<Self, SeparationError> {
        let values = points
            .par_iter()
            .map(|y| match gauge(constraints, x0, y, cfg) {
                Ok(phi) => Ok(Some(phi)),
                Err(SeparationError::Unbracketed) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GaugeSamples {
            x0: x0.to_vec(),
            points,
            values,
        })
    }

    /// Check `φ(x̂) + αᵀ(y - x̂) <= φ(y) + 1e-7` at every sample, where the cut
    /// reads `αᵀ(x - x0) <= 1` and `phi_hat = φ(x̂)`.
    pub fn check(
        &self,
        alpha: &[f64],
        xhat: &[f64],
        phi_hat: f64,
    ) -> Result<SubgradientCheck, SeparationError> {
        touches_at(&self.x0, alpha, xhat)?;
        let offset = phi_hat - dot(alpha, xhat);
        let mut report = SubgradientCheck {
            passed: true,
            checked: 0,
            skipped: 0,
            worst_excess: f64::NEG_INFINITY,
            worst_point: None,
        };
        let mut worst = None;
        for (k, (y, phi)) in self.points.iter().zip(&self.values).enumerate() {
            match phi {
                None => report.skipped += 1,
                Some(phi) => {
                    report.checked += 1;
                    let e = offset + dot(alpha, y) - phi;
                    if e > report.worst_excess {
                        report.worst_excess = e;
                        worst = Some(k);
                    }
                }
            }
        }
        report.worst_point = worst.map(|k| self.points[k].clone());
        report.passed = report.worst_excess <= SUPPORT_TOL;
        Ok(report)
    }
}

/// Check `φ(x̂) + αᵀ(y - x̂) <= φ(y) + 1e-7` for every sample `y`, where `φ` is
/// the gauge shifted to `x0` and the cut reads `αᵀ(x - x0) <= 1`.
pub fn gauge_subgradient_check(
    constraints: &[Constraint],
    x0: &[f64],
    alpha: &[f64],
    xhat: &[f64],
    samples: &[Vec<f64>],
    cfg: &SolverConfig,
) -> Result<SubgradientCheck, SeparationError> {
    touches_at(x0, alpha, xhat)?;
    let phi_hat = gauge(constraints, x0, xhat, cfg)?;
    let sampled = GaugeSamples::new(constraints, x0, samples.to_vec(), cfg)?;
    sampled.check(alpha, xhat, phi_hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::lp::{CutKind, CutOrigin};
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    fn cons(srcs: &[&str]) -> Vec<Constraint> {
        srcs.iter()
            .map(|s| Constraint::new(*s, parse(s, &["x", "y"]).unwrap()))
            .collect()
    }

    fn user_cut(alpha: &[f64], beta: f64) -> Cut {
        Cut::new(alpha.to_vec(), beta, CutOrigin::user()).unwrap()
    }

    #[test]
    fn esh_cut_witness_is_its_generation_point() {
        let h = FRAC_1_SQRT_2;
        let cut = Cut::new(
            vec![SQRT_2, SQRT_2],
            2.0,
            CutOrigin {
                kind: CutKind::Esh,
                constraint: "ball".into(),
                point: vec![h, h],
            },
        )
        .unwrap();
        let v =
            check_supporting(&cons(&["x^2 + y^2 - 1"]), &cut, &SupportProbe::default()).unwrap();
        assert!(v.supporting);
        assert_eq!(v.witness, Some(vec![h, h]));
        assert!(v.max_violation_gap.abs() < 1e-12);
    }

    #[test]
    fn kelley_cut_on_disk_has_closed_form_gap() {
        let cut = user_cut(&[1.0, 1.0], 11.0 / 6.0);
        let probe = SupportProbe::with_interior(vec![0.0, 0.0]);
        let v = check_supporting(&cons(&["x^2 + y^2 - 1"]), &cut, &probe).unwrap();
        assert!(!v.supporting);
        assert!((v.max_violation_gap - (11.0 / 6.0 - SQRT_2)).abs() < 1e-9);
    }

    #[test]
    fn search_finds_supporting_user_cut() {
        let probe = SupportProbe::with_interior(vec![0.1, -0.2]);
        let v = check_supporting(
            &cons(&["x^2 + y^2 - 1"]),
            &user_cut(&[1.0, 1.0], SQRT_2),
            &probe,
        )
        .unwrap();
        assert!(v.supporting, "{v:?}");
        let w = v.witness.unwrap();
        assert!((w[0] - FRAC_1_SQRT_2).abs() < 1e-3 && (w[1] - FRAC_1_SQRT_2).abs() < 1e-3);
    }

    #[test]
    fn halfspace_cut() {
        let probe = SupportProbe::with_interior(vec![0.0, 0.0]);
        let v = check_supporting(&cons(&["x - 1"]), &user_cut(&[1.0, 0.0], 1.0), &probe).unwrap();
        assert!(v.supporting);
        assert!((v.witness.unwrap()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn no_interior_no_search() {
        let v = check_supporting(
            &cons(&["x^2 + y^2 - 1"]),
            &user_cut(&[1.0, 1.0], SQRT_2),
            &SupportProbe::default(),
        )
        .unwrap();
        assert!(!v.supporting);
        assert_eq!(v.max_violation_gap, f64::INFINITY);
    }

    #[test]
    fn affine_segments() {
        let circle = parse("x^2 + y^2 - 1", &["x", "y"]).unwrap();
        assert!(!affine_on_segment(&circle, &[0.0, 0.0], &[1.5, 1.5], 11).unwrap());
        let para = parse("x^2 - y", &["x", "y"]).unwrap();
        assert!(affine_on_segment(&para, &[1.0, 2.0], &[1.0, -1.0], 11).unwrap());
        assert!(!affine_on_segment(&para, &[1.0, 2.0], &[1.1, -1.0], 11).unwrap());
        assert_eq!(
            affine_on_segment(&para, &[1.0, 2.0], &[1.0, 2.0], 11),
            Err(SeparationError::DegenerateSegment)
        );
        assert_eq!(
            affine_on_segment(&para, &[1.0, 2.0], &[1.0, 1.0], 2),
            Err(SeparationError::TooFewSamples(2))
        );
        let log = parse("log(x)", &["x", "y"]).unwrap();
        assert!(matches!(
            affine_on_segment(&log, &[1.0, 0.0], &[-1.0, 0.0], 5),
            Err(SeparationError::Eval(_))
        ));
    }

    fn grid(lo: f64, hi: f64, k: usize) -> Vec<Vec<f64>> {
        let pts: Vec<f64> = (0..k)
            .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
            .collect();
        pts.iter()
            .flat_map(|a| pts.iter().map(move |b| vec![*a, *b]))
            .collect()
    }

    #[test]
    fn subgradient_check_on_disk() {
        let cs = cons(&["x^2 + y^2 - 1"]);
        let cfg = SolverConfig::default();
        let h = FRAC_1_SQRT_2;
        let r = gauge_subgradient_check(
            &cs,
            &[0.0, 0.0],
            &[h, h],
            &[h, h],
            &grid(-2.0, 2.0, 21),
            &cfg,
        )
        .unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.checked, 441);
        assert_eq!(r.skipped, 0);
        let samples = vec![
            vec![0.0, 1.0],
            vec![0.0, -1.0],
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![2.0, 0.0],
        ];
        let r = gauge_subgradient_check(&cs, &[0.0, 0.0], &[1.0, 0.0], &[1.0, 0.0], &samples, &cfg)
            .unwrap();
        assert!(r.passed);
    }

    #[test]
    fn subgradient_check_rejects_non_tight_cut() {
        let cs = cons(&["x^2 + y^2 - 1"]);
        let s = 6.0 / 11.0;
        let r = gauge_subgradient_check(
            &cs,
            &[0.0, 0.0],
            &[s, s],
            &[FRAC_1_SQRT_2, FRAC_1_SQRT_2],
            &grid(-2.0, 2.0, 5),
            &SolverConfig::default(),
        );
        assert!(matches!(
            r,
            Err(SeparationError::EqualityPrecondition { .. })
        ));
    }

    #[test]
    fn subgradient_check_detects_wrong_slope() {
        // tight at (1, 0) but tilted: not a subgradient of the norm there
        let cs = cons(&["x^2 + y^2 - 1"]);
        let r = gauge_subgradient_check(
            &cs,
            &[0.0, 0.0],
            &[1.0, 0.5],
            &[1.0, 0.0],
            &grid(-2.0, 2.0, 9),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(!r.passed);
        assert!(r.worst_excess > 0.1);
    }

    #[test]
    fn unbracketed_samples_are_skipped() {
        let cs = cons(&["x - 1"]);
        let r = gauge_subgradient_check(
            &cs,
            &[0.0, 0.0],
            &[1.0, 0.0],
            &[1.0, 0.0],
            &[vec![2.0, 3.0], vec![-1.0, 0.0], vec![0.0, 4.0]],
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(r.passed);
        assert_eq!((r.checked, r.skipped), (1, 2));
    }
}
