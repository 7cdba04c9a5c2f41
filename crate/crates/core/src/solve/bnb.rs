//! Best-first branch-and-bound over the integer variables, with one cut pool
//! shared by every node.

use serde::{Deserialize, Serialize};

use super::{
    finish, resolve_interior_point, solve, Algorithm, NodeOutcome, Separator, Session, SolveError,
    SolveStatus, SolveTrace,
};
use crate::model::{Problem, SolverConfig};

const GAP_TOL: f64 = 1e-6;
const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchSense {
    Le,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRestriction {
    pub variable: usize,
    pub sense: BranchSense,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnbNode {
    pub id: usize,
    pub restrictions: Vec<BranchRestriction>,
    pub parent_bound: f64,
    pub depth: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BnbNode {
    fn child(&self, id: usize, bound: f64, r: BranchRestriction) -> BnbNode {
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        match r.sense {
            BranchSense::Le => upper[r.variable] = r.value,
            BranchSense::Ge => lower[r.variable] = r.value,
        }
        let mut restrictions = self.restrictions.clone();
        restrictions.push(r);
        BnbNode {
            id,
            restrictions,
            parent_bound: bound,
            depth: self.depth + 1,
            lower,
            upper,
        }
    }
}

/// Index of the open node to process next: lowest parent bound, then deepest,
/// then oldest.
fn select(open: &[BnbNode]) -> Option<usize> {
    (0..open.len()).min_by(|&a, &b| {
        let (na, nb) = (&open[a], &open[b]);
        na.parent_bound
            .total_cmp(&nb.parent_bound)
            .then(nb.depth.cmp(&na.depth))
            .then(na.id.cmp(&nb.id))
    })
}

fn most_fractional(x: &[f64], integer: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, (&v, &int)) in x.iter().zip(integer).enumerate() {
        if !int {
            continue;
        }
        let frac = (v - v.floor()).min(v.ceil() - v);
        if frac > INT_TOL && best.is_none_or(|(_, f)| frac > f) {
            best = Some((j, frac));
        }
    }
    best.map(|(j, _)| j)
}

/// Branch-and-bound with `inner` as the cutting-plane loop at every node.
/// Problems without integer variables go straight to the inner loop.
pub fn solve_bnb(
    p: &Problem,
    cfg: &SolverConfig,
    inner: Algorithm,
) -> Result<SolveTrace, SolveError> {
    if !p.has_integers() {
        return solve(p, cfg, inner);
    }
    cfg.validate()?;
    let separator = match inner {
        Algorithm::Kelley => Separator::Kelley,
        Algorithm::Esh => Separator::Esh {
            interior: resolve_interior_point(p, cfg)?,
        },
    };
    let mut session = Session::new(p, cfg, separator)?;
    let integer = p.integrality();
    let mut open = vec![BnbNode {
        id: 0,
        restrictions: Vec::new(),
        parent_bound: f64::NEG_INFINITY,
        depth: 0,
        lower: p.lower().to_vec(),
        upper: p.upper().to_vec(),
    }];
    for (j, int) in integer.iter().enumerate() {
        if *int {
            open[0].lower[j] = open[0].lower[j].ceil();
            open[0].upper[j] = open[0].upper[j].floor();
        }
    }
    let mut next_id = 1;
    let mut processed = 0;
    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut limit_hit = false;

    while let Some(k) = select(&open) {
        let node = open.swap_remove(k);
        if let Some((_, best)) = &incumbent {
            if node.parent_bound >= best - GAP_TOL {
                continue;
            }
        }
        if node.lower.iter().zip(&node.upper).any(|(l, u)| l > u) {
            continue;
        }
        if processed >= cfg.max_nodes {
            limit_hit = true;
            break;
        }
        processed += 1;
        session
            .lp
            .set_bounds(node.lower.clone(), node.upper.clone())?;
        match session.run_node(node.id) {
            NodeOutcome::Infeasible => {
                if node.id == 0 {
                    let mut trace = finish(session, inner, NodeOutcome::Infeasible);
                    trace.nodes = processed;
                    return Ok(trace);
                }
            }
            NodeOutcome::IterationLimit => {
                limit_hit = true;
                break;
            }
            outcome @ NodeOutcome::Failed(_) => {
                let mut trace = finish(session, inner, outcome);
                trace.nodes = processed;
                return Ok(trace);
            }
            NodeOutcome::Optimal { x, objective } => {
                if incumbent
                    .as_ref()
                    .is_some_and(|(_, best)| objective >= best - GAP_TOL)
                {
                    continue;
                }
                match most_fractional(&x, integer) {
                    Some(j) => {
                        let v = x[j];
                        for r in [
                            BranchRestriction {
                                variable: j,
                                sense: BranchSense::Le,
                                value: v.floor(),
                            },
                            BranchRestriction {
                                variable: j,
                                sense: BranchSense::Ge,
                                value: v.ceil(),
                            },
                        ] {
                            open.push(node.child(next_id, objective, r));
                            next_id += 1;
                        }
                    }
                    None => {
                        let snapped: Vec<f64> = x
                            .iter()
                            .zip(integer)
                            .map(|(v, int)| if *int { v.round() } else { *v })
                            .collect();
                        let point = match p.max_constraint(&snapped) {
                            Ok((f, _)) if f <= cfg.eps_feas => snapped,
                            _ => x,
                        };
                        let value = p.objective_value(&point);
                        if incumbent.as_ref().is_none_or(|(_, best)| value < *best) {
                            incumbent = Some((point, value));
                        }
                    }
                }
            }
        }
    }

    let outcome = match &incumbent {
        Some((x, objective)) => NodeOutcome::Optimal {
            x: x.clone(),
            objective: *objective,
        },
        None if limit_hit => NodeOutcome::IterationLimit,
        None => NodeOutcome::Infeasible,
    };
    let mut trace = finish(session, inner, outcome);
    trace.nodes = processed;
    if trace.status == SolveStatus::Error && incumbent.is_none() && !limit_hit {
        // every node was infeasible: the root contradiction check does not apply
        trace.status = SolveStatus::Infeasible;
        trace.message = None;
    }
    if limit_hit {
        trace.status = SolveStatus::IterationLimit;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::model::{Constraint, VariableSpec};

    fn circle(int_x: bool, int_y: bool) -> Problem {
        let var = |n: &str, int: bool| {
            if int {
                VariableSpec::integer(n, -10.0, 10.0)
            } else {
                VariableSpec::continuous(n, -10.0, 10.0)
            }
        };
        Problem::new(
            vec![var("x", int_x), var("y", int_y)],
            vec![-1.0, -1.0],
            vec![Constraint::new(
                "ball",
                parse("x^2 + y^2 - 1", &["x", "y"]).unwrap(),
            )],
            Some(vec![0.0, 0.0]),
        )
        .unwrap()
    }

    #[test]
    fn both_integer() {
        for inner in [Algorithm::Kelley, Algorithm::Esh] {
            let t = solve_bnb(&circle(true, true), &SolverConfig::default(), inner).unwrap();
            assert_eq!(t.status, SolveStatus::OptimalEps);
            assert!((t.final_objective.unwrap() + 1.0).abs() < 1e-9);
            let x = t.final_point.unwrap();
            assert!(x == vec![1.0, 0.0] || x == vec![0.0, 1.0], "{x:?}");
            assert!(t.nodes > 1);
        }
    }

    #[test]
    fn one_integer() {
        let t = solve_bnb(
            &circle(true, false),
            &SolverConfig::default(),
            Algorithm::Esh,
        )
        .unwrap();
        assert_eq!(t.status, SolveStatus::OptimalEps);
        // y may exceed 0 by up to sqrt(eps_feas) at x = 1
        assert!((t.final_objective.unwrap() + 1.0).abs() < 1e-3);
        let x = t.final_point.unwrap();
        assert!(x[0] == 0.0 || x[0] == 1.0);
        let tight = SolverConfig {
            eps_feas: 1e-12,
            ..SolverConfig::default()
        };
        let t = solve_bnb(&circle(true, false), &tight, Algorithm::Esh).unwrap();
        assert!((t.final_objective.unwrap() + 1.0).abs() < 1e-5);
    }

    #[test]
    fn continuous_problem_delegates() {
        let p = circle(false, false);
        let cfg = SolverConfig::default();
        assert_eq!(
            solve_bnb(&p, &cfg, Algorithm::Kelley).unwrap(),
            solve(&p, &cfg, Algorithm::Kelley).unwrap()
        );
    }

    #[test]
    fn integer_infeasible_disk() {
        // disk of radius 0.3 around (0.5, 0.5) holds no lattice point
        let p = Problem::new(
            vec![
                VariableSpec::integer("x", -3.0, 3.0),
                VariableSpec::integer("y", -3.0, 3.0),
            ],
            vec![1.0, 1.0],
            vec![Constraint::new(
                "ball",
                parse("(x - 0.5)^2 + (y - 0.5)^2 - 0.09", &["x", "y"]).unwrap(),
            )],
            Some(vec![0.5, 0.5]),
        )
        .unwrap();
        for inner in [Algorithm::Kelley, Algorithm::Esh] {
            let t = solve_bnb(&p, &SolverConfig::default(), inner).unwrap();
            assert_eq!(
                t.status,
                SolveStatus::Infeasible,
                "{inner}: {:?}",
                t.message
            );
        }
    }

    #[test]
    fn node_limit() {
        let cfg = SolverConfig {
            max_nodes: 1,
            ..SolverConfig::default()
        };
        let t = solve_bnb(&circle(true, true), &cfg, Algorithm::Kelley).unwrap();
        assert_eq!(t.status, SolveStatus::IterationLimit);
        assert_eq!(t.nodes, 1);
    }

    #[test]
    fn selection_order() {
        let mk = |id, bound, depth| BnbNode {
            id,
            restrictions: Vec::new(),
            parent_bound: bound,
            depth,
            lower: Vec::new(),
            upper: Vec::new(),
        };
        let open = vec![
            mk(1, -1.0, 1),
            mk(2, -2.0, 1),
            mk(3, -2.0, 2),
            mk(4, -2.0, 2),
        ];
        assert_eq!(select(&open), Some(2));
        assert_eq!(
            most_fractional(&[0.5, 1.2, 2.0], &[false, true, true]),
            Some(1)
        );
        assert_eq!(most_fractional(&[0.5, 1.0000000001], &[false, true]), None);
    }
}
