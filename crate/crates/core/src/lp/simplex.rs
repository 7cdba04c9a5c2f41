//! Dense bounded-variable primal simplex, two phases.
//!
//! Columns are the structural variables, one slack per row
//! (`alphaᵀx + s = beta`, `s >= 0`) and one artificial per row whose slack
//! basis would start infeasible. Nonbasic variables sit at a finite bound.
//! Pricing is Dantzig's rule until `10·(rows + cols)` pivots, then Bland's.

use nalgebra::{DMatrix, DVector};

use super::LpError;

const PRICE_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimplexStats {
    pub pivots: usize,
    pub bound_flips: usize,
    pub bland: bool,
}

pub(super) struct Outcome {
    pub x: Option<Vec<f64>>,
    pub stats: SimplexStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic(usize),
    Lower,
    Upper,
}

struct Tableau {
    m: usize,
    ncols: usize,
    /// `B⁻¹A`, row-major `m × ncols`.
    t: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    xb: Vec<f64>,
    d: Vec<f64>,
    stats: SimplexStats,
    bland_after: usize,
    max_pivots: usize,
}

impl Tableau {
    fn at(&self, r: usize, j: usize) -> f64 {
        self.t[r * self.ncols + j]
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Upper => self.up[j],
            _ => self.lo[j],
        }
    }

    fn price(&mut self, cost: &[f64]) {
        self.d = cost.to_vec();
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.t[r * self.ncols..(r + 1) * self.ncols];
                for (dj, tj) in self.d.iter_mut().zip(row) {
                    *dj -= cb * tj;
                }
            }
        }
    }

    fn choose_entering(&self) -> Option<(usize, f64)> {
        let bland = self.stats.pivots + self.stats.bound_flips >= self.bland_after;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.ncols {
            let dir = match self.state[j] {
                State::Basic(_) => continue,
                _ if self.up[j] <= self.lo[j] => continue,
                State::Lower if self.d[j] < -PRICE_TOL => 1.0,
                State::Upper if self.d[j] > PRICE_TOL => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(b, _)| self.d[j].abs() > self.d[b].abs()) {
                best = Some((j, dir));
            }
        }
        best
    }

    /// One iteration; returns false at optimality.
    fn step(&mut self) -> Result<bool, LpError> {
        let Some((j, dir)) = self.choose_entering() else {
            return Ok(false);
        };
        if self.stats.pivots + self.stats.bound_flips >= self.max_pivots {
            return Err(LpError::Cycling(self.max_pivots));
        }
        self.stats.bland |= self.stats.pivots + self.stats.bound_flips >= self.bland_after;
        let bland = self.stats.bland;

        let mut theta = self.up[j] - self.lo[j];
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..self.m {
            let a = dir * self.at(r, j);
            let b = self.basis[r];
            let lim = if a > PIVOT_TOL {
                (self.xb[r] - self.lo[b]) / a
            } else if a < -PIVOT_TOL && self.up[b].is_finite() {
                (self.up[b] - self.xb[r]) / -a
            } else {
                continue;
            };
            let lim = lim.max(0.0);
            let better = match leave {
                None => lim < theta,
                Some((lr, _)) => {
                    let tie = (lim - theta).abs() <= 1e-12;
                    lim < theta - 1e-12
                        || (tie && bland && b < self.basis[lr])
                        || (tie && !bland && a.abs() > self.at(lr, j).abs())
                }
            };
            if better {
                theta = lim;
                leave = Some((r, a));
            }
        }
        if !theta.is_finite() {
            return Err(LpError::Numerical("unbounded ray in a bounded LP".into()));
        }

        let entering_old = self.nonbasic_value(j);
        for r in 0..self.m {
            let a = self.at(r, j);
            if a != 0.0 {
                self.xb[r] -= dir * theta * a;
            }
        }
        match leave {
            None => {
                self.state[j] = if dir > 0.0 {
                    State::Upper
                } else {
                    State::Lower
                };
                self.stats.bound_flips += 1;
            }
            Some((r, a)) => {
                let out = self.basis[r];
                self.state[out] = if a > 0.0 { State::Lower } else { State::Upper };
                self.pivot(r, j);
                self.basis[r] = j;
                self.state[j] = State::Basic(r);
                self.xb[r] = entering_old + dir * theta;
                self.stats.pivots += 1;
            }
        }
        Ok(true)
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let n = self.ncols;
        let p = self.at(r, j);
        for k in 0..n {
            self.t[r * n + k] /= p;
        }
        let (head, rest) = self.t.split_at_mut(r * n);
        let (prow, tail) = rest.split_at_mut(n);
        for row in head.chunks_mut(n).chain(tail.chunks_mut(n)) {
            let f = row[j];
            if f != 0.0 {
                for (x, y) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * y;
                }
                row[j] = 0.0;
            }
        }
        let f = self.d[j];
        if f != 0.0 {
            for (x, y) in self.d.iter_mut().zip(prow.iter()) {
                *x -= f * y;
            }
            self.d[j] = 0.0;
        }
    }

    fn run(&mut self) -> Result<(), LpError> {
        while self.step()? {}
        Ok(())
    }
}

/// `min cᵀx` s.t. `lower <= x <= upper`, `alpha_iᵀx <= beta_i`. `None` when infeasible.
pub(super) fn solve(
    lower: &[f64],
    upper: &[f64],
    cost: &[f64],
    rows: &[(&[f64], f64)],
) -> Result<Outcome, LpError> {
    let n = cost.len();
    let m = rows.len();

    let x_start: Vec<f64> = lower.to_vec();
    let resid: Vec<f64> = rows
        .iter()
        .map(|(a, b)| b - a.iter().zip(&x_start).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    let art_rows: Vec<usize> = (0..m).filter(|&i| resid[i] < 0.0).collect();
    let k = art_rows.len();
    let ncols = n + m + k;

    let mut lo = vec![0.0; ncols];
    let mut up = vec![f64::INFINITY; ncols];
    lo[..n].copy_from_slice(lower);
    up[..n].copy_from_slice(upper);

    let mut t = vec![0.0; m * ncols];
    let mut state = vec![State::Lower; ncols];
    let mut basis = vec![0; m];
    let mut xb = vec![0.0; m];
    let mut art_of_row = vec![None; m];
    for (a, &i) in art_rows.iter().enumerate() {
        art_of_row[i] = Some(n + m + a);
    }
    for (i, (alpha, _)) in rows.iter().enumerate() {
        let row = &mut t[i * ncols..(i + 1) * ncols];
        // the artificial basis row is the negated constraint row
        let sign = if art_of_row[i].is_some() { -1.0 } else { 1.0 };
        for (dst, a) in row[..n].iter_mut().zip(alpha.iter()) {
            *dst = sign * a;
        }
        row[n + i] = sign;
        match art_of_row[i] {
            Some(col) => {
                row[col] = 1.0;
                basis[i] = col;
                state[col] = State::Basic(i);
                xb[i] = -resid[i];
            }
            None => {
                basis[i] = n + i;
                state[n + i] = State::Basic(i);
                xb[i] = resid[i];
            }
        }
    }

    let mut tab = Tableau {
        m,
        ncols,
        t,
        lo,
        up,
        state,
        basis,
        xb,
        d: Vec::new(),
        stats: SimplexStats::default(),
        bland_after: 10 * (m + ncols),
        max_pivots: 200 * (m + ncols) + 1_000,
    };

    if k > 0 {
        let mut phase1 = vec![0.0; ncols];
        phase1[n + m..].iter_mut().for_each(|c| *c = 1.0);
        tab.price(&phase1);
        tab.run()?;
        let infeas: f64 = (0..m)
            .filter(|&r| tab.basis[r] >= n + m)
            .map(|r| tab.xb[r].max(0.0))
            .sum();
        if infeas > PHASE1_TOL {
            return Ok(Outcome {
                x: None,
                stats: tab.stats,
            });
        }
        for col in n + m..ncols {
            tab.up[col] = 0.0;
            if let State::Basic(r) = tab.state[col] {
                tab.xb[r] = 0.0;
            } else {
                tab.state[col] = State::Lower;
            }
        }
    }

    let mut phase2 = vec![0.0; ncols];
    phase2[..n].copy_from_slice(cost);
    tab.price(&phase2);
    tab.run()?;

    let values = refine(&tab, n, rows, &art_of_row);
    let x = (0..n)
        .map(|j| values[j].clamp(lower[j], upper[j]))
        .collect();
    Ok(Outcome {
        x: Some(x),
        stats: tab.stats,
    })
}

/// Recompute basic values from the original data: `B x_B = b - N x_N`.
fn refine(
    tab: &Tableau,
    n: usize,
    rows: &[(&[f64], f64)],
    art_of_row: &[Option<usize>],
) -> Vec<f64> {
    let m = tab.m;
    let mut values: Vec<f64> = (0..tab.ncols).map(|j| tab.nonbasic_value(j)).collect();
    for r in 0..m {
        values[tab.basis[r]] = tab.xb[r];
    }
    if m == 0 {
        return values;
    }
    let column = |j: usize, i: usize| -> f64 {
        if j < n {
            rows[i].0[j]
        } else if j < n + m {
            if j - n == i {
                1.0
            } else {
                0.0
            }
        } else if art_of_row[i] == Some(j) {
            -1.0
        } else {
            0.0
        }
    };
    let b = DMatrix::from_fn(m, m, |i, r| column(tab.basis[r], i));
    let mut rhs = DVector::from_fn(m, |i, _| rows[i].1);
    for (j, &v) in values.iter().enumerate().take(tab.ncols) {
        if matches!(tab.state[j], State::Basic(_)) {
            continue;
        }
        if v != 0.0 {
            for i in 0..m {
                rhs[i] -= column(j, i) * v;
            }
        }
    }
    if let Some(sol) = b.lu().solve(&rhs) {
        if sol.iter().all(|v| v.is_finite()) {
            for r in 0..m {
                values[tab.basis[r]] = sol[r];
            }
        }
    }
    values
}
