//! Dense bounded-variable primal simplex.
//!
//! Solves `min c'x  s.t.  A x = b,  0 <= x <= u` for small dense problems.
//! Upper bounds are handled implicitly (nonbasic variables sit at either
//! bound), phase 1 uses one artificial per row, and pricing falls back from
//! Dantzig to Bland's rule after a run of degenerate pivots.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    /// `f64::INFINITY` for unbounded above.
    pub upper: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpError {
    Infeasible { residual: f64 },
    Unbounded,
    IterationLimit(usize),
    Malformed(String),
}

impl fmt::Display for LpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpError::Infeasible { residual } => write!(f, "infeasible (phase 1 residual {residual:e})"),
            LpError::Unbounded => f.write_str("unbounded"),
            LpError::IterationLimit(n) => write!(f, "iteration limit {n} reached"),
            LpError::Malformed(m) => write!(f, "malformed problem: {m}"),
        }
    }
}

impl std::error::Error for LpError {}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;

struct Tableau {
    m: usize,
    /// Columns: structural then artificial.
    ncols: usize,
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    at_upper: Vec<bool>,
    upper: Vec<f64>,
    dj: Vec<f64>,
    iterations: usize,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.ncols + j]
    }

    fn price(&mut self, cost: &[f64]) {
        self.dj.copy_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.ncols..(i + 1) * self.ncols];
                for (d, a) in self.dj.iter_mut().zip(row) {
                    *d -= cb * a;
                }
            }
        }
    }

    fn choose_entering(&self, is_basic: &[bool], bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.ncols {
            if is_basic[j] || self.upper[j] == 0.0 {
                continue;
            }
            let d = self.dj[j];
            let dir = if !self.at_upper[j] && d < -COST_TOL {
                1.0
            } else if self.at_upper[j] && d > COST_TOL {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(b, _)| d.abs() > self.dj[b].abs()) {
                best = Some((j, dir));
            }
        }
        best
    }

    fn run(&mut self, cost: &[f64], max_iter: usize) -> Result<(), LpError> {
        self.price(cost);
        let mut is_basic = vec![false; self.ncols];
        for &b in &self.basis {
            is_basic[b] = true;
        }
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= max_iter {
                return Err(LpError::IterationLimit(max_iter));
            }
            let Some((q, dir)) = self.choose_entering(&is_basic, degenerate >= DEGENERATE_RUN) else {
                return Ok(());
            };
            self.iterations += 1;

            // Ratio test. Basic i moves by -dir * theta * t[i][q].
            let mut theta = self.upper[q];
            let mut leave: Option<(usize, bool)> = None;
            for i in 0..self.m {
                let alpha = dir * self.at(i, q);
                let b = self.basis[i];
                let limit = if alpha > PIVOT_TOL {
                    (self.beta[i].max(0.0) / alpha, false)
                } else if alpha < -PIVOT_TOL && self.upper[b].is_finite() {
                    ((self.upper[b] - self.beta[i]).max(0.0) / -alpha, true)
                } else {
                    continue;
                };
                // ties go to the lowest variable index
                let better = match leave {
                    None => limit.0 < theta,
                    Some((r, _)) => {
                        limit.0 < theta - 1e-12 || (limit.0 <= theta + 1e-12 && b < self.basis[r])
                    }
                };
                if better {
                    theta = limit.0;
                    leave = Some((i, limit.1));
                }
            }
            if theta.is_infinite() {
                return Err(LpError::Unbounded);
            }
            degenerate = if theta <= 1e-12 { degenerate + 1 } else { 0 };

            for i in 0..self.m {
                self.beta[i] -= dir * theta * self.at(i, q);
            }
            let Some((r, to_upper)) = leave else {
                // bound flip of the entering variable
                self.at_upper[q] = !self.at_upper[q];
                continue;
            };
            let entering_value = if dir > 0.0 { theta } else { self.upper[q] - theta };
            let out = self.basis[r];
            self.at_upper[out] = to_upper;
            is_basic[out] = false;
            is_basic[q] = true;
            self.basis[r] = q;
            self.at_upper[q] = false;
            self.beta[r] = entering_value;
            self.pivot(r, q);
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.ncols;
        let p = self.at(r, q);
        for v in &mut self.t[r * n..(r + 1) * n] {
            *v /= p;
        }
        let (before, rest) = self.t.split_at_mut(r * n);
        let (prow, after) = rest.split_at_mut(n);
        for row in before.chunks_mut(n).chain(after.chunks_mut(n)) {
            let f = row[q];
            if f != 0.0 {
                for (a, b) in row.iter_mut().zip(prow.iter()) {
                    *a -= f * b;
                }
            }
        }
        let f = self.dj[q];
        if f != 0.0 {
            for (a, b) in self.dj.iter_mut().zip(prow.iter()) {
                *a -= f * b;
            }
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let n = lp.cost.len();
    let m = lp.rows.len();
    if lp.upper.len() != n || lp.rhs.len() != m || lp.rows.iter().any(|r| r.len() != n) {
        return Err(LpError::Malformed("dimension mismatch".into()));
    }
    if lp.upper.iter().any(|u| !(*u >= 0.0)) {
        return Err(LpError::Malformed("negative or NaN upper bound".into()));
    }
    let ncols = n + m;
    let mut t = vec![0.0; m * ncols];
    let mut beta = vec![0.0; m];
    for i in 0..m {
        let sign = if lp.rhs[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i * ncols + j] = sign * lp.rows[i][j];
        }
        t[i * ncols + n + i] = 1.0;
        beta[i] = sign * lp.rhs[i];
    }
    let mut upper = lp.upper.clone();
    upper.extend(std::iter::repeat_n(f64::INFINITY, m));
    let mut tab = Tableau {
        m,
        ncols,
        t,
        beta,
        basis: (n..ncols).collect(),
        at_upper: vec![false; ncols],
        upper,
        dj: vec![0.0; ncols],
        iterations: 0,
    };
    let max_iter = 50 * (ncols + m).max(100);

    let mut phase1 = vec![0.0; ncols];
    phase1[n..].iter_mut().for_each(|c| *c = 1.0);
    tab.run(&phase1, max_iter)?;
    let residual: f64 = tab
        .basis
        .iter()
        .zip(&tab.beta)
        .filter(|(b, _)| **b >= n)
        .map(|(_, v)| v.abs())
        .sum();
    let scale = 1.0 + lp.rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if residual > FEAS_TOL * scale {
        return Err(LpError::Infeasible { residual });
    }
    // Artificials are pinned at zero for phase 2.
    tab.upper[n..].iter_mut().for_each(|u| *u = 0.0);

    let mut phase2 = lp.cost.clone();
    phase2.extend(std::iter::repeat_n(0.0, m));
    tab.run(&phase2, max_iter)?;

    let mut x: Vec<f64> = (0..n)
        .map(|j| if tab.at_upper[j] { tab.upper[j] } else { 0.0 })
        .collect();
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.beta[i].clamp(0.0, tab.upper[b]);
        }
    }
    let objective = x.iter().zip(&lp.cost).map(|(a, c)| a * c).sum();
    Ok(LpSolution {
        x,
        objective,
        iterations: tab.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(cost: &[f64], upper: &[f64], rows: &[&[f64]], rhs: &[f64]) -> LinearProgram {
        LinearProgram {
            cost: cost.to_vec(),
            upper: upper.to_vec(),
            rows: rows.iter().map(|r| r.to_vec()).collect(),
            rhs: rhs.to_vec(),
        }
    }

    const INF: f64 = f64::INFINITY;

    #[test]
    fn small_textbook_problem() {
        // max 3x + 2y  s.t. x + y <= 4, x + 3y <= 6, x <= 3  -> x=3, y=1, obj 11
        let p = lp(
            &[-3.0, -2.0, 0.0, 0.0],
            &[3.0, INF, INF, INF],
            &[&[1.0, 1.0, 1.0, 0.0], &[1.0, 3.0, 0.0, 1.0]],
            &[4.0, 6.0],
        );
        let s = solve(&p).unwrap();
        assert!((s.objective + 11.0).abs() < 1e-9);
        assert!((s.x[0] - 3.0).abs() < 1e-9 && (s.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_and_equalities() {
        // min x + y  s.t. x - y = -2  -> x=0, y=2
        let p = lp(&[1.0, 1.0], &[INF, INF], &[&[1.0, -1.0]], &[-2.0]);
        let s = solve(&p).unwrap();
        assert!((s.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let p = lp(&[1.0], &[1.0], &[&[1.0]], &[2.0]);
        assert!(matches!(solve(&p), Err(LpError::Infeasible { .. })));
        let p = lp(&[-1.0, 0.0], &[INF, INF], &[&[1.0, -1.0]], &[0.0]);
        assert_eq!(solve(&p), Err(LpError::Unbounded));
    }

    #[test]
    fn bound_flip_only() {
        // min -x - y with x, y in [0, 1] and a redundant row x + y + s = 5
        let p = lp(&[-1.0, -1.0, 0.0], &[1.0, 1.0, INF], &[&[1.0, 1.0, 1.0]], &[5.0]);
        let s = solve(&p).unwrap();
        assert!((s.objective + 2.0).abs() < 1e-9);
        assert!((s.x[2] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Classic cycling example (Beale) in equality form with slacks.
        let p = lp(
            &[-0.75, 150.0, -0.02, 6.0, 0.0, 0.0, 0.0],
            &[INF; 7],
            &[
                &[0.25, -60.0, -0.04, 9.0, 1.0, 0.0, 0.0],
                &[0.5, -90.0, -0.02, 3.0, 0.0, 1.0, 0.0],
                &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            ],
            &[0.0, 0.0, 1.0],
        );
        let s = solve(&p).unwrap();
        assert!((s.objective + 0.05).abs() < 1e-9, "{}", s.objective);
    }
}
