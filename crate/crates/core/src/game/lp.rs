//! Dense bounded-variable primal simplex.
//!
//! Maximizes `c . x` subject to linear rows and `0 <= x <= u`. Phase 1 drives
//! artificial variables to zero; pivoting uses the largest reduced cost and falls
//! back to Bland's rule after a run of degenerate pivots.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

/// A linear program in `n` variables.
#[derive(Clone, Debug)]
pub struct Lp {
    pub objective: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Cmp, f64)>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Row duals, sign convention of a maximization (`<=` rows have `y >= 0`).
    pub duals: Vec<f64>,
}

impl Lp {
    pub fn new(objective: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(objective.len(), upper.len());
        Lp {
            objective,
            upper,
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, coefs: Vec<f64>, cmp: Cmp, rhs: f64) {
        assert_eq!(coefs.len(), self.objective.len());
        self.rows.push((coefs, cmp, rhs));
    }

    /// `Ok(None)` when infeasible.
    pub fn solve(&self) -> Result<Option<LpSolution>> {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    m: usize,
    ncol: usize,
    n: usize,
    t: Vec<Vec<f64>>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    upper: Vec<f64>,
    at_upper: Vec<bool>,
    /// Column holding the initial identity entry of each row.
    ident: Vec<usize>,
    flipped: Vec<bool>,
    artificial: Vec<bool>,
}

impl Tableau {
    fn build(lp: &Lp) -> Self {
        let n = lp.objective.len();
        let m = lp.rows.len();
        let n_slack = lp.rows.iter().filter(|r| r.1 != Cmp::Eq).count();
        let mut flipped = vec![false; m];
        let mut needs_art = vec![false; m];
        let mut slack_of = vec![usize::MAX; m];
        let mut k = n;
        for (r, row) in lp.rows.iter().enumerate() {
            flipped[r] = row.2 < 0.0;
            if row.1 != Cmp::Eq {
                slack_of[r] = k;
                k += 1;
            }
            let slack_sign = match row.1 {
                Cmp::Le => 1.0,
                Cmp::Ge => -1.0,
                Cmp::Eq => 0.0,
            } * if flipped[r] { -1.0 } else { 1.0 };
            needs_art[r] = slack_sign <= 0.0;
        }
        let n_art = needs_art.iter().filter(|&&a| a).count();
        let ncol = n + n_slack + n_art;
        let mut t = vec![vec![0.0; ncol]; m];
        let mut beta = vec![0.0; m];
        let mut basis = vec![0; m];
        let mut ident = vec![0; m];
        let mut artificial = vec![false; ncol];
        let mut upper: Vec<f64> = lp.upper.clone();
        upper.extend(std::iter::repeat_n(f64::INFINITY, n_slack + n_art));
        let mut a = n + n_slack;
        for (r, row) in lp.rows.iter().enumerate() {
            let sign = if flipped[r] { -1.0 } else { 1.0 };
            for (c, &v) in row.0.iter().enumerate() {
                t[r][c] = sign * v;
            }
            if slack_of[r] != usize::MAX {
                t[r][slack_of[r]] = sign * if row.1 == Cmp::Le { 1.0 } else { -1.0 };
            }
            beta[r] = sign * row.2;
            if needs_art[r] {
                t[r][a] = 1.0;
                artificial[a] = true;
                basis[r] = a;
                ident[r] = a;
                a += 1;
            } else {
                basis[r] = slack_of[r];
                ident[r] = slack_of[r];
            }
        }
        Tableau {
            m,
            ncol,
            n,
            t,
            beta,
            basis,
            upper,
            at_upper: vec![false; ncol],
            ident,
            flipped,
            artificial,
        }
    }

    fn value_of(&self, col: usize) -> f64 {
        if let Some(r) = self.basis.iter().position(|&b| b == col) {
            self.beta[r]
        } else if self.at_upper[col] {
            self.upper[col]
        } else {
            0.0
        }
    }

    fn optimize(&mut self, cost: &[f64]) -> Result<()> {
        let mut in_basis = vec![false; self.ncol];
        for &b in &self.basis {
            in_basis[b] = true;
        }
        let mut degenerate = 0usize;
        let max_iter = 50_000 + 100 * (self.m + self.ncol);
        for _ in 0..max_iter {
            let bland = degenerate >= DEGENERATE_RUN;
            // Reduced costs.
            let mut enter: Option<(usize, f64, f64)> = None;
            for c in 0..self.ncol {
                if in_basis[c] || self.upper[c] <= 0.0 && !self.at_upper[c] {
                    continue;
                }
                let mut d = cost[c];
                for r in 0..self.m {
                    let tc = self.t[r][c];
                    if tc != 0.0 {
                        d -= cost[self.basis[r]] * tc;
                    }
                }
                let dir = if !self.at_upper[c] && d > COST_TOL {
                    1.0
                } else if self.at_upper[c] && d < -COST_TOL {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    enter = Some((c, dir, d));
                    break;
                }
                if enter.is_none_or(|e| d.abs() > e.2.abs()) {
                    enter = Some((c, dir, d));
                }
            }
            let Some((c, dir, _)) = enter else {
                return Ok(());
            };
            // Ratio test.
            let mut theta = self.upper[c];
            let mut leave: Option<(usize, bool)> = None;
            for r in 0..self.m {
                let a = dir * self.t[r][c];
                let lim = if a > PIVOT_TOL {
                    self.beta[r].max(0.0) / a
                } else if a < -PIVOT_TOL && self.upper[self.basis[r]].is_finite() {
                    (self.upper[self.basis[r]] - self.beta[r]).max(0.0) / -a
                } else {
                    continue;
                };
                let better = lim < theta - 1e-14
                    || (lim <= theta + 1e-14
                        && leave.is_some_and(|(lr, _)| self.basis[r] < self.basis[lr]));
                if better || (leave.is_none() && lim <= theta) {
                    theta = lim;
                    leave = Some((r, a < 0.0));
                }
            }
            if theta.is_infinite() {
                return Err(Error::Invariant("linear program is unbounded".into()));
            }
            degenerate = if theta <= 1e-14 { degenerate + 1 } else { 0 };
            for r in 0..self.m {
                self.beta[r] -= dir * theta * self.t[r][c];
            }
            match leave {
                None => {
                    self.at_upper[c] = !self.at_upper[c];
                }
                Some((r, to_upper)) => {
                    let entering_value = if self.at_upper[c] {
                        self.upper[c] - theta
                    } else {
                        theta
                    };
                    let old = self.basis[r];
                    in_basis[old] = false;
                    self.at_upper[old] = to_upper;
                    in_basis[c] = true;
                    self.at_upper[c] = false;
                    self.basis[r] = c;
                    self.beta[r] = entering_value;
                    self.pivot(r, c);
                }
            }
        }
        Err(Error::Invariant("simplex iteration limit reached".into()))
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let prow = self.t[r].clone();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i][c];
            if f != 0.0 {
                for (v, &pv) in self.t[i].iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
            }
        }
    }

    fn run(mut self, lp: &Lp) -> Result<Option<LpSolution>> {
        if self.artificial.iter().any(|&a| a) {
            let cost: Vec<f64> = (0..self.ncol)
                .map(|c| if self.artificial[c] { -1.0 } else { 0.0 })
                .collect();
            self.optimize(&cost)?;
            let infeas: f64 = (0..self.ncol)
                .filter(|&c| self.artificial[c])
                .map(|c| self.value_of(c))
                .sum();
            if infeas > FEAS_TOL {
                return Ok(None);
            }
            for c in 0..self.ncol {
                if self.artificial[c] {
                    self.upper[c] = 0.0;
                    self.at_upper[c] = false;
                }
            }
            for r in 0..self.m {
                if self.artificial[self.basis[r]] {
                    self.beta[r] = 0.0;
                }
            }
        }
        let mut cost = vec![0.0; self.ncol];
        cost[..self.n].copy_from_slice(&lp.objective);
        self.optimize(&cost)?;
        let x: Vec<f64> = (0..self.n).map(|c| self.value_of(c)).collect();
        let value = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
        let duals = (0..self.m)
            .map(|row| {
                let col = self.ident[row];
                let y: f64 = (0..self.m)
                    .map(|r| cost[self.basis[r]] * self.t[r][col])
                    .sum();
                if self.flipped[row] {
                    -y
                } else {
                    y
                }
            })
            .collect();
        Ok(Some(LpSolution { x, value, duals }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36.
        let mut lp = Lp::new(vec![3.0, 5.0], vec![f64::INFINITY; 2]);
        lp.row(vec![1.0, 0.0], Cmp::Le, 4.0);
        lp.row(vec![0.0, 2.0], Cmp::Le, 12.0);
        lp.row(vec![3.0, 2.0], Cmp::Le, 18.0);
        let s = lp.solve().unwrap().unwrap();
        assert!((s.value - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
        assert!(
            s.duals[0].abs() < 1e-9
                && (s.duals[1] - 1.5).abs() < 1e-9
                && (s.duals[2] - 1.0).abs() < 1e-9
        );
    }

    #[test]
    fn bounds_and_phase_one() {
        // max x + y, x + y >= 1, x - y = 0.5, x, y <= 1.
        let mut lp = Lp::new(vec![1.0, 1.0], vec![1.0, 1.0]);
        lp.row(vec![1.0, 1.0], Cmp::Ge, 1.0);
        lp.row(vec![1.0, -1.0], Cmp::Eq, 0.5);
        let s = lp.solve().unwrap().unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-9 && (s.x[1] - 0.5).abs() < 1e-9);
        let mut lp = Lp::new(vec![1.0], vec![1.0]);
        lp.row(vec![1.0], Cmp::Ge, 2.0);
        assert!(lp.solve().unwrap().is_none());
    }

    #[test]
    fn negative_rhs() {
        // max -x, -x <= -0.25, x <= 1.
        let mut lp = Lp::new(vec![-1.0], vec![1.0]);
        lp.row(vec![-1.0], Cmp::Le, -0.25);
        let s = lp.solve().unwrap().unwrap();
        assert!((s.x[0] - 0.25).abs() < 1e-12);
        assert!((s.duals[0] - 1.0).abs() < 1e-9);
    }
}
