//! Dense two-phase tableau simplex.
//!
//! Pricing is Dantzig's most-negative reduced cost, which keeps the tableau
//! well conditioned on the occupation LPs; Bland's lowest-index pricing
//! alone walks through bases with entries near 1e19. After a long run of
//! degenerate pivots both choices switch to Bland's rule, which cannot
//! cycle.
//!
//! Solves `min c·x` subject to `A x = b`, `x >= 0`. Redundant equality rows
//! are detected at the end of phase one and dropped.

use thiserror::Error;

const PIVOT_EPS: f64 = 1e-11;
/// Smallest tableau entry accepted as a pivot in the ratio test.
const MIN_PIVOT: f64 = 1e-9;
const FEASIBILITY_EPS: f64 = 1e-9;
const RATIO_TOL: f64 = 1e-12;
/// Primal infeasibility tolerated by the Harris ratio test.
const HARRIS_SLACK: f64 = 1e-9;
/// Rebuild-and-reprice passes after phase two.
const REFACTOR_ROUNDS: usize = 5;
/// Rows whose structural entries all fall below this are treated as
/// linear combinations of the others.
const REDUNDANT_EPS: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
const BLAND_FALLBACK: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("constraint matrix is {rows}x{cols} but rhs has {rhs} entries and costs {costs}")]
    Shape {
        rows: usize,
        cols: usize,
        rhs: usize,
        costs: usize,
    },
    #[error("linear program is infeasible (phase-one objective {0:e})")]
    Infeasible(f64),
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex exceeded {0} pivots")]
    PivotLimit(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

struct Tableau {
    /// `rows x (cols + 1)`, last column is the rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Initial rows `[A | I | b]`, used to rebuild the tableau.
    original: Vec<Vec<f64>>,
    /// Row of `original` behind each tableau row.
    origin: Vec<usize>,
    cols: usize,
    pivots: usize,
    max_pivots: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let pv = self.t[row][col];
        self.t[row].iter_mut().for_each(|x| *x /= pv);
        let pivot_row = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = line[col];
            if factor != 0.0 {
                for (x, p) in line.iter_mut().zip(&pivot_row) {
                    *x -= factor * p;
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Recomputes `B^-1 [A | I | b]` for the current basis with partial
    /// pivoting, discarding the rounding error accumulated by pivots. Leaves
    /// the tableau untouched if the basis looks singular.
    fn refactor(&mut self) {
        let k = self.t.len();
        let mut aug: Vec<Vec<f64>> = self
            .origin
            .iter()
            .map(|&o| {
                let row = &self.original[o];
                self.basis
                    .iter()
                    .map(|&bj| row[bj])
                    .chain(row.iter().copied())
                    .collect()
            })
            .collect();
        for c in 0..k {
            let p = (c..k)
                .max_by(|&a, &b| aug[a][c].abs().total_cmp(&aug[b][c].abs()))
                .expect("nonempty");
            if aug[p][c].abs() < 1e-14 {
                return;
            }
            aug.swap(c, p);
            let pv = aug[c][c];
            aug[c].iter_mut().for_each(|x| *x /= pv);
            let pivot_row = aug[c].clone();
            for (r, line) in aug.iter_mut().enumerate() {
                let f = line[c];
                if r != c && f != 0.0 {
                    line.iter_mut().zip(&pivot_row).for_each(|(x, p)| *x -= f * p);
                }
            }
        }
        for (dst, src) in self.t.iter_mut().zip(aug) {
            dst.copy_from_slice(&src[k..]);
        }
        for (r, &bj) in self.basis.iter().enumerate() {
            for (i, row) in self.t.iter_mut().enumerate() {
                row[bj] = if i == r { 1.0 } else { 0.0 };
            }
        }
    }

    /// Minimizes `cost` over the columns allowed by `allowed`.
    fn optimize(&mut self, cost: &[f64], allowed: impl Fn(usize) -> bool) -> Result<(), LpError> {
        let mut degenerate_run = 0usize;
        loop {
            if self.pivots > self.max_pivots {
                return Err(LpError::PivotLimit(self.max_pivots));
            }
            let bland = degenerate_run > BLAND_FALLBACK;
            let reduced = |j: usize| {
                cost[j]
                    - self
                        .t
                        .iter()
                        .zip(&self.basis)
                        .map(|(row, &bj)| cost[bj] * row[j])
                        .sum::<f64>()
            };
            let mut improving = (0..self.cols)
                .filter(|&j| allowed(j))
                .map(|j| (j, reduced(j)))
                .filter(|&(_, r)| r < -PIVOT_EPS);
            // Dantzig pricing; Bland's lowest index once degenerate.
            let entering = if bland {
                improving.next()
            } else {
                improving.min_by(|a, b| a.1.total_cmp(&b.1))
            }
            .map(|(j, _)| j);
            let Some(col) = entering else { return Ok(()) };

            let rhs = self.cols;
            let candidates: Vec<(usize, f64, f64)> = self
                .t
                .iter()
                .enumerate()
                .filter(|(_, row)| row[col] > MIN_PIVOT)
                .map(|(r, row)| (r, row[rhs] / row[col], row[col]))
                .collect();
            if candidates.is_empty() {
                return Err(LpError::Unbounded);
            }
            let min_ratio = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            degenerate_run = if min_ratio <= HARRIS_SLACK {
                degenerate_run + 1
            } else {
                0
            };
            let leaving = if bland {
                let tol = RATIO_TOL * (1.0 + min_ratio.abs());
                candidates
                    .iter()
                    .filter(|c| c.1 <= min_ratio + tol)
                    .min_by_key(|c| self.basis[c.0])
            } else {
                // Harris two-pass test: allow a tiny infeasibility so the
                // largest available pivot can be taken.
                let bound = candidates
                    .iter()
                    .map(|&(r, _, a)| (self.t[r][rhs].max(0.0) + HARRIS_SLACK) / a)
                    .fold(f64::INFINITY, f64::min);
                candidates
                    .iter()
                    .filter(|c| c.1 <= bound)
                    .max_by(|a, b| a.2.total_cmp(&b.2).then(self.basis[b.0].cmp(&self.basis[a.0])))
            };
            let &(row, _, _) = leaving.expect("candidates are nonempty");
            self.pivot(row, col);
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let m = lp.a.len();
    let n = lp.c.len();
    if lp.b.len() != m || lp.a.iter().any(|row| row.len() != n) {
        return Err(LpError::Shape {
            rows: m,
            cols: lp.a.first().map_or(0, Vec::len),
            rhs: lp.b.len(),
            costs: n,
        });
    }

    // Columns: n structural, then m artificial, then rhs.
    let cols = n + m;
    let mut t = Vec::with_capacity(m);
    for (i, (row, &bi)) in lp.a.iter().zip(&lp.b).enumerate() {
        let sign = if bi < 0.0 { -1.0 } else { 1.0 };
        let mut line = vec![0.0; cols + 1];
        for (dst, &src) in line.iter_mut().zip(row) {
            *dst = sign * src;
        }
        line[n + i] = 1.0;
        line[cols] = sign * bi;
        t.push(line);
    }
    let mut tab = Tableau {
        original: t.clone(),
        origin: (0..m).collect(),
        t,
        basis: (n..n + m).collect(),
        cols,
        pivots: 0,
        max_pivots: 50 * (cols + m).max(100),
    };

    let phase_one: Vec<f64> = (0..cols).map(|j| if j >= n { 1.0 } else { 0.0 }).collect();
    tab.optimize(&phase_one, |_| true)?;
    let infeasibility: f64 = tab
        .t
        .iter()
        .zip(&tab.basis)
        .filter(|(_, &bj)| bj >= n)
        .map(|(row, _)| row[cols])
        .sum();
    if infeasibility > FEASIBILITY_EPS {
        return Err(LpError::Infeasible(infeasibility));
    }

    // Drive zero-level artificials out of the basis; rows where that is
    // impossible are linear combinations of the others.
    let mut r = 0;
    while r < tab.t.len() {
        if tab.basis[r] >= n {
            let largest = (0..n).max_by(|&i, &j| tab.t[r][i].abs().total_cmp(&tab.t[r][j].abs()));
            match largest.filter(|&j| tab.t[r][j].abs() > REDUNDANT_EPS) {
                Some(j) => tab.pivot(r, j),
                None => {
                    tab.t.remove(r);
                    tab.basis.remove(r);
                    tab.origin.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }

    let mut phase_two = lp.c.clone();
    phase_two.resize(cols, 0.0);
    tab.refactor();
    tab.optimize(&phase_two, |j| j < n)?;
    for _ in 0..REFACTOR_ROUNDS {
        let before = tab.pivots;
        tab.refactor();
        tab.optimize(&phase_two, |j| j < n)?;
        if tab.pivots == before {
            break;
        }
    }

    let mut x = vec![0.0; n];
    for (row, &bj) in tab.t.iter().zip(&tab.basis) {
        if bj < n {
            x[bj] = row[cols].max(0.0);
        }
    }
    let objective = x.iter().zip(&lp.c).map(|(xi, ci)| xi * ci).sum();
    Ok(LpSolution {
        x,
        objective,
        pivots: tab.pivots,
    })
}
