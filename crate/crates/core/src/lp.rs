//! Two-phase dense-tableau simplex for `max cᵀx  s.t.  Ax = b, x ≥ 0`.
//!
//! Phase one drives a full set of artificial variables to zero; artificials
//! left basic at zero level are pivoted out or their (redundant) rows are
//! dropped. After phase two the basic solution is recomputed from the
//! original columns by an LU solve, which keeps equality residuals at
//! rounding level regardless of how many pivots were taken.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PivotRule {
    /// Smallest-index entering and leaving variables; never cycles.
    #[default]
    Bland,
    /// Largest reduced cost. Falls back to Bland after a run of degenerate
    /// pivots so that termination is still guaranteed.
    Dantzig,
}

impl std::str::FromStr for PivotRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bland" => Ok(Self::Bland),
            "dantzig" => Ok(Self::Dantzig),
            other => Err(Error::invalid(format!("unknown pivot rule {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    pub rule: PivotRule,
    /// Phase-one residual and basic-value sign tolerance.
    pub feasibility_tol: f64,
    /// Reduced costs above this are improving.
    pub optimality_tol: f64,
    pub max_pivots: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            rule: PivotRule::Bland,
            feasibility_tol: 1e-9,
            optimality_tol: 1e-10,
            max_pivots: 1_000_000,
        }
    }
}

/// Equality-form LP with dense rows.
#[derive(Debug, Clone)]
pub struct EqualityLp {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub basis: Vec<usize>,
    pub pivots: usize,
    pub phase_one_pivots: usize,
}

const PIVOT_EPS: f64 = 1e-11;
const DEGENERATE_SWITCH: usize = 50;

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows × (cols + 1)`, last column is the right-hand side.
    t: Vec<f64>,
    basis: Vec<usize>,
    /// Original constraint index of each tableau row.
    row_ids: Vec<usize>,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.width() + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width();
        let p = self.t[pr * w + pc];
        for j in 0..w {
            self.t[pr * w + j] /= p;
        }
        self.t[pr * w + pc] = 1.0;
        let (before, rest) = self.t.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[pc];
            if f != 0.0 {
                for (x, &p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                row[pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.width();
        self.t.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.row_ids.remove(r);
        self.rows -= 1;
    }

    /// Reduced costs `c_j - c_Bᵀ B⁻¹ A_j` for the first `limit` columns.
    fn reduced_costs(&self, cost: &[f64], limit: usize) -> Vec<f64> {
        let mut d = cost[..limit].to_vec();
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.t[r * self.width()..r * self.width() + limit];
                for (dj, &a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    /// Runs simplex iterations maximizing `cost` over columns `< limit`.
    fn optimize(&mut self, cost: &[f64], limit: usize, opts: &LpOptions, pivots: &mut usize) -> Result<()> {
        let mut degenerate_run = 0;
        loop {
            let d = self.reduced_costs(cost, limit);
            let use_bland = opts.rule == PivotRule::Bland || degenerate_run >= DEGENERATE_SWITCH;
            let entering = if use_bland {
                (0..limit).find(|&j| d[j] > opts.optimality_tol)
            } else {
                (0..limit)
                    .filter(|&j| d[j] > opts.optimality_tol)
                    .max_by(|&a, &b| d[a].total_cmp(&d[b]).then(b.cmp(&a)))
            };
            let Some(pc) = entering else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r).max(0.0) / a;
                    best = match best {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - 1e-14
                                || (ratio <= bratio + 1e-14 && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            let Some((pr, ratio)) = best else {
                return Err(Error::Unbounded);
            };
            if ratio <= 1e-14 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(pr, pc);
            *pivots += 1;
            if *pivots > opts.max_pivots {
                return Err(Error::PivotLimit(opts.max_pivots));
            }
        }
    }
}

pub fn solve(lp: &EqualityLp, opts: &LpOptions) -> Result<LpSolution> {
    let m = lp.a.len();
    let n = lp.c.len();
    if lp.b.len() != m || lp.a.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("LP dimensions are inconsistent"));
    }
    if n == 0 {
        return Err(Error::invalid("LP has no variables"));
    }

    // columns: n structural, m artificial
    let cols = n + m;
    let w = cols + 1;
    let mut t = vec![0.0; m * w];
    for (r, (row, &rhs)) in lp.a.iter().zip(&lp.b).enumerate() {
        let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
        for (j, &a) in row.iter().enumerate() {
            t[r * w + j] = sign * a;
        }
        t[r * w + n + r] = 1.0;
        t[r * w + cols] = sign * rhs;
    }
    let mut tab = Tableau {
        rows: m,
        cols,
        t,
        basis: (n..n + m).collect(),
        row_ids: (0..m).collect(),
    };

    let mut pivots = 0;
    let mut phase_one_cost = vec![0.0; cols];
    for c in phase_one_cost.iter_mut().skip(n) {
        *c = -1.0;
    }
    tab.optimize(&phase_one_cost, cols, opts, &mut pivots)?;
    let phase_one_pivots = pivots;
    let residual: f64 = (0..tab.rows)
        .filter(|&r| tab.basis[r] >= n)
        .map(|r| tab.rhs(r).abs())
        .sum();
    if residual > opts.feasibility_tol {
        return Err(Error::Infeasible(residual));
    }

    // drive remaining artificials out of the basis
    let mut r = 0;
    while r < tab.rows {
        if tab.basis[r] >= n {
            let col = (0..n).find(|&j| tab.at(r, j).abs() > 1e-9);
            match col {
                Some(j) => {
                    tab.pivot(r, j);
                    pivots += 1;
                    r += 1;
                }
                None => tab.remove_row(r),
            }
        } else {
            r += 1;
        }
    }

    let mut cost = lp.c.clone();
    cost.resize(cols, 0.0);
    tab.optimize(&cost, n, opts, &mut pivots)?;

    // recompute basic values from the original data
    let basis = tab.basis.clone();
    let x = recompute_basic_solution(lp, &basis, &tab, opts)?;
    let objective = x.iter().zip(&lp.c).map(|(x, c)| x * c).sum();
    Ok(LpSolution {
        x,
        objective,
        basis,
        pivots,
        phase_one_pivots,
    })
}

fn recompute_basic_solution(lp: &EqualityLp, basis: &[usize], tab: &Tableau, opts: &LpOptions) -> Result<Vec<f64>> {
    let n = lp.c.len();
    let k = basis.len();
    let mut x = vec![0.0; n];
    let bmat = Matrix::from_fn(k, k, |r, j| lp.a[tab.row_ids[r]][basis[j]]);
    let rhs = Vector::from_fn(k, |r, _| lp.b[tab.row_ids[r]]);
    match bmat.lu().solve(&rhs) {
        Some(xb) if xb.iter().all(|v| v.is_finite()) => {
            for (j, &col) in basis.iter().enumerate() {
                x[col] = xb[j];
            }
        }
        _ => {
            for (r, &col) in basis.iter().enumerate() {
                x[col] = tab.rhs(r);
            }
        }
    }
    for v in x.iter_mut() {
        if *v < 0.0 {
            if *v < -opts.feasibility_tol {
                return Err(Error::Internal(format!("basic variable {v:e} is negative")));
            }
            *v = 0.0;
        }
    }
    Ok(x)
}
