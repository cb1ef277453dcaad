//! Box-constrained l1 minimisation
//!
//! `minimise |x|_1 subject to |A x - d|_inf <= c`
//!
//! solved as a linear program in `x = u - v`, `u, v >= 0`, with one slack per
//! side of every constraint. The solver is a parametric dual simplex in the
//! level `c`: at `c >= |d|_inf` the all-slack basis is optimal (`x = 0`), and
//! as `c` decreases the basic values `alpha + c beta` move linearly until one
//! turns negative, at which point a dual simplex pivot restores primal
//! feasibility while keeping the reduced costs nonnegative. A single sweep
//! therefore returns the solution at every requested level, which is what
//! cross-validation over a grid needs.
//!
//! Only the `u` columns of the tableau are stored; the `v` columns are their
//! negatives and the `v` reduced costs are `2 - rc(u)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-10;
const BETA_TOL: f64 = 1e-12;
const POLISH_TOL: f64 = 1e-9;
/// Breakpoints within this distance (relative to `max(|d|_inf, 1)`) of the
/// requested level are treated as reached.
const LEVEL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub level: f64,
    /// `max(|A x - d|_inf - c, 0)`.
    pub violation: f64,
    /// Simplex pivots performed along the path up to this level.
    pub pivots: usize,
}

/// Solves at a single level `c >= 0`.
pub fn min_l1_box(a: &DMatrix<f64>, d: &[f64], level: f64) -> Result<LpSolution> {
    min_l1_box_path(a, d, &[level])?
        .pop()
        .expect("one level requested")
}

/// Solves at every level in `levels` (any order) in one parametric sweep.
/// The outer error reports malformed input; each inner result is the
/// solution at the corresponding level or an [`Error::Infeasible`].
pub fn min_l1_box_path(
    a: &DMatrix<f64>,
    d: &[f64],
    levels: &[f64],
) -> Result<Vec<Result<LpSolution>>> {
    let (m, p) = a.shape();
    if d.len() != m {
        return Err(Error::invalid(format!(
            "constraint matrix has {m} rows but target has {} entries",
            d.len()
        )));
    }
    if m == 0 || p == 0 {
        return Err(Error::invalid("empty constraint matrix"));
    }
    if a.iter().chain(d).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite entry in l1 problem"));
    }
    if let Some(c) = levels.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
        return Err(Error::domain(format!("level must be finite and nonnegative, got {c}")));
    }

    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&i, &j| levels[j].total_cmp(&levels[i]));

    let mut tab = Tableau::new(a, d);
    let max_pivots = 50 * (2 * m + p) + 1000;
    let slack = LEVEL_TOL * d.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let mut out: Vec<Option<Result<LpSolution>>> = (0..levels.len()).map(|_| None).collect();
    let mut failure: Option<(usize, f64)> = None;

    for &idx in &order {
        let target = levels[idx];
        if let Some((constraint, boundary)) = failure {
            out[idx] = Some(Err(Error::Infeasible {
                constraint,
                level: target,
                boundary,
            }));
            continue;
        }
        loop {
            match tab.breakpoint() {
                Some((r, c_star)) if c_star > target + slack => {
                    if tab.pivots >= max_pivots {
                        return Err(Error::Numerical(format!(
                            "l1 solver exceeded {max_pivots} pivots"
                        )));
                    }
                    if !tab.dual_pivot(r) {
                        let constraint = tab.constraint_of_row(r);
                        failure = Some((constraint, c_star));
                        out[idx] = Some(Err(Error::Infeasible {
                            constraint,
                            level: target,
                            boundary: c_star,
                        }));
                        break;
                    }
                }
                _ => {
                    out[idx] = Some(Ok(tab.solution(a, d, target)));
                    break;
                }
            }
        }
    }
    Ok(out.into_iter().map(|r| r.expect("every level visited")).collect())
}

struct Tableau {
    m2: usize,
    p: usize,
    ncols: usize,
    /// Row-major `m2 x ncols`: `u` columns then slack columns.
    t: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    rc: Vec<f64>,
    /// Virtual column index per row: `0..p` for `u`, `p..2p` for `v`,
    /// `2p..2p + m2` for slacks.
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn new(a: &DMatrix<f64>, d: &[f64]) -> Self {
        let (m, p) = a.shape();
        let m2 = 2 * m;
        let ncols = p + m2;
        let mut t = vec![0.0; m2 * ncols];
        for i in 0..m {
            for j in 0..p {
                t[i * ncols + j] = a[(i, j)];
                t[(m + i) * ncols + j] = -a[(i, j)];
            }
        }
        for r in 0..m2 {
            t[r * ncols + p + r] = 1.0;
        }
        let alpha = d.iter().copied().chain(d.iter().map(|v| -v)).collect();
        let mut rc = vec![0.0; ncols];
        rc[..p].fill(1.0);
        Self {
            m2,
            p,
            ncols,
            t,
            alpha,
            beta: vec![1.0; m2],
            rc,
            basis: (0..m2).map(|r| 2 * p + r).collect(),
            pivots: 0,
        }
    }

    /// Row whose basic value turns negative first as the level decreases,
    /// with that level.
    fn breakpoint(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.m2 {
            if self.beta[r] > BETA_TOL {
                let c = -self.alpha[r] / self.beta[r];
                if best.is_none_or(|(_, b)| c > b) {
                    best = Some((r, c));
                }
            }
        }
        best
    }

    fn constraint_of_row(&self, r: usize) -> usize {
        let v = self.basis[r];
        let m = self.m2 / 2;
        if v >= 2 * self.p {
            (v - 2 * self.p) % m
        } else {
            r % m
        }
    }

    /// Dual ratio test on row `r` and pivot; false if no column can enter.
    fn dual_pivot(&mut self, r: usize) -> bool {
        let row = &self.t[r * self.ncols..(r + 1) * self.ncols];
        let mut best: Option<(usize, f64, f64)> = None;
        let mut consider = |q: usize, entry: f64, cost: f64| {
            if entry < -PIVOT_TOL {
                let ratio = cost.max(0.0) / -entry;
                let better = match best {
                    None => true,
                    Some((_, br, be)) => ratio < br || (ratio == br && -entry > be),
                };
                if better {
                    best = Some((q, ratio, -entry));
                }
            }
        };
        for j in 0..self.p {
            consider(j, row[j], self.rc[j]);
            consider(self.p + j, -row[j], 2.0 - self.rc[j]);
        }
        for k in 0..self.m2 {
            consider(2 * self.p + k, row[self.p + k], self.rc[self.p + k]);
        }
        match best {
            Some((q, _, _)) => {
                self.pivot(r, q);
                true
            }
            None => false,
        }
    }

    fn stored(&self, q: usize) -> (usize, f64) {
        if q < self.p {
            (q, 1.0)
        } else if q < 2 * self.p {
            (q - self.p, -1.0)
        } else {
            (q - self.p, 1.0)
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let (col, sign) = self.stored(q);
        let nc = self.ncols;
        let column: Vec<f64> = (0..self.m2).map(|i| sign * self.t[i * nc + col]).collect();
        let inv = 1.0 / column[r];

        let mut pivot_row = self.t[r * nc..(r + 1) * nc].to_vec();
        pivot_row.iter_mut().for_each(|v| *v *= inv);
        let (pa, pb) = (self.alpha[r] * inv, self.beta[r] * inv);

        for (i, &f) in column.iter().enumerate() {
            if i == r || f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * nc..(i + 1) * nc];
            for (v, &w) in row.iter_mut().zip(&pivot_row) {
                *v -= f * w;
            }
            self.alpha[i] -= f * pa;
            self.beta[i] -= f * pb;
        }
        let rq = if q >= self.p && q < 2 * self.p {
            2.0 - self.rc[col]
        } else {
            self.rc[col]
        };
        for (v, &w) in self.rc.iter_mut().zip(&pivot_row) {
            *v -= rq * w;
        }
        self.t[r * nc..(r + 1) * nc].copy_from_slice(&pivot_row);
        self.alpha[r] = pa;
        self.beta[r] = pb;

        for i in 0..self.m2 {
            self.t[i * nc + col] = if i == r { sign } else { 0.0 };
        }
        self.rc[col] = if sign < 0.0 { 2.0 } else { 0.0 };
        self.basis[r] = q;
        self.pivots += 1;
    }

    fn primal(&self, values: impl Iterator<Item = (usize, f64)>) -> Vec<f64> {
        let mut x = vec![0.0; self.p];
        for (q, v) in values {
            if q < self.p {
                x[q] += v;
            } else if q < 2 * self.p {
                x[q - self.p] -= v;
            }
        }
        x
    }

    fn solution(&self, a: &DMatrix<f64>, d: &[f64], c: f64) -> LpSolution {
        let x = self.primal(
            (0..self.m2).map(|r| (self.basis[r], (self.alpha[r] + c * self.beta[r]).max(0.0))),
        );
        let mut violation = violation_of(a, d, &x, c);
        let mut best = x;
        if violation > POLISH_TOL {
            if let Some(x) = self.polish(a, d, c) {
                let v = violation_of(a, d, &x, c);
                if v < violation {
                    violation = v;
                    best = x;
                }
            }
        }
        LpSolution {
            x: best,
            level: c,
            violation,
            pivots: self.pivots,
        }
    }

    /// Recomputes the basic values from the original data.
    fn polish(&self, a: &DMatrix<f64>, d: &[f64], c: f64) -> Option<Vec<f64>> {
        let m = self.m2 / 2;
        let mut b = DMatrix::zeros(self.m2, self.m2);
        for (r, &q) in self.basis.iter().enumerate() {
            if q < 2 * self.p {
                let (j, sign) = if q < self.p { (q, 1.0) } else { (q - self.p, -1.0) };
                for i in 0..m {
                    b[(i, r)] = sign * a[(i, j)];
                    b[(m + i, r)] = -sign * a[(i, j)];
                }
            } else {
                b[(q - 2 * self.p, r)] = 1.0;
            }
        }
        let rhs = DVector::from_iterator(
            self.m2,
            d.iter().map(|v| v + c).chain(d.iter().map(|v| c - v)),
        );
        let xb = b.lu().solve(&rhs)?;
        Some(self.primal(
            self.basis
                .iter()
                .zip(xb.iter())
                .map(|(&q, &v)| (q, v.max(0.0))),
        ))
    }
}

/// `max(|A x - d|_inf - c, 0)`.
pub fn violation_of(a: &DMatrix<f64>, d: &[f64], x: &[f64], c: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, di) in d.iter().enumerate() {
        let r: f64 = a.row(i).iter().zip(x).map(|(aij, xj)| aij * xj).sum::<f64>() - di;
        worst = worst.max(r.abs() - c);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l1(x: &[f64]) -> f64 {
        x.iter().map(|v| v.abs()).sum()
    }

    #[test]
    fn scalar_soft_threshold() {
        let a = DMatrix::from_element(1, 1, 2.0);
        for (d, c, want) in [(3.0, 1.0, 1.0), (-3.0, 1.0, -1.0), (3.0, 5.0, 0.0), (3.0, 0.0, 1.5)] {
            let s = min_l1_box(&a, &[d], c).unwrap();
            assert!((s.x[0] - want).abs() < 1e-12, "d={d} c={c}: {:?}", s.x);
        }
    }

    #[test]
    fn zero_above_sup_norm() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let s = min_l1_box(&a, &[0.3, -0.7], 0.7).unwrap();
        assert_eq!(s.x, vec![0.0, 0.0]);
        assert_eq!(s.pivots, 0);
    }

    #[test]
    fn identity_shrinks_uniformly() {
        let a = DMatrix::identity(4, 4);
        let d = [1.0, -2.0, 0.5, 0.0];
        let s = min_l1_box(&a, &d, 0.75).unwrap();
        assert!(s.x.iter().zip([0.25, -1.25, 0.0, 0.0]).all(|(x, w)| (x - w).abs() < 1e-12));
    }

    #[test]
    fn exact_solve_at_zero() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let d = [1.0, 2.0, -1.0];
        let s = min_l1_box(&a, &d, 0.0).unwrap();
        let want = a.clone().lu().solve(&DVector::from_column_slice(&d)).unwrap();
        assert!(s.x.iter().zip(want.iter()).all(|(x, w)| (x - w).abs() < 1e-10));
    }

    #[test]
    fn path_matches_single_solves() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.7, -0.3, 0.7, 1.5, 0.4, -0.3, 0.4, 1.0]);
        let d = [1.2, -0.8, 0.5];
        let levels = [0.05, 0.8, 0.3, 0.0, 2.0];
        let path = min_l1_box_path(&a, &d, &levels).unwrap();
        for (c, sol) in levels.iter().zip(path) {
            let sol = sol.unwrap();
            let single = min_l1_box(&a, &d, *c).unwrap();
            assert!((l1(&sol.x) - l1(&single.x)).abs() < 1e-10);
            assert!(sol.violation <= 1e-9);
            assert_eq!(sol.level, *c);
        }
    }

    #[test]
    fn singular_system_infeasible_below_half() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        match min_l1_box(&a, &[1.0, 0.0], 0.3) {
            Err(Error::Infeasible { boundary, level, .. }) => {
                assert!((boundary - 0.5).abs() < 1e-12);
                assert_eq!(level, 0.3);
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
        let ok = min_l1_box(&a, &[1.0, 0.0], 0.6).unwrap();
        assert!((l1(&ok.x) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let a = DMatrix::identity(2, 2);
        assert!(min_l1_box(&a, &[1.0], 0.1).is_err());
        assert!(min_l1_box(&a, &[1.0, 0.0], -0.1).is_err());
        assert!(min_l1_box(&a, &[f64::NAN, 0.0], 0.1).is_err());
    }
}
