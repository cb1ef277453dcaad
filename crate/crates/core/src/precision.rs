//! CLIME precision matrix estimation.
//!
//! Row `i` of the estimate solves `min |m|_1` subject to
//! `|Sigma m - e_i|_inf <= eta / sqrt(n_used)`; rows are solved
//! independently and the result is not symmetrised.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::RegressionDataset;
use crate::error::{Error, Result};
use crate::estimate::log_grid;
use crate::lp;

#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionEstimate {
    /// Possibly asymmetric estimate of the inverse of the gram matrix.
    pub omega: DMatrix<f64>,
    pub eta: f64,
    pub n_used: usize,
    /// `max_i |Sigma m_i - e_i|_inf - eta / sqrt(n_used)`; nonpositive up to
    /// solver tolerance.
    pub feasibility_slack: f64,
}

fn check_gram(sigma: &DMatrix<f64>, n_used: usize) -> Result<()> {
    if !sigma.is_square() || sigma.nrows() == 0 {
        return Err(Error::invalid(format!(
            "gram matrix must be square and nonempty, got {} x {}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    if n_used == 0 {
        return Err(Error::domain("sample count must be positive"));
    }
    Ok(())
}

fn unit(p: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; p];
    e[i] = 1.0;
    e
}

/// `|Omega Sigma - I|_max`.
pub fn residual_sup(sigma: &DMatrix<f64>, omega: &DMatrix<f64>) -> f64 {
    let prod = omega * sigma;
    let p = sigma.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..p {
        for j in 0..p {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - target).abs());
        }
    }
    worst
}

/// CLIME at level `eta`; an infeasible row is reported by index.
pub fn clime(sigma: &DMatrix<f64>, n_used: usize, eta: f64) -> Result<PrecisionEstimate> {
    check_gram(sigma, n_used)?;
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::domain(format!("eta must be finite and nonnegative, got {eta}")));
    }
    let p = sigma.nrows();
    let level = eta / (n_used as f64).sqrt();
    let rows: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|i| {
            lp::min_l1_box(sigma, &unit(p, i), level)
                .map(|sol| sol.x)
                .map_err(|err| Error::InfeasibleRow {
                    row: i,
                    source: Box::new(err),
                })
        })
        .collect::<Result<_>>()?;
    let omega = DMatrix::from_fn(p, p, |i, j| rows[i][j]);
    Ok(PrecisionEstimate {
        feasibility_slack: residual_sup(sigma, &omega) - level,
        omega,
        eta,
        n_used,
    })
}

/// CLIME at every level of `etas` from one parametric sweep per row. Each
/// entry is `None` where some row is infeasible.
pub fn clime_path(sigma: &DMatrix<f64>, n_used: usize, etas: &[f64]) -> Result<Vec<Option<DMatrix<f64>>>> {
    check_gram(sigma, n_used)?;
    let p = sigma.nrows();
    let scale = (n_used as f64).sqrt();
    let levels: Vec<f64> = etas.iter().map(|e| e / scale).collect();
    let rows: Vec<Vec<Result<lp::LpSolution>>> = (0..p)
        .into_par_iter()
        .map(|i| lp::min_l1_box_path(sigma, &unit(p, i), &levels))
        .collect::<Result<_>>()?;
    Ok((0..etas.len())
        .map(|l| {
            let mut omega = DMatrix::zeros(p, p);
            for (i, row) in rows.iter().enumerate() {
                let sol = row[l].as_ref().ok()?;
                for (j, v) in sol.x.iter().enumerate() {
                    omega[(i, j)] = *v;
                }
            }
            Some(omega)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaCvOptions {
    pub folds: usize,
    pub grid_size: usize,
    /// Smallest grid value as a fraction of the largest, `sqrt(n)`.
    pub min_ratio: f64,
}

impl Default for EtaCvOptions {
    fn default() -> Self {
        Self {
            folds: 5,
            grid_size: 20,
            min_ratio: 1e-2,
        }
    }
}

/// Chooses `eta` by K-fold cross-validation on a data segment.
///
/// Fold `f` holds the rows whose position is `f` modulo the fold count. The
/// grid is log-spaced from `sqrt(n)` (where the estimate is zero) down to
/// `min_ratio * sqrt(n)`; each training fit is scored by
/// `|Omega_train Sigma_test - I|_max` and the mean score is minimised, ties
/// going to the larger `eta`. Grid points where a training problem is
/// infeasible score infinity.
pub fn cv_eta(segment: &RegressionDataset, options: &EtaCvOptions) -> Result<f64> {
    let n = segment.n();
    let EtaCvOptions {
        folds,
        grid_size,
        min_ratio,
    } = *options;
    if grid_size == 0 {
        return Err(Error::domain("eta grid is empty"));
    }
    if folds < 2 || folds > n {
        return Err(Error::domain(format!("need 2 <= folds <= {n}, got {folds}")));
    }
    if !(min_ratio > 0.0 && min_ratio <= 1.0) {
        return Err(Error::domain(format!("grid ratio must lie in (0, 1], got {min_ratio}")));
    }
    let grid = log_grid((n as f64).sqrt(), min_ratio, grid_size);
    if grid_size == 1 {
        return Ok(grid[0]);
    }
    let p = segment.p();
    let xs = segment.x_block(0, n);
    let total = xs.tr_mul(&xs);
    let mut losses = vec![0.0; grid.len()];
    for f in 0..folds {
        let test_rows: Vec<usize> = (f..n).step_by(folds).collect();
        let n_test = test_rows.len();
        let n_train = n - n_test;
        let mut xt = DMatrix::zeros(n_test, p);
        for (r, &t) in test_rows.iter().enumerate() {
            for (j, v) in segment.row(t).iter().enumerate() {
                xt[(r, j)] = *v;
            }
        }
        let test_sum = xt.tr_mul(&xt);
        let mut train = (&total - &test_sum) / n_train as f64;
        crate::data::symmetrize(&mut train);
        let test = test_sum / n_test as f64;
        let path = clime_path(&train, n_train, &grid)?;
        for (loss, omega) in losses.iter_mut().zip(path) {
            *loss += match omega {
                Some(omega) => residual_sup(&test, &omega),
                None => f64::INFINITY,
            };
        }
    }
    let best = (0..grid.len())
        .filter(|&i| losses[i].is_finite())
        .min_by(|&i, &j| losses[i].total_cmp(&losses[j]).then(i.cmp(&j)))
        .ok_or_else(|| Error::Numerical("every eta grid point was infeasible in cross-validation".into()))?;
    Ok(grid[best])
}
