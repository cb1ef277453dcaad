//! Direct estimation of the parameter change at a known location.
//!
//! Both estimators work from the interval gram `Sigma(s, e)` and the mean
//! difference `d = gamma(k, e) - gamma(s, k)`, which estimates
//! `Sigma delta` when `(s, e]` holds a single change at `k`:
//!
//! * LOPE minimises `a' Sigma a / 2 - a' d + lambda_eff |a|_1` by cyclic
//!   coordinate descent, with `lambda_eff = lambda / c(s, k, e)` and
//!   `c(s, k, e) = sqrt((k - s)(e - k) / (e - s))`;
//! * CLOM minimises `|a|_1` subject to `c(s, k, e) |Sigma a - d|_inf <= lambda`.

use nalgebra::{DMatrix, DVector};

use crate::data::{check_interval, gram_of_rows, RegressionDataset};
use crate::error::{Error, Result};
use crate::linalg::sup_norm;
use crate::lp;

const CD_TOL: f64 = 1e-8;
const CD_MAX_SWEEPS: usize = 10_000;

/// Interval `(a, b]` around `theta_hat` expected to contain no other change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnchorInterval {
    /// 0-based position of the change point in the detected list.
    pub j: usize,
    pub a: usize,
    pub b: usize,
    pub delta_hat: usize,
    pub theta_hat: usize,
}

/// `Delta_j = min(theta_j - floor((2 theta_{j-1} + theta_j) / 3),
/// ceil((theta_j + 2 theta_{j+1}) / 3) - theta_j)` with `theta_0 = 0` and
/// `theta_{q+1} = n`; the anchor is `(theta_j - Delta_j, theta_j + Delta_j]`.
pub fn anchor_intervals(change_points: &[usize], n: usize) -> Result<Vec<AnchorInterval>> {
    validate_change_points(change_points, n)?;
    let q = change_points.len();
    Ok((0..q)
        .map(|j| {
            let theta = change_points[j];
            let prev = if j == 0 { 0 } else { change_points[j - 1] };
            let next = if j + 1 == q { n } else { change_points[j + 1] };
            let left = theta - (2 * prev + theta) / 3;
            let right = (theta + 2 * next).div_ceil(3) - theta;
            let delta_hat = left.min(right);
            AnchorInterval {
                j,
                a: theta - delta_hat,
                b: theta + delta_hat,
                delta_hat,
                theta_hat: theta,
            }
        })
        .collect())
}

pub(crate) fn validate_change_points(change_points: &[usize], n: usize) -> Result<()> {
    let mut prev = 0;
    for &c in change_points {
        if c <= prev || c >= n {
            return Err(Error::domain(format!(
                "change points must be strictly increasing in (0, {n}), got {change_points:?}"
            )));
        }
        prev = c;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffMethod {
    Lope,
    Clom,
    Naive,
}

impl DiffMethod {
    pub fn name(self) -> &'static str {
        match self {
            DiffMethod::Lope => "LOPE",
            DiffMethod::Clom => "CLOM",
            DiffMethod::Naive => "NAIVE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffEstimate {
    pub delta: Vec<f64>,
    pub method: DiffMethod,
    pub lambda: f64,
    pub s: usize,
    pub k: usize,
    pub e: usize,
    /// LOPE: largest KKT violation. CLOM: constraint violation
    /// `max(|Sigma a - d|_inf - lambda / c, 0)`. NAIVE: the larger of the two
    /// Lasso KKT violations.
    pub residual: f64,
    /// False if coordinate descent stopped at the sweep limit.
    pub converged: bool,
    /// Coordinate descent sweeps or simplex pivots.
    pub iterations: usize,
}

/// `sqrt((k - s)(e - k) / (e - s))`.
pub fn location_factor(s: usize, k: usize, e: usize) -> f64 {
    (((k - s) * (e - k)) as f64 / (e - s) as f64).sqrt()
}

fn check_split(data: &RegressionDataset, s: usize, k: usize, e: usize) -> Result<()> {
    if !(s < k && k < e && e <= data.n()) {
        return Err(Error::domain(format!(
            "need 0 <= s < k < e <= n, got ({s}, {k}, {e}) with n = {}",
            data.n()
        )));
    }
    Ok(())
}

/// Mean of `x_t y_t` over rows `lo..hi`.
fn cross_mean(data: &RegressionDataset, lo: usize, hi: usize) -> DVector<f64> {
    let mut acc = DVector::zeros(data.p());
    for t in lo..hi {
        let yt = data.y()[t];
        for (a, x) in acc.iter_mut().zip(data.row(t)) {
            *a += x * yt;
        }
    }
    acc / (hi - lo) as f64
}

/// `Sigma(s, e)` and `gamma(k, e) - gamma(s, k)`.
pub(crate) fn plug_ins(
    data: &RegressionDataset,
    s: usize,
    k: usize,
    e: usize,
) -> (DMatrix<f64>, DVector<f64>) {
    let d = cross_mean(data, k, e) - cross_mean(data, s, k);
    (gram_of_rows(data, s, e), d)
}

pub(crate) struct CdOutcome {
    pub a: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Cyclic coordinate descent for `a' S a / 2 - a' d + lam |a|_1`, starting
/// from `warm` (or zero). Alternates full sweeps with sweeps over the
/// current nonzero set until a full sweep moves nothing.
pub(crate) fn lasso_cd(sigma: &DMatrix<f64>, d: &[f64], lam: f64, warm: Option<&[f64]>) -> CdOutcome {
    let p = d.len();
    let mut a = warm.map_or_else(|| vec![0.0; p], <[f64]>::to_vec);
    let mut g: Vec<f64> = (0..p)
        .map(|i| sigma.row(i).iter().zip(&a).map(|(s, x)| s * x).sum::<f64>() - d[i])
        .collect();
    let mut sweeps = 0;

    let sweep = |a: &mut [f64], g: &mut [f64], coords: &mut dyn Iterator<Item = usize>| -> f64 {
        let mut max_change: f64 = 0.0;
        for i in coords {
            let sii = sigma[(i, i)];
            let old = a[i];
            let new = if sii > 0.0 {
                soft_threshold(old * sii - g[i], lam) / sii
            } else {
                0.0
            };
            let delta = new - old;
            if delta != 0.0 {
                a[i] = new;
                for (gj, sj) in g.iter_mut().zip(sigma.column(i).iter()) {
                    *gj += delta * sj;
                }
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    };
    let tol = |a: &[f64]| CD_TOL * (1.0 + sup_norm(a));

    loop {
        if sweeps >= CD_MAX_SWEEPS {
            return CdOutcome { a, sweeps, converged: false };
        }
        sweeps += 1;
        let change = sweep(&mut a, &mut g, &mut (0..p));
        if change <= tol(&a) {
            return CdOutcome { a, sweeps, converged: true };
        }
        let active: Vec<usize> = (0..p).filter(|&i| a[i] != 0.0).collect();
        loop {
            if sweeps >= CD_MAX_SWEEPS {
                return CdOutcome { a, sweeps, converged: false };
            }
            sweeps += 1;
            let change = sweep(&mut a, &mut g, &mut active.iter().copied());
            if change <= tol(&a) {
                break;
            }
        }
    }
}

#[inline]
fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Largest KKT violation of `a` for `a' S a / 2 - a' d + lam |a|_1`.
pub fn kkt_residual(sigma: &DMatrix<f64>, d: &[f64], lam: f64, a: &[f64]) -> f64 {
    (0..d.len())
        .map(|i| {
            let g = sigma.row(i).iter().zip(a).map(|(s, x)| s * x).sum::<f64>() - d[i];
            if a[i] > 0.0 {
                (g + lam).abs()
            } else if a[i] < 0.0 {
                (g - lam).abs()
            } else {
                (g.abs() - lam).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    Ok(())
}

/// LOPE on `(s, e]` split at `k`.
pub fn lope(data: &RegressionDataset, s: usize, k: usize, e: usize, lambda: f64) -> Result<DiffEstimate> {
    check_split(data, s, k, e)?;
    check_lambda(lambda)?;
    let (sigma, d) = plug_ins(data, s, k, e);
    let lam = lambda / location_factor(s, k, e);
    let out = lasso_cd(&sigma, d.as_slice(), lam, None);
    Ok(DiffEstimate {
        residual: kkt_residual(&sigma, d.as_slice(), lam, &out.a),
        delta: out.a,
        method: DiffMethod::Lope,
        lambda,
        s,
        k,
        e,
        converged: out.converged,
        iterations: out.sweeps,
    })
}

/// CLOM on `(s, e]` split at `k`.
pub fn clom(data: &RegressionDataset, s: usize, k: usize, e: usize, lambda: f64) -> Result<DiffEstimate> {
    check_split(data, s, k, e)?;
    check_lambda(lambda)?;
    let (sigma, d) = plug_ins(data, s, k, e);
    let sol = lp::min_l1_box(&sigma, d.as_slice(), lambda / location_factor(s, k, e))?;
    Ok(DiffEstimate {
        delta: sol.x,
        method: DiffMethod::Clom,
        lambda,
        s,
        k,
        e,
        residual: sol.violation,
        converged: true,
        iterations: sol.pivots,
    })
}

/// Difference of two Lasso fits `min |y - X b|^2 / (2m) + lambda |b|_1`, on
/// `(k, e]` with `lambda1` minus on `(s, k]` with `lambda0`.
pub fn naive_diff(
    data: &RegressionDataset,
    s: usize,
    k: usize,
    e: usize,
    lambda0: f64,
    lambda1: f64,
) -> Result<DiffEstimate> {
    check_split(data, s, k, e)?;
    check_lambda(lambda0)?;
    check_lambda(lambda1)?;
    let fit = |lo: usize, hi: usize, lam: f64| {
        let sigma = gram_of_rows(data, lo, hi);
        let g = cross_mean(data, lo, hi);
        let out = lasso_cd(&sigma, g.as_slice(), lam, None);
        let res = kkt_residual(&sigma, g.as_slice(), lam, &out.a);
        (out, res)
    };
    let (before, r0) = fit(s, k, lambda0);
    let (after, r1) = fit(k, e, lambda1);
    Ok(DiffEstimate {
        delta: after.a.iter().zip(&before.a).map(|(x, y)| x - y).collect(),
        method: DiffMethod::Naive,
        lambda: lambda0.max(lambda1),
        s,
        k,
        e,
        residual: r0.max(r1),
        converged: before.converged && after.converged,
        iterations: before.sweeps + after.sweeps,
    })
}

/// Smallest `lambda` at which LOPE and CLOM return zero on `(s, e]` split at `k`.
pub fn lambda_max(data: &RegressionDataset, s: usize, k: usize, e: usize) -> Result<f64> {
    check_split(data, s, k, e)?;
    let d = cross_mean(data, k, e) - cross_mean(data, s, k);
    Ok(location_factor(s, k, e) * d.amax())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaCvOptions {
    pub grid_size: usize,
    pub folds: usize,
    /// Smallest grid value as a fraction of `lambda_max`.
    pub min_ratio: f64,
}

impl Default for LambdaCvOptions {
    fn default() -> Self {
        Self {
            grid_size: 100,
            folds: 5,
            min_ratio: 1e-3,
        }
    }
}

/// How a tuning parameter is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tuning {
    CrossValidated,
    Fixed(f64),
}

/// Log-spaced grid from `hi` down to `hi * min_ratio`.
pub(crate) fn log_grid(hi: f64, min_ratio: f64, size: usize) -> Vec<f64> {
    if size == 1 {
        return vec![hi];
    }
    let step = min_ratio.ln() / (size - 1) as f64;
    (0..size).map(|i| hi * (step * i as f64).exp()).collect()
}

/// Unnormalised second moments and side-wise cross sums over a set of rows.
#[derive(Clone)]
struct Moments {
    gram: DMatrix<f64>,
    left: DVector<f64>,
    right: DVector<f64>,
    n_left: usize,
    n_right: usize,
}

impl Moments {
    fn of_rows(data: &RegressionDataset, left: &[usize], right: &[usize]) -> Self {
        let p = data.p();
        let rows: Vec<usize> = left.iter().chain(right).copied().collect();
        let mut x = DMatrix::zeros(rows.len(), p);
        for (r, &t) in rows.iter().enumerate() {
            for (j, v) in data.row(t).iter().enumerate() {
                x[(r, j)] = *v;
            }
        }
        let side_sum = |idx: &[usize]| {
            let mut acc = DVector::zeros(p);
            for &t in idx {
                let yt = data.y()[t];
                for (a, v) in acc.iter_mut().zip(data.row(t)) {
                    *a += v * yt;
                }
            }
            acc
        };
        Self {
            gram: x.tr_mul(&x),
            left: side_sum(left),
            right: side_sum(right),
            n_left: left.len(),
            n_right: right.len(),
        }
    }

    fn minus(&self, other: &Self) -> Self {
        Self {
            gram: &self.gram - &other.gram,
            left: &self.left - &other.left,
            right: &self.right - &other.right,
            n_left: self.n_left - other.n_left,
            n_right: self.n_right - other.n_right,
        }
    }

    /// Normalised gram, mean difference and location factor.
    fn plug_ins(&self) -> (DMatrix<f64>, DVector<f64>, f64) {
        let (nl, nr) = (self.n_left as f64, self.n_right as f64);
        let mut sigma = &self.gram / (nl + nr);
        crate::data::symmetrize(&mut sigma);
        let d = &self.right / nr - &self.left / nl;
        (sigma, d, (nl * nr / (nl + nr)).sqrt())
    }
}

/// Held-out loss `a' Sigma_test a / 2 - a' d_test`.
fn quadratic_loss(sigma: &DMatrix<f64>, d: &DVector<f64>, a: &[f64]) -> f64 {
    let av = DVector::from_column_slice(a);
    0.5 * av.dot(&(sigma * &av)) - av.dot(d)
}

/// Chooses `lambda` by K-fold cross-validation on `(s, e]` split at `k`.
///
/// Folds interleave time indices within each side of `k`, so every fold
/// keeps observations from both regimes. Each fold refits on the remaining
/// rows over a log-spaced grid from `lambda_max` down to
/// `min_ratio * lambda_max` and scores the fit by the held-out quadratic
/// loss; the grid value with the smallest mean loss wins (ties go to the
/// larger value).
pub fn cv_lambda(
    data: &RegressionDataset,
    s: usize,
    k: usize,
    e: usize,
    method: DiffMethod,
    options: &LambdaCvOptions,
) -> Result<f64> {
    check_split(data, s, k, e)?;
    let LambdaCvOptions {
        grid_size,
        folds,
        min_ratio,
    } = *options;
    if grid_size == 0 {
        return Err(Error::domain("lambda grid is empty"));
    }
    if folds < 2 {
        return Err(Error::domain(format!("need at least 2 folds, got {folds}")));
    }
    if !(min_ratio > 0.0 && min_ratio <= 1.0) {
        return Err(Error::domain(format!("grid ratio must lie in (0, 1], got {min_ratio}")));
    }
    if k - s < folds || e - k < folds {
        return Err(Error::domain(format!(
            "{folds}-fold cross-validation needs at least {folds} observations on each side of {k} in ({s}, {e}]"
        )));
    }
    if method == DiffMethod::Naive {
        return Err(Error::invalid("cross-validation is defined for LOPE and CLOM"));
    }
    let hi = lambda_max(data, s, k, e)?;
    if !(hi > 0.0) {
        return Err(Error::Numerical(format!(
            "degenerate lambda grid: lambda_max = {hi} on ({s}, {e}]"
        )));
    }
    let grid = log_grid(hi, min_ratio, grid_size);
    if grid_size == 1 {
        return Ok(hi);
    }

    let left: Vec<usize> = (s..k).collect();
    let right: Vec<usize> = (k..e).collect();
    let total = Moments::of_rows(data, &left, &right);
    let mut losses = vec![0.0; grid.len()];
    for f in 0..folds {
        let pick = |rows: &[usize]| -> Vec<usize> {
            rows.iter().enumerate().filter(|(u, _)| u % folds == f).map(|(_, &t)| t).collect()
        };
        let test = Moments::of_rows(data, &pick(&left), &pick(&right));
        let (sig_tr, d_tr, loc_tr) = total.minus(&test).plug_ins();
        let (sig_te, d_te, _) = test.plug_ins();
        match method {
            DiffMethod::Lope => {
                let mut warm: Option<Vec<f64>> = None;
                for (loss, lam) in losses.iter_mut().zip(&grid) {
                    let out = lasso_cd(&sig_tr, d_tr.as_slice(), lam / loc_tr, warm.as_deref());
                    *loss += quadratic_loss(&sig_te, &d_te, &out.a);
                    warm = Some(out.a);
                }
            }
            DiffMethod::Clom => {
                let levels: Vec<f64> = grid.iter().map(|l| l / loc_tr).collect();
                let path = lp::min_l1_box_path(&sig_tr, d_tr.as_slice(), &levels)?;
                for (loss, sol) in losses.iter_mut().zip(path) {
                    *loss += match sol {
                        Ok(sol) => quadratic_loss(&sig_te, &d_te, &sol.x),
                        Err(_) => f64::INFINITY,
                    };
                }
            }
            DiffMethod::Naive => unreachable!(),
        }
    }
    let best = (0..grid.len())
        .filter(|&i| losses[i].is_finite())
        .min_by(|&i, &j| losses[i].total_cmp(&losses[j]).then(i.cmp(&j)))
        .ok_or_else(|| Error::Numerical("every lambda grid point failed in cross-validation".into()))?;
    Ok(grid[best])
}

/// Estimates the change at every detected location on its anchor interval.
/// Anchors narrower than 2 on either side are refused.
pub fn estimate_all(
    data: &RegressionDataset,
    change_points: &[usize],
    method: DiffMethod,
    tuning: Tuning,
    options: &LambdaCvOptions,
) -> Result<Vec<(AnchorInterval, DiffEstimate)>> {
    let anchors = anchor_intervals(change_points, data.n())?;
    anchors
        .into_iter()
        .map(|anc| {
            estimate_on_anchor(data, &anc, method, tuning, options)
                .map(|est| (anc, est))
                .map_err(|err| err.at_stage(anc.j + 1, "estimate"))
        })
        .collect()
}

pub(crate) fn estimate_on_anchor(
    data: &RegressionDataset,
    anc: &AnchorInterval,
    method: DiffMethod,
    tuning: Tuning,
    options: &LambdaCvOptions,
) -> Result<DiffEstimate> {
    if anc.delta_hat < 2 {
        return Err(Error::domain(format!(
            "anchor interval around {} has half-width {} < 2",
            anc.theta_hat, anc.delta_hat
        )));
    }
    check_interval(anc.a, anc.b, data.n())?;
    let (s, k, e) = (anc.a, anc.theta_hat, anc.b);
    let lambda = match tuning {
        Tuning::Fixed(v) => v,
        Tuning::CrossValidated => cv_lambda(data, s, k, e, method, options)?,
    };
    match method {
        DiffMethod::Lope => lope(data, s, k, e, lambda),
        DiffMethod::Clom => clom(data, s, k, e, lambda),
        DiffMethod::Naive => naive_diff(data, s, k, e, lambda, lambda),
    }
}
