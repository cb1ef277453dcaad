//! De-sparsified change estimates and simultaneous confidence intervals.
//!
//! For a change at `theta` inside `(a, b]` with LOPE estimate `delta_hat`
//! and CLIME matrix `Omega`, the bias-corrected estimate is
//! `delta_tilde = delta_hat - Omega (Sigma(a, b) delta_hat - d)` with
//! `d = gamma(theta, b) - gamma(a, theta)`. Every coordinate gets the same
//! half-width `C / c(a, theta, b)`, where `C` is a Monte Carlo quantile of a
//! sup-norm statistic, drawn either from the Gaussian limit
//! `N(0, Omega Gamma Omega')` or from a multiplier bootstrap.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::data::{gram_of_rows, symmetrize, RegressionDataset};
use crate::error::{Error, Result};
use crate::estimate::{
    anchor_intervals, cv_lambda, location_factor, lope, plug_ins, validate_change_points,
    DiffEstimate, DiffMethod, LambdaCvOptions, Tuning,
};
use crate::linalg::{psd_factor, sup_norm};
use crate::precision::{clime, cv_eta, EtaCvOptions};
use crate::rng::{derive_seed, stream_rng};

/// Even- and odd-indexed halves of a dataset (1-based original times).
#[derive(Debug, Clone, PartialEq)]
pub struct SplitData {
    /// Observations at original times 2, 4, ..., 2 n0.
    pub even: RegressionDataset,
    /// Observations at original times 1, 3, ..., 2 n0 - 1.
    pub odd: RegressionDataset,
    pub n0: usize,
    /// 0-based original row of each even-half row.
    pub even_rows: Vec<usize>,
    /// 0-based original row of each odd-half row.
    pub odd_rows: Vec<usize>,
}

impl SplitData {
    /// Location of an original change point in half-sample time.
    pub fn map_change_point(&self, theta: usize) -> usize {
        theta / 2
    }
}

/// Splits into halves of `floor(n / 2)` rows each, dropping the last row
/// when `n` is odd.
pub fn split_even_odd(data: &RegressionDataset) -> Result<SplitData> {
    let n = data.n();
    if n < 4 {
        return Err(Error::invalid(format!("sample splitting needs n >= 4, got {n}")));
    }
    let n0 = n / 2;
    let even_rows: Vec<usize> = (0..n0).map(|u| 2 * u + 1).collect();
    let odd_rows: Vec<usize> = (0..n0).map(|u| 2 * u).collect();
    Ok(SplitData {
        even: data.select_rows(&even_rows)?,
        odd: data.select_rows(&odd_rows)?,
        n0,
        even_rows,
        odd_rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Split,
    NoSplit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesparsifiedEstimate {
    pub delta_tilde: Vec<f64>,
    pub location_factor: f64,
    pub source: Source,
}

/// `delta_hat - Omega (Sigma delta_hat - d)`.
pub fn desparsify(
    delta_hat: &[f64],
    omega: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    gamma_diff: &[f64],
    location_factor: f64,
    source: Source,
) -> Result<DesparsifiedEstimate> {
    let p = delta_hat.len();
    if omega.shape() != (p, p) || sigma.shape() != (p, p) || gamma_diff.len() != p {
        return Err(Error::invalid("shape mismatch in de-sparsification"));
    }
    let dh = DVector::from_column_slice(delta_hat);
    let resid = sigma * &dh - DVector::from_column_slice(gamma_diff);
    let delta_tilde = dh - omega * resid;
    Ok(DesparsifiedEstimate {
        delta_tilde: delta_tilde.as_slice().to_vec(),
        location_factor,
        source,
    })
}

/// Bootstrap weights `(-sqrt((b - theta) / (theta - a)), sqrt((theta - a) / (b - theta)))`.
pub fn location_weights(a: usize, theta: usize, b: usize) -> Result<(f64, f64)> {
    check_triple(a, theta, b)?;
    let (l, r) = ((theta - a) as f64, (b - theta) as f64);
    Ok((-(r / l).sqrt(), (l / r).sqrt()))
}

fn check_triple(a: usize, theta: usize, b: usize) -> Result<()> {
    if !(a < theta && theta < b) {
        return Err(Error::domain(format!("need a < theta < b, got ({a}, {theta}, {b})")));
    }
    Ok(())
}

/// `U_t = x_t (y_t + x_t' delta / 2)` for `t <= theta` and
/// `x_t (y_t - x_t' delta / 2)` after, for rows in `(a, b]`.
fn score_terms(data: &RegressionDataset, a: usize, theta: usize, b: usize, delta: &[f64]) -> DMatrix<f64> {
    let p = data.p();
    let mut u = DMatrix::zeros(b - a, p);
    for t in a..b {
        let x = data.row(t);
        let fit: f64 = x.iter().zip(delta).map(|(xi, di)| xi * di).sum::<f64>() * 0.5;
        let resp = if t < theta { data.y()[t] + fit } else { data.y()[t] - fit };
        for j in 0..p {
            u[(t - a, j)] = x[j] * resp;
        }
    }
    u
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovariance {
    /// Symmetric estimate with negative eigenvalues clipped to zero.
    pub gamma_hat: DMatrix<f64>,
    /// Symmetric estimate before clipping.
    pub raw: DMatrix<f64>,
    pub min_eigenvalue: f64,
    /// Largest magnitude of a clipped eigenvalue.
    pub clip_magnitude: f64,
    pub epsilon: f64,
    /// `(a, a + floor((1 - eps)(theta - a))]`.
    pub left_window: (usize, usize),
    /// `(b - floor((1 - eps)(b - theta)), b]`.
    pub right_window: (usize, usize),
}

/// Mean-centred covariance (divisor = window length) of rows `lo..hi` of `u`.
fn window_cov(u: &DMatrix<f64>, lo: usize, hi: usize) -> DMatrix<f64> {
    let w = u.rows(lo, hi - lo);
    let mean = w.row_mean();
    let mut centred = w.into_owned();
    for mut row in centred.row_iter_mut() {
        row -= &mean;
    }
    centred.tr_mul(&centred) / (hi - lo) as f64
}

/// Averages the covariances of the score terms over a window right of `a`
/// and a window left of `b`, each covering a `1 - eps` share of its side.
pub fn gamma_hat(
    data: &RegressionDataset,
    a: usize,
    theta: usize,
    b: usize,
    delta_hat: &[f64],
    epsilon: f64,
) -> Result<NoiseCovariance> {
    check_triple(a, theta, b)?;
    if b > data.n() || delta_hat.len() != data.p() {
        return Err(Error::invalid("interval or estimate does not match the data"));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::domain(format!("epsilon must lie in [0, 1), got {epsilon}")));
    }
    let keep = |len: usize| ((1.0 - epsilon) * len as f64).floor() as usize;
    let (left_len, right_len) = (keep(theta - a), keep(b - theta));
    if left_len < 2 || right_len < 2 {
        return Err(Error::domain(format!(
            "covariance windows of length {left_len} and {right_len} around {theta}; need at least 2"
        )));
    }
    let u = score_terms(data, a, theta, b, delta_hat);
    let len = b - a;
    let mut raw = (window_cov(&u, 0, left_len) + window_cov(&u, len - right_len, len)) * 0.5;
    symmetrize(&mut raw);
    let factor = psd_factor(&raw);
    let mut gamma_hat = &factor.factor * factor.factor.transpose();
    symmetrize(&mut gamma_hat);
    if factor.clipped == 0.0 {
        gamma_hat.copy_from(&raw);
    }
    Ok(NoiseCovariance {
        gamma_hat,
        raw,
        min_eigenvalue: factor.min_eigenvalue,
        clip_magnitude: factor.clipped,
        epsilon,
        left_window: (a, a + left_len),
        right_window: (b - right_len, b),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiMethod {
    GaussianLimit,
    MultiplierBootstrap,
}

impl CiMethod {
    pub fn name(self) -> &'static str {
        match self {
            CiMethod::GaussianLimit => "gaussian_limit",
            CiMethod::MultiplierBootstrap => "multiplier_bootstrap",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBand {
    pub center: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub half_width: f64,
    pub alpha: f64,
    pub method: CiMethod,
    pub replicates: usize,
    /// Monte Carlo quantile `C` before division by the location factor.
    pub quantile: f64,
    /// Description of the sample the quantile was taken from.
    pub quantile_source: &'static str,
    /// Coordinates whose interval excludes zero.
    pub rejected: Vec<usize>,
}

fn check_ci_args(alpha: f64, replicates: usize, location_factor: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if replicates == 0 {
        return Err(Error::domain("need at least one Monte Carlo replicate"));
    }
    if !(location_factor > 0.0) || !location_factor.is_finite() {
        return Err(Error::domain(format!("location factor must be positive, got {location_factor}")));
    }
    Ok(())
}

/// The `ceil((1 - alpha) N)`-th smallest value.
pub fn upper_quantile(values: &mut [f64], alpha: f64) -> f64 {
    let n = values.len();
    let rank = ((1.0 - alpha) * n as f64).ceil().clamp(1.0, n as f64) as usize;
    *values.select_nth_unstable_by(rank - 1, f64::total_cmp).1
}

fn band(
    center: &[f64],
    quantile: f64,
    location_factor: f64,
    alpha: f64,
    method: CiMethod,
    replicates: usize,
    quantile_source: &'static str,
) -> ConfidenceBand {
    let half_width = quantile / location_factor;
    let lower: Vec<f64> = center.iter().map(|c| c - half_width).collect();
    let upper: Vec<f64> = center.iter().map(|c| c + half_width).collect();
    let rejected = (0..center.len())
        .filter(|&i| !(lower[i] < 0.0 && 0.0 < upper[i]))
        .collect();
    ConfidenceBand {
        center: center.to_vec(),
        lower,
        upper,
        half_width,
        alpha,
        method,
        replicates,
        quantile,
        quantile_source,
        rejected,
    }
}

fn normals(rng: &mut impl rand::Rng, len: usize) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| StandardNormal.sample(rng)))
}

/// Band from the Gaussian limit: `C` is the `1 - alpha` quantile of
/// `|Omega L z|_inf` over `replicates` draws, with `L L' = Gamma` (negative
/// eigenvalues clipped) and `z` standard normal.
pub fn gaussian_ci(
    delta_tilde: &[f64],
    omega: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    location_factor: f64,
    alpha: f64,
    replicates: usize,
    seed: u64,
) -> Result<ConfidenceBand> {
    check_ci_args(alpha, replicates, location_factor)?;
    let p = delta_tilde.len();
    if omega.shape() != (p, p) || gamma.shape() != (p, p) {
        return Err(Error::invalid("shape mismatch in Gaussian confidence band"));
    }
    let factor = psd_factor(gamma);
    let trace = gamma.trace();
    if factor.min_eigenvalue < -1e-6 * trace.abs() {
        return Err(Error::Numerical(format!(
            "noise covariance is not positive semi-definite: eigenvalue {:.3e} with trace {trace:.3e}",
            factor.min_eigenvalue
        )));
    }
    let m = omega * factor.factor;
    let mut stats: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r);
            let z = normals(&mut rng, p);
            (&m * z).amax()
        })
        .collect();
    let c = upper_quantile(&mut stats, alpha);
    Ok(band(
        delta_tilde,
        c,
        location_factor,
        alpha,
        CiMethod::GaussianLimit,
        replicates,
        "gaussian draws |Omega L z|_inf",
    ))
}

/// Centred, weighted score terms `w_t Omega (U_t - mean U)` for rows in `(a, b]`.
pub(crate) fn bootstrap_terms(
    data: &RegressionDataset,
    a: usize,
    theta: usize,
    b: usize,
    delta_hat: &[f64],
    omega: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let (wl, wr) = location_weights(a, theta, b)?;
    let mut u = score_terms(data, a, theta, b, delta_hat);
    let mean = u.row_mean();
    for mut row in u.row_iter_mut() {
        row -= &mean;
    }
    let mut v = u * omega.transpose();
    for (r, mut row) in v.row_iter_mut().enumerate() {
        row *= if a + r < theta { wl } else { wr };
    }
    Ok(v)
}

/// One bootstrap draw `(b - a)^{-1/2} sum_t zeta_t V_t` for given multipliers.
pub fn bootstrap_draw(terms: &DMatrix<f64>, zeta: &[f64]) -> DVector<f64> {
    let z = DVector::from_column_slice(zeta);
    terms.tr_mul(&z) / (terms.nrows() as f64).sqrt()
}

/// Band from the multiplier bootstrap. `C` is the `1 - alpha` quantile of
/// `{|W_b|_inf : b = 1..B}` pooled with `|delta_tilde|_inf`.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_ci(
    data: &RegressionDataset,
    a: usize,
    theta: usize,
    b: usize,
    delta_hat: &[f64],
    delta_tilde: &[f64],
    omega: &DMatrix<f64>,
    alpha: f64,
    replicates: usize,
    seed: u64,
) -> Result<ConfidenceBand> {
    check_triple(a, theta, b)?;
    let loc = location_factor(a, theta, b);
    check_ci_args(alpha, replicates, loc)?;
    let p = data.p();
    if b > data.n() || delta_hat.len() != p || delta_tilde.len() != p || omega.shape() != (p, p) {
        return Err(Error::invalid("shape mismatch in bootstrap confidence band"));
    }
    let terms = bootstrap_terms(data, a, theta, b, delta_hat, omega)?;
    let len = b - a;
    let mut stats: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r);
            let zeta = normals(&mut rng, len);
            bootstrap_draw(&terms, zeta.as_slice()).amax()
        })
        .collect();
    stats.push(sup_norm(delta_tilde));
    let c = upper_quantile(&mut stats, alpha);
    Ok(band(
        delta_tilde,
        c,
        loc,
        alpha,
        CiMethod::MultiplierBootstrap,
        replicates,
        "bootstrap |W|_inf pooled with |delta_tilde|_inf",
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceOptions {
    pub alpha: f64,
    pub replicates: usize,
    pub seed: u64,
    pub split: bool,
    pub epsilon: f64,
    pub method: CiMethod,
    pub lambda: Tuning,
    pub eta: Tuning,
    pub lambda_cv: LambdaCvOptions,
    pub eta_cv: EtaCvOptions,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            replicates: 999,
            seed: 0,
            split: false,
            epsilon: 0.0,
            method: CiMethod::MultiplierBootstrap,
            lambda: Tuning::CrossValidated,
            eta: Tuning::CrossValidated,
            lambda_cv: LambdaCvOptions::default(),
            eta_cv: EtaCvOptions::default(),
        }
    }
}

/// Everything computed for one change point.
#[derive(Debug, Clone, PartialEq)]
pub struct BandReport {
    /// 0-based position in the change point list.
    pub j: usize,
    pub change_point: usize,
    /// `(a, theta, b)` in the time scale of the data the estimators saw
    /// (half-sample time in split mode).
    pub a: usize,
    pub theta: usize,
    pub b: usize,
    pub estimate: DiffEstimate,
    pub eta: f64,
    pub desparsified: DesparsifiedEstimate,
    pub noise_clip: f64,
    pub band: ConfidenceBand,
    pub seed: u64,
}

/// Runs estimation, de-sparsification and the selected band construction at
/// every change point. Errors carry the 1-based change index and stage.
pub fn infer_all(
    data: &RegressionDataset,
    change_points: &[usize],
    options: &InferenceOptions,
) -> Result<Vec<BandReport>> {
    validate_change_points(change_points, data.n())?;
    if change_points.is_empty() {
        return Ok(Vec::new());
    }
    if options.split {
        let split = split_even_odd(data)?;
        let mapped: Vec<usize> = change_points.iter().map(|&c| split.map_change_point(c)).collect();
        validate_change_points(&mapped, split.n0)
            .map_err(|e| Error::domain(format!("change points collide after splitting: {e}")))?;
        let anchors = anchor_intervals(&mapped, split.n0)?;
        let eta = match options.eta {
            Tuning::Fixed(v) => v,
            Tuning::CrossValidated => {
                cv_eta(&split.even, &options.eta_cv).map_err(|e| e.at_stage(1, "eta-cv"))?
            }
        };
        let full_gram = gram_of_rows(&split.even, 0, split.n0);
        let precision = clime(&full_gram, split.n0, eta).map_err(|e| e.at_stage(1, "clime"))?;
        anchors
            .par_iter()
            .map(|anc| {
                if anc.delta_hat < 2 {
                    return Err(Error::domain(format!(
                        "anchor half-width {} < 2 around {}",
                        anc.delta_hat, anc.theta_hat
                    ))
                    .at_stage(anc.j + 1, "anchor"));
                }
                one_band(
                    &split.even,
                    &split.odd,
                    change_points[anc.j],
                    anc.j,
                    (anc.a, anc.theta_hat, anc.b),
                    Some((&precision.omega, eta)),
                    Source::Split,
                    options,
                )
            })
            .collect()
    } else {
        let q = change_points.len();
        (0..q)
            .into_par_iter()
            .map(|j| {
                let a = if j == 0 { 0 } else { change_points[j - 1] };
                let b = if j + 1 == q { data.n() } else { change_points[j + 1] };
                one_band(data, data, change_points[j], j, (a, change_points[j], b), None, Source::NoSplit, options)
            })
            .collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn one_band(
    fit: &RegressionDataset,
    plug: &RegressionDataset,
    change_point: usize,
    j: usize,
    (a, theta, b): (usize, usize, usize),
    precision: Option<(&DMatrix<f64>, f64)>,
    source: Source,
    options: &InferenceOptions,
) -> Result<BandReport> {
    let idx = j + 1;
    let lambda = match options.lambda {
        Tuning::Fixed(v) => v,
        Tuning::CrossValidated => cv_lambda(fit, a, theta, b, DiffMethod::Lope, &options.lambda_cv)
            .map_err(|e| e.at_stage(idx, "lambda-cv"))?,
    };
    let estimate = lope(fit, a, theta, b, lambda).map_err(|e| e.at_stage(idx, "lope"))?;

    let local;
    let (omega, eta) = match precision {
        Some(pre) => pre,
        None => {
            let segment = fit.segment(a, b).map_err(|e| e.at_stage(idx, "clime"))?;
            let eta = match options.eta {
                Tuning::Fixed(v) => v,
                Tuning::CrossValidated => {
                    cv_eta(&segment, &options.eta_cv).map_err(|e| e.at_stage(idx, "eta-cv"))?
                }
            };
            local = clime(&gram_of_rows(&segment, 0, b - a), b - a, eta)
                .map_err(|e| e.at_stage(idx, "clime"))?;
            (&local.omega, eta)
        }
    };

    let loc = location_factor(a, theta, b);
    let (sigma, d) = plug_ins(plug, a, theta, b);
    let desparsified = desparsify(&estimate.delta, omega, &sigma, d.as_slice(), loc, source)
        .map_err(|e| e.at_stage(idx, "desparsify"))?;
    let seed = derive_seed(options.seed, j as u64);
    let (band, noise_clip) = match options.method {
        CiMethod::GaussianLimit => {
            let noise = gamma_hat(plug, a, theta, b, &estimate.delta, options.epsilon)
                .map_err(|e| e.at_stage(idx, "gamma"))?;
            let band = gaussian_ci(
                &desparsified.delta_tilde,
                omega,
                &noise.raw,
                loc,
                options.alpha,
                options.replicates,
                seed,
            )
            .map_err(|e| e.at_stage(idx, "gaussian-ci"))?;
            (band, noise.clip_magnitude)
        }
        CiMethod::MultiplierBootstrap => {
            let band = bootstrap_ci(
                plug,
                a,
                theta,
                b,
                &estimate.delta,
                &desparsified.delta_tilde,
                omega,
                options.alpha,
                options.replicates,
                seed,
            )
            .map_err(|e| e.at_stage(idx, "bootstrap-ci"))?;
            (band, 0.0)
        }
    };
    Ok(BandReport {
        j,
        change_point,
        a,
        theta,
        b,
        estimate,
        eta,
        desparsified,
        noise_clip,
        band,
        seed,
    })
}
