//! Regression data and interval statistics built on partial sums.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Gaussian-consistency constant applied to the raw median absolute deviation.
pub const MAD_CONSISTENCY: f64 = 1.4826;

/// `n` observations `(y_t, x_t)` in time order; `x` is stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    n: usize,
    p: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl RegressionDataset {
    /// Builds a dataset from a row-major `n x p` regressor buffer and the
    /// response. Requires `n >= 2`, `p >= 1` and finite entries.
    pub fn new(x: Vec<f64>, y: Vec<f64>, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("need at least one regressor"));
        }
        let n = y.len();
        if n < 2 {
            return Err(Error::invalid(format!("need at least 2 observations, got {n}")));
        }
        if x.len() != n * p {
            return Err(Error::invalid(format!(
                "regressor buffer has {} entries, expected {n} x {p}",
                x.len()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite response at row {}", i + 1)));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite regressor at row {}, column {}",
                i / p + 1,
                i % p + 1
            )));
        }
        Ok(Self { n, p, x, y })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.len() != y.len() {
            return Err(Error::invalid(format!(
                "{} regressor rows but {} responses",
                rows.len(),
                y.len()
            )));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::invalid(format!("row {} has a different width", i + 1)));
        }
        Self::new(rows.concat(), y, p)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    /// Regressors of the observation with 0-based index `t`.
    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.x[t * self.p..(t + 1) * self.p]
    }

    #[inline]
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Row-major regressor buffer.
    #[inline]
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Regressor matrix for rows `s..e` (0-based, exclusive end), i.e. the
    /// interval `(s, e]`.
    pub fn x_block(&self, s: usize, e: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(e - s, self.p, &self.x[s * self.p..e * self.p])
    }

    /// The observations with the given 0-based indices, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut x = Vec::with_capacity(rows.len() * self.p);
        let mut y = Vec::with_capacity(rows.len());
        for &t in rows {
            if t >= self.n {
                return Err(Error::domain(format!("row index {t} out of range for n = {}", self.n)));
            }
            x.extend_from_slice(self.row(t));
            y.push(self.y[t]);
        }
        Self::new(x, y, self.p)
    }

    /// Observations in `(s, e]`.
    pub fn segment(&self, s: usize, e: usize) -> Result<Self> {
        check_interval(s, e, self.n)?;
        Self::new(
            self.x[s * self.p..e * self.p].to_vec(),
            self.y[s..e].to_vec(),
            self.p,
        )
    }

    /// Copy with column `i` of `x` multiplied by `factors[i]`.
    pub fn scale_columns(&self, factors: &[f64]) -> Self {
        let mut x = self.x.clone();
        for row in x.chunks_exact_mut(self.p) {
            for (v, f) in row.iter_mut().zip(factors) {
                *v *= f;
            }
        }
        Self { x, ..self.clone() }
    }

    /// Copy with the response multiplied by `c`.
    pub fn scale_response(&self, c: f64) -> Self {
        Self {
            y: self.y.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }
}

pub(crate) fn check_interval(a: usize, b: usize, n: usize) -> Result<()> {
    if a >= b || b > n {
        return Err(Error::domain(format!(
            "interval ({a}, {b}] invalid for n = {n}; need 0 <= a < b <= n"
        )));
    }
    Ok(())
}

/// Cumulative sums `S[t] = sum_{u <= t} x_u y_u`, with `S[0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossProductSums {
    n: usize,
    p: usize,
    sums: Vec<f64>,
}

impl CrossProductSums {
    pub fn new(data: &RegressionDataset) -> Self {
        let (n, p) = (data.n(), data.p());
        let mut sums = vec![0.0; (n + 1) * p];
        for t in 0..n {
            let yt = data.y[t];
            let (done, rest) = sums.split_at_mut((t + 1) * p);
            let prev = &done[t * p..];
            for ((next, &prev), &xv) in rest[..p].iter_mut().zip(prev).zip(data.row(t)) {
                *next = prev + xv * yt;
            }
        }
        Self { n, p, sums }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    /// `S[t]` for `0 <= t <= n`.
    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.sums[t * self.p..(t + 1) * self.p]
    }

    pub fn interval_mean(&self, a: usize, b: usize) -> Result<IntervalMean> {
        check_interval(a, b, self.n)?;
        let len = (b - a) as f64;
        let gamma_hat = self
            .row(b)
            .iter()
            .zip(self.row(a))
            .map(|(hi, lo)| (hi - lo) / len)
            .collect();
        Ok(IntervalMean { a, b, gamma_hat })
    }

    /// `gamma_hat(k, e) - gamma_hat(s, k)`, written into `out`. Indices are
    /// not checked.
    #[inline]
    pub(crate) fn mean_difference_into(&self, s: usize, k: usize, e: usize, out: &mut [f64]) {
        let (left, right) = ((k - s) as f64, (e - k) as f64);
        let (ss, sk, se) = (self.row(s), self.row(k), self.row(e));
        for i in 0..self.p {
            out[i] = (se[i] - sk[i]) / right - (sk[i] - ss[i]) / left;
        }
    }

    /// `gamma_hat(k, e) - gamma_hat(s, k)` for `0 <= s < k < e <= n`.
    pub fn mean_difference(&self, s: usize, k: usize, e: usize) -> Result<Vec<f64>> {
        if !(s < k && k < e && e <= self.n) {
            return Err(Error::domain(format!(
                "need 0 <= s < k < e <= n, got s = {s}, k = {k}, e = {e}, n = {}",
                self.n
            )));
        }
        let mut out = vec![0.0; self.p];
        self.mean_difference_into(s, k, e, &mut out);
        Ok(out)
    }
}

/// Interval mean `gamma_hat(a, b) = (b - a)^{-1} sum_{t in (a, b]} x_t y_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMean {
    pub a: usize,
    pub b: usize,
    pub gamma_hat: Vec<f64>,
}

/// Second-moment matrix `(e - s)^{-1} sum_{t in (s, e]} x_t x_t^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalGram {
    pub s: usize,
    pub e: usize,
    pub sigma_hat: DMatrix<f64>,
}

impl IntervalGram {
    pub fn len(&self) -> usize {
        self.e - self.s
    }

    pub fn is_empty(&self) -> bool {
        self.e == self.s
    }
}

pub fn interval_gram(data: &RegressionDataset, s: usize, e: usize) -> Result<IntervalGram> {
    check_interval(s, e, data.n())?;
    Ok(IntervalGram {
        s,
        e,
        sigma_hat: gram_of_rows(data, s, e),
    })
}

pub(crate) fn gram_of_rows(data: &RegressionDataset, s: usize, e: usize) -> DMatrix<f64> {
    let xs = data.x_block(s, e);
    let mut g = xs.tr_mul(&xs);
    g /= (e - s) as f64;
    symmetrize(&mut g);
    g
}

/// Averages a square matrix with its transpose in place.
pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Result of [`mad_standardize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub data: RegressionDataset,
    /// Column `i` of the original `x` was divided by `scales[i]`; zero-MAD
    /// columns are reported with scale 1 and left unchanged.
    pub scales: Vec<f64>,
    pub mad_constant: f64,
}

/// Divides each regressor by the MAD of the differenced products
/// `(y_{t+1} x_{i,t+1} - y_t x_{it}) / sqrt(2)`.
pub fn mad_standardize(data: &RegressionDataset) -> Standardized {
    let (n, p) = (data.n(), data.p());
    let mut diffs = vec![0.0; n - 1];
    let scales: Vec<f64> = (0..p)
        .map(|i| {
            for t in 0..n - 1 {
                diffs[t] = (data.y[t + 1] * data.row(t + 1)[i] - data.y[t] * data.row(t)[i])
                    / std::f64::consts::SQRT_2;
            }
            let s = MAD_CONSISTENCY * raw_mad(&mut diffs);
            if s > 0.0 && s.is_finite() {
                s
            } else {
                1.0
            }
        })
        .collect();
    let inverse: Vec<f64> = scales.iter().map(|s| 1.0 / s).collect();
    Standardized {
        data: data.scale_columns(&inverse),
        scales,
        mad_constant: MAD_CONSISTENCY,
    }
}

/// Unscaled median absolute deviation; reorders `values`.
pub(crate) fn raw_mad(values: &mut [f64]) -> f64 {
    let m = median(values);
    for v in values.iter_mut() {
        *v = (*v - m).abs();
    }
    median(values)
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    assert!(n > 0, "median of an empty slice");
    let mid = n / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}
