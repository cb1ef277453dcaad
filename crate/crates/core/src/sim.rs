//! Synthetic scenarios and evaluation metrics.
//!
//! * `M1`: `x_t ~ N(0, I)`, a single change with `beta_0 = -beta_1 = rho delta`,
//!   `delta` uniform on the unit sphere of a uniformly drawn support.
//! * `M2`: `x_t ~ N(0, Sigma)` with `Sigma_ij = gamma^|i - j|`, a single change
//!   with `beta_0 = mu - delta / 2`, `beta_1 = mu + delta / 2`, `delta` having
//!   `s` random entries `+-1` and `mu = nu mu_0 / sqrt(p)`, `mu_0 ~ N(0, I)`.
//! * `M3`: `x_t ~ N(0, I)`, changes at `n/4, n/2, 3n/4`, `beta_j = (-1)^j beta_0`
//!   with `beta_0 = 0.4 (1, -1, 1, -1, 0, ...)`.
//!
//! Noise is standard normal throughout. Parameters are drawn from stream 0
//! and the design and noise from stream 1 of the scenario seed.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::RegressionDataset;
use crate::error::{Error, Result};
use crate::inference::ConfidenceBand;
use crate::linalg::sym_sqrt;
use crate::rng::{derive_seed, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Scenario {
    M1,
    M2,
    M3,
    /// Identity design with the given change points and alternating
    /// `+-rho` coefficients on the first `sparsity` coordinates.
    Custom,
}

/// Scenario parameters; unused fields are ignored by the chosen scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub p: usize,
    /// Change points for `M1`, `M2` (first entry) and `Custom`; `M3` derives its own.
    pub change_points: Vec<usize>,
    pub rho: f64,
    pub sparsity: usize,
    pub gamma: f64,
    pub nu: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::M1,
            n: 300,
            p: 200,
            change_points: vec![75],
            rho: 2.0,
            sparsity: 5,
            gamma: 0.6,
            nu: 1.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn m1(n: usize, p: usize, rho: f64, sparsity: usize, theta: usize, seed: u64) -> Self {
        Self {
            scenario: Scenario::M1,
            n,
            p,
            change_points: vec![theta],
            rho,
            sparsity,
            seed,
            ..Self::default()
        }
    }

    pub fn m2(n: usize, p: usize, gamma: f64, nu: f64, sparsity: usize, theta: usize, seed: u64) -> Self {
        Self {
            scenario: Scenario::M2,
            n,
            p,
            change_points: vec![theta],
            sparsity,
            gamma,
            nu,
            seed,
            ..Self::default()
        }
    }

    pub fn m3(n: usize, p: usize, seed: u64) -> Self {
        Self {
            scenario: Scenario::M3,
            n,
            p,
            change_points: vec![n / 4, n / 2, 3 * n / 4],
            sparsity: 4,
            seed,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("scenario config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serialises")
    }

    /// Same scenario with the seed of repetition `rep`.
    pub fn for_repetition(&self, rep: u64) -> Self {
        Self {
            seed: derive_seed(self.seed, rep),
            ..self.clone()
        }
    }

    pub fn generate(&self) -> Result<(RegressionDataset, Truth)> {
        let theta = || {
            self.change_points
                .first()
                .copied()
                .ok_or_else(|| Error::invalid("scenario needs a change point"))
        };
        match self.scenario {
            Scenario::M1 => gen_m1(self.n, self.p, self.rho, self.sparsity, theta()?, self.seed),
            Scenario::M2 => gen_m2(self.n, self.p, self.gamma, self.nu, self.sparsity, theta()?, self.seed),
            Scenario::M3 => gen_m3(self.n, self.p, self.seed),
            Scenario::Custom => gen_custom(self.n, self.p, &self.change_points, self.rho, self.sparsity, self.seed),
        }
    }
}

/// Ground truth of a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub change_points: Vec<usize>,
    /// Coefficients of each of the `q + 1` segments.
    pub betas: Vec<Vec<f64>>,
    /// `beta_j - beta_{j-1}` for `j = 1..q`.
    pub deltas: Vec<Vec<f64>>,
}

impl Truth {
    fn from_betas(change_points: Vec<usize>, betas: Vec<Vec<f64>>) -> Self {
        // adding 0.0 turns -0.0 into 0.0
        let betas: Vec<Vec<f64>> = betas
            .into_iter()
            .map(|b| b.into_iter().map(|v| v + 0.0).collect())
            .collect();
        let deltas = betas
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(b1, b0)| b1 - b0 + 0.0).collect())
            .collect();
        Self {
            change_points,
            betas,
            deltas,
        }
    }
}

fn check_shape(n: usize, p: usize, change_points: &[usize]) -> Result<()> {
    if n < 2 || p == 0 {
        return Err(Error::invalid(format!("need n >= 2 and p >= 1, got n = {n}, p = {p}")));
    }
    crate::estimate::validate_change_points(change_points, n)
}

fn check_sparsity(s: usize, p: usize) -> Result<()> {
    if s > p {
        return Err(Error::invalid(format!("sparsity {s} exceeds p = {p}")));
    }
    Ok(())
}

/// Rows `x_t = root z_t` (or `z_t` without `root`) and
/// `y_t = x_t' beta(t) + eps_t`, with `beta(t)` switching after each change.
fn simulate(
    n: usize,
    p: usize,
    root: Option<&DMatrix<f64>>,
    truth: &Truth,
    rng: &mut impl Rng,
) -> Result<RegressionDataset> {
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    let mut segment = 0;
    for t in 0..n {
        while segment < truth.change_points.len() && t >= truth.change_points[segment] {
            segment += 1;
        }
        let z = DVector::from_iterator(p, (0..p).map(|_| StandardNormal.sample(rng)));
        let row = match root {
            Some(r) => r * z,
            None => z,
        };
        let beta = &truth.betas[segment];
        let signal: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
        let eps: f64 = StandardNormal.sample(rng);
        x.extend(row.iter());
        y.push(signal + eps);
    }
    RegressionDataset::new(x, y, p)
}

pub fn gen_m1(n: usize, p: usize, rho: f64, sparsity: usize, theta: usize, seed: u64) -> Result<(RegressionDataset, Truth)> {
    check_shape(n, p, &[theta])?;
    check_sparsity(sparsity, p)?;
    let mut prng = stream_rng(seed, 0);
    let mut support = sample(&mut prng, p, sparsity).into_vec();
    support.sort_unstable();
    let raw: Vec<f64> = (0..sparsity).map(|_| StandardNormal.sample(&mut prng)).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut delta = vec![0.0; p];
    for (&i, v) in support.iter().zip(&raw) {
        delta[i] = v / norm;
    }
    let beta0: Vec<f64> = delta.iter().map(|d| rho * d).collect();
    let beta1: Vec<f64> = beta0.iter().map(|b| -b).collect();
    let truth = Truth::from_betas(vec![theta], vec![beta0, beta1]);
    let data = simulate(n, p, None, &truth, &mut stream_rng(seed, 1))?;
    Ok((data, truth))
}

/// `Sigma_ij = gamma^|i - j|`.
pub fn toeplitz(p: usize, gamma: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| gamma.powi(i.abs_diff(j) as i32))
}

pub fn gen_m2(
    n: usize,
    p: usize,
    gamma: f64,
    nu: f64,
    sparsity: usize,
    theta: usize,
    seed: u64,
) -> Result<(RegressionDataset, Truth)> {
    check_shape(n, p, &[theta])?;
    check_sparsity(sparsity, p)?;
    if !(gamma.abs() < 1.0) {
        return Err(Error::domain(format!("Toeplitz parameter must satisfy |gamma| < 1, got {gamma}")));
    }
    let mut prng = stream_rng(seed, 0);
    let mut delta = vec![0.0; p];
    for i in sample(&mut prng, p, sparsity) {
        delta[i] = if prng.random::<bool>() { 1.0 } else { -1.0 };
    }
    let scale = nu / (p as f64).sqrt();
    let mu: Vec<f64> = (0..p)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut prng);
            scale * z
        })
        .collect();
    let beta0 = mu.iter().zip(&delta).map(|(m, d)| m - d / 2.0).collect();
    let beta1 = mu.iter().zip(&delta).map(|(m, d)| m + d / 2.0).collect();
    let truth = Truth::from_betas(vec![theta], vec![beta0, beta1]);
    let root = sym_sqrt(&toeplitz(p, gamma));
    let data = simulate(n, p, Some(&root), &truth, &mut stream_rng(seed, 1))?;
    Ok((data, truth))
}

pub fn gen_m3(n: usize, p: usize, seed: u64) -> Result<(RegressionDataset, Truth)> {
    if n % 4 != 0 || n < 8 {
        return Err(Error::invalid(format!("M3 needs n divisible by 4 and n >= 8, got {n}")));
    }
    if p < 4 {
        return Err(Error::invalid(format!("M3 needs p >= 4, got {p}")));
    }
    let mut beta0 = vec![0.0; p];
    for (i, b) in beta0.iter_mut().take(4).enumerate() {
        *b = if i % 2 == 0 { 0.4 } else { -0.4 };
    }
    let betas = (0..4)
        .map(|j| beta0.iter().map(|b| if j % 2 == 0 { *b } else { -b }).collect())
        .collect();
    let truth = Truth::from_betas(vec![n / 4, n / 2, 3 * n / 4], betas);
    let data = simulate(n, p, None, &truth, &mut stream_rng(seed, 1))?;
    Ok((data, truth))
}

pub fn gen_custom(
    n: usize,
    p: usize,
    change_points: &[usize],
    rho: f64,
    sparsity: usize,
    seed: u64,
) -> Result<(RegressionDataset, Truth)> {
    check_shape(n, p, change_points)?;
    check_sparsity(sparsity, p)?;
    let base: Vec<f64> = (0..p)
        .map(|i| if i >= sparsity { 0.0 } else if i % 2 == 0 { rho } else { -rho })
        .collect();
    let betas = (0..=change_points.len())
        .map(|j| base.iter().map(|b| if j % 2 == 0 { *b } else { -b }).collect())
        .collect();
    let truth = Truth::from_betas(change_points.to_vec(), betas);
    let data = simulate(n, p, None, &truth, &mut stream_rng(seed, 1))?;
    Ok((data, truth))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub n: usize,
    pub q: usize,
    pub q_hat: usize,
    /// `(truth, estimate, |estimate - truth|)` from greedy nearest matching,
    /// sorted by truth.
    pub matches: Vec<(usize, usize, usize)>,
    /// Hausdorff distance of the scaled sets, both augmented with `{0, 1}`.
    pub hausdorff: f64,
    pub v_measure: f64,
}

impl DetectionReport {
    pub fn errors(&self) -> Vec<usize> {
        self.matches.iter().map(|m| m.2).collect()
    }

    /// Largest matched error divided by `n` (0 with no matches).
    pub fn max_scaled_error(&self) -> f64 {
        self.matches.iter().map(|m| m.2).max().unwrap_or(0) as f64 / self.n as f64
    }
}

/// Repeatedly pairs the closest remaining (truth, estimate) couple; ties go
/// to the smaller truth, then the smaller estimate.
fn greedy_match(estimated: &[usize], truth: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut pairs: Vec<(usize, usize, usize)> = truth
        .iter()
        .flat_map(|&t| estimated.iter().map(move |&e| (e.abs_diff(t), t, e)))
        .collect();
    pairs.sort_unstable();
    let (mut used_t, mut used_e) = (Vec::new(), Vec::new());
    let mut out = Vec::new();
    for (d, t, e) in pairs {
        if !used_t.contains(&t) && !used_e.contains(&e) {
            used_t.push(t);
            used_e.push(e);
            out.push((t, e, d));
        }
    }
    out.sort_unstable();
    out
}

pub fn hausdorff(estimated: &[usize], truth: &[usize], n: usize) -> f64 {
    let scaled = |v: &[usize]| -> Vec<f64> {
        let mut s: Vec<f64> = v.iter().map(|&x| x as f64 / n as f64).collect();
        s.extend([0.0, 1.0]);
        s
    };
    let (a, b) = (scaled(estimated), scaled(truth));
    let directed = |from: &[f64], to: &[f64]| {
        from.iter()
            .map(|x| to.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(&a, &b).max(directed(&b, &a))
}

/// Segment label of each time point under sorted change points.
fn labels(change_points: &[usize], n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for t in 0..n {
        while seg < change_points.len() && t >= change_points[seg] {
            seg += 1;
        }
        out.push(seg);
    }
    out
}

/// V-measure (beta = 1) between the segmentations of `0..n` induced by the
/// two change point sets.
pub fn v_measure(estimated: &[usize], truth: &[usize], n: usize) -> f64 {
    let (k_lab, c_lab) = (labels(estimated, n), labels(truth, n));
    let (nk, nc) = (estimated.len() + 1, truth.len() + 1);
    let mut table = vec![0usize; nk * nc];
    for (k, c) in k_lab.iter().zip(&c_lab) {
        table[k * nc + c] += 1;
    }
    let total = n as f64;
    let entropy = |counts: &mut dyn Iterator<Item = usize>| {
        counts
            .filter(|&c| c > 0)
            .map(|c| {
                let q = c as f64 / total;
                -q * q.ln()
            })
            .sum::<f64>()
    };
    let h_c = entropy(&mut (0..nc).map(|c| (0..nk).map(|k| table[k * nc + c]).sum()));
    let h_k = entropy(&mut (0..nk).map(|k| (0..nc).map(|c| table[k * nc + c]).sum()));
    let cond = |outer: usize, inner: usize, cell: &dyn Fn(usize, usize) -> usize| {
        let mut h = 0.0;
        for o in 0..outer {
            let size: usize = (0..inner).map(|i| cell(o, i)).sum();
            for i in 0..inner {
                let v = cell(o, i);
                if v > 0 {
                    h -= v as f64 / total * (v as f64 / size as f64).ln();
                }
            }
        }
        h
    };
    // H(C | K): condition on estimated segments
    let h_c_given_k = cond(nk, nc, &|k, c| table[k * nc + c]);
    let h_k_given_c = cond(nc, nk, &|c, k| table[k * nc + c]);
    let homogeneity = if h_c == 0.0 { 1.0 } else { 1.0 - h_c_given_k / h_c };
    let completeness = if h_k == 0.0 { 1.0 } else { 1.0 - h_k_given_c / h_k };
    if homogeneity + completeness == 0.0 {
        0.0
    } else {
        (2.0 * homogeneity * completeness / (homogeneity + completeness)).clamp(0.0, 1.0)
    }
}

pub fn evaluate_detection(estimated: &[usize], truth: &[usize], n: usize) -> DetectionReport {
    DetectionReport {
        n,
        q: truth.len(),
        q_hat: estimated.len(),
        matches: greedy_match(estimated, truth),
        hausdorff: hausdorff(estimated, truth, n),
        v_measure: v_measure(estimated, truth, n),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceReport {
    /// 1 if every coordinate's interval covers the truth.
    pub coverage: f64,
    pub proportion: f64,
    /// Share of the true support rejected; `None` when the support is empty.
    pub tpr: Option<f64>,
    /// Share of rejections outside the support, over `max(#rejections, 1)`.
    pub fdr: f64,
    pub half_width: f64,
}

pub fn evaluate_inference(band: &ConfidenceBand, delta_truth: &[f64]) -> Result<InferenceReport> {
    let p = delta_truth.len();
    if band.lower.len() != p {
        return Err(Error::invalid(format!(
            "band has {} coordinates, truth has {p}",
            band.lower.len()
        )));
    }
    let covered = (0..p)
        .filter(|&i| band.lower[i] <= delta_truth[i] && delta_truth[i] <= band.upper[i])
        .count();
    let support: Vec<usize> = (0..p).filter(|&i| delta_truth[i] != 0.0).collect();
    let rejected = &band.rejected;
    let true_pos = rejected.iter().filter(|i| delta_truth[**i] != 0.0).count();
    let false_pos = rejected.len() - true_pos;
    Ok(InferenceReport {
        coverage: if covered == p { 1.0 } else { 0.0 },
        proportion: covered as f64 / p as f64,
        tpr: (!support.is_empty()).then(|| true_pos as f64 / support.len() as f64),
        fdr: false_pos as f64 / rejected.len().max(1) as f64,
        half_width: band.half_width,
    })
}
