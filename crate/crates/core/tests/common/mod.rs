//! Reference computations written directly from the definitions, without the
//! partial sums, coordinate descent or simplex code used by the library.

#![allow(dead_code)]

use mcscan::RegressionDataset;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Gaussian design with a single coefficient change after row `k`.
pub fn random_dataset(rng: &mut impl Rng, n: usize, p: usize, k: usize, jump: f64) -> RegressionDataset {
    let beta0: Vec<f64> = (0..p).map(|_| normal(rng)).collect();
    let beta1: Vec<f64> = beta0.iter().map(|b| b + jump * normal(rng)).collect();
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for t in 0..n {
        let row: Vec<f64> = (0..p).map(|_| normal(rng)).collect();
        let beta = if t < k { &beta0 } else { &beta1 };
        y.push(row.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() + normal(rng));
        x.extend(row);
    }
    RegressionDataset::new(x, y, p).unwrap()
}

/// Mean of `x_t y_t` over rows `lo..hi`, summed row by row.
pub fn mean_cross(data: &RegressionDataset, lo: usize, hi: usize) -> Vec<f64> {
    let p = data.p();
    let mut out = vec![0.0; p];
    for t in lo..hi {
        for i in 0..p {
            out[i] += data.row(t)[i] * data.y()[t];
        }
    }
    out.iter().map(|v| v / (hi - lo) as f64).collect()
}

pub fn mean_gram(data: &RegressionDataset, lo: usize, hi: usize) -> DMatrix<f64> {
    let p = data.p();
    let mut g = DMatrix::zeros(p, p);
    for t in lo..hi {
        let r = data.row(t);
        for i in 0..p {
            for j in 0..p {
                g[(i, j)] += r[i] * r[j];
            }
        }
    }
    g / (hi - lo) as f64
}

pub fn mean_difference(data: &RegressionDataset, s: usize, k: usize, e: usize) -> Vec<f64> {
    let (l, r) = (mean_cross(data, s, k), mean_cross(data, k, e));
    r.iter().zip(&l).map(|(a, b)| a - b).collect()
}

pub fn location(s: usize, k: usize, e: usize) -> f64 {
    (((k - s) * (e - k)) as f64 / (e - s) as f64).sqrt()
}

pub fn brute_detector(data: &RegressionDataset, s: usize, k: usize, e: usize) -> f64 {
    let d = mean_difference(data, s, k, e);
    location(s, k, e) * d.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Peak location and value of the detector over the trimmed range of `(a, b]`.
pub fn brute_scan(data: &RegressionDataset, a: usize, b: usize, trim: f64) -> Option<(usize, f64)> {
    let w = trim.floor() as usize;
    let mut best: Option<(usize, f64)> = None;
    for k in (a + 1)..b {
        if k <= a + w || k + w >= b {
            continue;
        }
        let t = brute_detector(data, a, k, b);
        if best.is_none_or(|(_, v)| t > v) {
            best = Some((k, t));
        }
    }
    best
}

pub fn lasso_objective(sigma: &DMatrix<f64>, d: &[f64], lam: f64, a: &[f64]) -> f64 {
    let av = DVector::from_column_slice(a);
    let dv = DVector::from_column_slice(d);
    0.5 * av.dot(&(sigma * &av)) - av.dot(&dv) + lam * a.iter().map(|v| v.abs()).sum::<f64>()
}

/// Largest violation of the Lasso optimality conditions.
pub fn lasso_kkt(sigma: &DMatrix<f64>, d: &[f64], lam: f64, a: &[f64]) -> f64 {
    let av = DVector::from_column_slice(a);
    let g = sigma * &av;
    (0..a.len())
        .map(|i| {
            let gi = g[i] - d[i];
            if a[i] != 0.0 {
                (gi + lam * a[i].signum()).abs()
            } else {
                (gi.abs() - lam).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn all_patterns(p: usize) -> Vec<Vec<i8>> {
    let mut out = vec![vec![]];
    for _ in 0..p {
        out = out
            .into_iter()
            .flat_map(|v| {
                [-1i8, 0, 1].into_iter().map(move |z| {
                    let mut w = v.clone();
                    w.push(z);
                    w
                })
            })
            .collect();
    }
    out
}

/// Minimum Lasso objective by enumerating sign patterns: for each pattern the
/// stationarity equations on its support are solved and the candidate kept
/// if its signs agree with the pattern.
pub fn lasso_oracle(sigma: &DMatrix<f64>, d: &[f64], lam: f64) -> f64 {
    let p = d.len();
    let mut best = 0.0;
    for z in all_patterns(p) {
        let support: Vec<usize> = (0..p).filter(|&i| z[i] != 0).collect();
        if support.is_empty() {
            continue;
        }
        let m = support.len();
        let sub = DMatrix::from_fn(m, m, |i, j| sigma[(support[i], support[j])]);
        let rhs = DVector::from_fn(m, |i, _| d[support[i]] - lam * z[support[i]] as f64);
        let Some(sol) = sub.lu().solve(&rhs) else { continue };
        if (0..m).any(|i| sol[i] * z[support[i]] as f64 <= 0.0) {
            continue;
        }
        let mut a = vec![0.0; p];
        for (i, &s) in support.iter().enumerate() {
            a[s] = sol[i];
        }
        best = f64::min(best, lasso_objective(sigma, d, lam, &a));
    }
    best
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// `min |x|_1` subject to `|A x - d|_inf <= c` by enumerating the vertices of
/// the arrangement formed by `x_i = 0` and `(A x - d)_r = +-c`. Returns
/// `None` when no vertex is feasible.
pub fn l1_box_oracle(a: &DMatrix<f64>, d: &[f64], c: f64) -> Option<(f64, Vec<f64>)> {
    let (m, p) = a.shape();
    // hyperplane h: row vector and right-hand side
    let mut planes: Vec<(Vec<f64>, f64)> = (0..p)
        .map(|i| {
            let mut e = vec![0.0; p];
            e[i] = 1.0;
            (e, 0.0)
        })
        .collect();
    for r in 0..m {
        let row: Vec<f64> = (0..p).map(|j| a[(r, j)]).collect();
        planes.push((row.clone(), d[r] + c));
        planes.push((row, d[r] - c));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for pick in subsets(planes.len(), p) {
        let mat = DMatrix::from_fn(p, p, |i, j| planes[pick[i]].0[j]);
        let rhs = DVector::from_fn(p, |i, _| planes[pick[i]].1);
        if mat.determinant().abs() < 1e-10 {
            continue;
        }
        let Some(x) = mat.lu().solve(&rhs) else { continue };
        let resid = a * &x - DVector::from_column_slice(d);
        if resid.amax() > c + 1e-9 {
            continue;
        }
        let obj = x.iter().map(|v| v.abs()).sum::<f64>();
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, x.iter().copied().collect()));
        }
    }
    best
}

pub fn random_spd(rng: &mut impl Rng, p: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(p + 2, p, |_, _| normal(rng));
    m.tr_mul(&m) / (p + 2) as f64 + DMatrix::identity(p, p) * 0.1
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}
