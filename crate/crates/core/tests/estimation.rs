mod common;

use ::mcscan::*;
use common::*;
use nalgebra::{DMatrix, DVector};

#[test]
fn cross_moment_shift_equals_gram_times_change() {
    // E[x y] after the change minus before it is Sigma (beta1 - beta0)
    let mut g = rng(4);
    let (n, p) = (40_000, 3);
    let beta0 = [1.0, -0.5, 0.0];
    let beta1 = [0.0, 0.5, 2.0];
    let mut x = Vec::new();
    let mut y = Vec::new();
    for t in 0..n {
        let z: Vec<f64> = (0..p).map(|_| normal(&mut g)).collect();
        let row = vec![z[0], 0.5 * z[0] + z[1], z[2]];
        let b = if t < n / 2 { &beta0 } else { &beta1 };
        y.push(row.iter().zip(b).map(|(a, c)| a * c).sum::<f64>() + normal(&mut g));
        x.extend(row);
    }
    let data = RegressionDataset::new(x, y, p).unwrap();
    let sigma = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.5, 1.25, 0.0, 0.0, 0.0, 1.0]);
    let delta = DVector::from_iterator(3, beta1.iter().zip(&beta0).map(|(a, b)| a - b));
    let want = sigma * delta;
    let got = mean_difference(&data, 0, n / 2, n);
    for i in 0..p {
        assert!((got[i] - want[i]).abs() < 0.08, "{i}: {} vs {}", got[i], want[i]);
    }
}

#[test]
fn anchors_by_hand() {
    let a = anchor_intervals(&[100], 200).unwrap();
    assert_eq!((a[0].a, a[0].theta_hat, a[0].b, a[0].delta_hat), (33, 100, 167, 67));
    // theta = 30, 90 in n = 120: half-widths min(30 - 10, 70 - 30) = 20 and min(90 - 50, 110 - 90) = 20
    let a = anchor_intervals(&[30, 90], 120).unwrap();
    assert_eq!((a[0].a, a[0].b), (10, 50));
    assert_eq!((a[1].a, a[1].b), (70, 110));
    assert!(anchor_intervals(&[50, 40], 100).is_err());
}

#[test]
fn lope_is_zero_above_lambda_max_and_grows_below() {
    let mut g = rng(30);
    let data = random_dataset(&mut g, 160, 6, 80, 1.0);
    let d = mean_difference(&data, 0, 80, 160);
    let loc = location(0, 80, 160);
    let lam_max = loc * d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    assert!(lope(&data, 0, 80, 160, lam_max * 1.0001).unwrap().delta.iter().all(|v| *v == 0.0));
    let mut prev = 0.0;
    for f in [0.8, 0.5, 0.2, 0.05] {
        let norm: f64 = lope(&data, 0, 80, 160, lam_max * f).unwrap().delta.iter().map(|v| v.abs()).sum();
        assert!(norm >= prev - 1e-10);
        prev = norm;
    }
    assert!(prev > 0.0);
}

#[test]
fn lope_matches_exhaustive_lasso_on_small_problems() {
    for seed in 0..10 {
        let mut g = rng(100 + seed);
        let (n, k, p) = (90, 40, 4);
        let data = random_dataset(&mut g, n, p, k, 1.0);
        let sigma = mean_gram(&data, 0, n);
        let d = mean_difference(&data, 0, k, n);
        let loc = location(0, k, n);
        for lambda in [0.2, 1.0, 3.0] {
            let fit = lope(&data, 0, k, n, lambda).unwrap();
            let lam = lambda / loc;
            let got = lasso_objective(&sigma, &d, lam, &fit.delta);
            let want = lasso_oracle(&sigma, &d, lam);
            assert!(got - want < 1e-9 && lasso_kkt(&sigma, &d, lam, &fit.delta) < 1e-6, "seed {seed}");
        }
    }
}

#[test]
fn clom_matches_vertex_enumeration() {
    let mut cases = 0;
    for seed in 0..10 {
        let mut g = rng(200 + seed);
        let (n, k, p) = (80, 30, 3);
        let data = random_dataset(&mut g, n, p, k, 1.0);
        let sigma = mean_gram(&data, 0, n);
        let d = mean_difference(&data, 0, k, n);
        let loc = location(0, k, n);
        for lambda in [0.3, 1.5] {
            let fit = clom(&data, 0, k, n, lambda).unwrap();
            if let Some((want, _)) = l1_box_oracle(&sigma, &d, lambda / loc) {
                let got: f64 = fit.delta.iter().map(|v| v.abs()).sum();
                assert!((got - want).abs() < 1e-7, "seed {seed}: {got} vs {want}");
                cases += 1;
            }
        }
    }
    assert!(cases > 10);
}

#[test]
fn clime_exact_inverse_and_l1_dominance() {
    for seed in 0..8 {
        let mut g = rng(300 + seed);
        let p = 3 + seed as usize % 4;
        let sigma = random_spd(&mut g, p);
        let inv = sigma.clone().try_inverse().unwrap();
        let exact = clime(&sigma, 50, 0.0).unwrap();
        assert!((&exact.omega - &inv).amax() < 1e-8, "seed {seed}");
        let loose = clime(&sigma, 50, 1.0).unwrap();
        assert!(loose.feasibility_slack <= 1e-8);
        for i in 0..p {
            let est: f64 = loose.omega.row(i).iter().map(|v| v.abs()).sum();
            let truth: f64 = inv.row(i).iter().map(|v| v.abs()).sum();
            assert!(est <= truth + 1e-8);
        }
    }
}

#[test]
fn clime_rows_follow_a_permutation() {
    let mut g = rng(9);
    let sigma = random_spd(&mut g, 4);
    let perm = [2, 0, 3, 1];
    let permuted = DMatrix::from_fn(4, 4, |i, j| sigma[(perm[i], perm[j])]);
    let a = clime(&sigma, 40, 0.7).unwrap().omega;
    let b = clime(&permuted, 40, 0.7).unwrap().omega;
    for i in 0..4 {
        for j in 0..4 {
            assert!((b[(i, j)] - a[(perm[i], perm[j])]).abs() < 1e-9);
        }
    }
}
