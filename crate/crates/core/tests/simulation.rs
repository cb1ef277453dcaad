mod common;

use ::mcscan::sim::{hausdorff, v_measure};
use ::mcscan::*;
use common::*;

#[test]
fn m2_design_has_toeplitz_covariance() {
    let gamma = 0.6;
    let (data, _) = ScenarioConfig::m2(100_000, 5, gamma, 1.0, 2, 50_000, 3).generate().unwrap();
    let g = mean_gram(&data, 0, data.n());
    for i in 0..5 {
        for j in 0..5 {
            let want = gamma.powi((i as i32 - j as i32).abs());
            assert!((g[(i, j)] - want).abs() < 0.02, "({i}, {j}): {} vs {want}", g[(i, j)]);
        }
    }
}

#[test]
fn m2_change_is_a_signed_sparse_unit_vector() {
    for seed in 0..20 {
        let (_, truth) = ScenarioConfig::m2(100, 30, 0.6, 1.0, 5, 40, seed).generate().unwrap();
        let d = &truth.deltas[0];
        assert_eq!(d.iter().filter(|v| v.abs() > 0.5).count(), 5);
        assert!(d.iter().all(|v| v.abs() < 1e-12 || (v.abs() - 1.0).abs() < 1e-12));
    }
}

#[test]
fn m1_change_has_unit_norm_and_symmetric_regimes() {
    let mut hits = [0usize; 20];
    for seed in 0..400 {
        let (_, truth) = ScenarioConfig::m1(50, 20, 2.0, 3, 25, seed).generate().unwrap();
        let (b0, b1) = (&truth.betas[0], &truth.betas[1]);
        assert!(b0.iter().zip(b1).all(|(a, b)| a == &-b));
        let d = &truth.deltas[0];
        let norm: f64 = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 4.0).abs() < 1e-12);
        for (i, v) in d.iter().enumerate() {
            if *v != 0.0 {
                hits[i] += 1;
            }
        }
    }
    // each coordinate is in the support with probability 3/20, so 60 of 400 on average
    assert!(hits.iter().all(|&h| (30..=95).contains(&h)), "{hits:?}");
}

#[test]
fn m3_layout() {
    let (data, truth) = ScenarioConfig::m3(400, 10, 1).generate().unwrap();
    assert_eq!(data.n(), 400);
    assert_eq!(truth.change_points, vec![100, 200, 300]);
    assert_eq!(&truth.betas[0][..5], &[0.4, -0.4, 0.4, -0.4, 0.0]);
    for d in &truth.deltas {
        assert_eq!(d.iter().map(|v| v.abs()).sum::<f64>(), 3.2);
    }
}

#[test]
fn repetitions_are_reproducible_and_distinct() {
    let base = ScenarioConfig::m1(80, 6, 1.0, 2, 30, 11);
    let a = base.for_repetition(2).generate().unwrap();
    let b = base.for_repetition(2).generate().unwrap();
    let c = base.for_repetition(3).generate().unwrap();
    assert_eq!(a, b);
    assert_ne!(a.0, c.0);
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = ScenarioConfig::m2(300, 40, 0.3, 2.0, 4, 90, 17);
    assert_eq!(ScenarioConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    assert!(ScenarioConfig::from_toml("n = 10\nbogus = 1\n").is_err());
}

#[test]
fn hausdorff_by_hand() {
    assert_eq!(hausdorff(&[50], &[50], 100), 0.0);
    // {0, 0.4, 1} against {0, 0.5, 1}
    assert!((hausdorff(&[40], &[50], 100) - 0.1).abs() < 1e-12);
    // a missed change: 0.5 is 0.5 away from the boundary points
    assert!((hausdorff(&[], &[50], 100) - 0.5).abs() < 1e-12);
}

#[test]
fn v_measure_properties() {
    assert_eq!(v_measure(&[30, 60], &[30, 60], 100), 1.0);
    for (a, b) in [(vec![20], vec![50]), (vec![10, 70], vec![40]), (vec![], vec![33])] {
        let ab = v_measure(&a, &b, 100);
        assert!((ab - v_measure(&b, &a, 100)).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&ab));
    }
    assert_eq!(v_measure(&[], &[], 100), 1.0);
}

fn band(lower: Vec<f64>, upper: Vec<f64>) -> ConfidenceBand {
    let center: Vec<f64> = lower.iter().zip(&upper).map(|(l, u)| (l + u) / 2.0).collect();
    let rejected = (0..lower.len()).filter(|&i| lower[i] > 0.0 || upper[i] < 0.0).collect();
    ConfidenceBand {
        center,
        lower,
        upper,
        half_width: 0.5,
        alpha: 0.1,
        method: CiMethod::MultiplierBootstrap,
        replicates: 1,
        quantile: 1.0,
        quantile_source: "test",
        rejected,
    }
}

#[test]
fn inference_metrics_by_hand() {
    // ten coordinates, the last band misses its target
    let lower = vec![-0.5; 10];
    let upper = vec![0.5; 10];
    let mut truth = vec![0.0; 10];
    truth[9] = 2.0;
    let r = evaluate_inference(&band(lower, upper), &truth).unwrap();
    assert_eq!(r.coverage, 0.0);
    assert!((r.proportion - 0.9).abs() < 1e-12);
    assert_eq!(r.tpr, Some(0.0));
    assert_eq!(r.fdr, 0.0);

    // two rejections, one of them outside the support
    let r = evaluate_inference(&band(vec![0.5, 0.5, -1.0], vec![1.5, 1.5, 1.0]), &[1.0, 0.0, 0.0]).unwrap();
    assert_eq!(r.tpr, Some(1.0));
    assert_eq!(r.fdr, 0.5);
    let r = evaluate_inference(&band(vec![-1.0], vec![1.0]), &[0.0]).unwrap();
    assert_eq!(r.tpr, None);
}
