mod common;

use ::mcscan::*;
use common::*;

fn univariate(y: Vec<f64>) -> RegressionDataset {
    let n = y.len();
    RegressionDataset::new(vec![1.0; n], y, 1).unwrap()
}

/// Seeded intervals from the floating point definition.
fn intervals(n: usize) -> Vec<(usize, usize)> {
    let levels = (n as f64).log2().ceil() as u32;
    let mut out = Vec::new();
    for k in 1..=levels {
        let r = n as f64 / 2f64.powi(k as i32);
        for i in 1..(1usize << k) {
            let a = ((i - 1) as f64 * r).floor() as usize;
            let b = (((i + 1) as f64 * r).ceil() as usize).min(n);
            if !out.contains(&(a, b)) {
                out.push((a, b));
            }
        }
    }
    out
}

/// Narrowest-over-threshold by exhaustive scanning.
fn brute_not(data: &RegressionDataset, pi: f64, trim: f64) -> Vec<usize> {
    let mut peaks: Vec<(usize, usize, usize, f64)> = intervals(data.n())
        .into_iter()
        .filter_map(|(a, b)| brute_scan(data, a, b, trim).map(|(k, t)| (a, b, k, t)))
        .filter(|&(_, _, _, t)| t > pi)
        .collect();
    peaks.sort_by(|x, y| (x.1 - x.0).cmp(&(y.1 - y.0)).then(y.3.total_cmp(&x.3)).then(x.0.cmp(&y.0)));
    let mut cps: Vec<usize> = Vec::new();
    for (a, b, k, _) in peaks {
        if cps.iter().all(|&c| c <= a || c > b) {
            cps.push(k);
        }
    }
    cps.sort_unstable();
    cps
}

#[test]
fn step_in_the_mean_is_found_exactly() {
    let y = (0..100).map(|t| if t < 50 { 0.0 } else { 10.0 }).collect();
    let fit = detect(&univariate(y), &ThresholdPolicy::fixed(1.0), false).unwrap();
    assert_eq!(fit.change_points, vec![50]);
}

#[test]
fn two_noiseless_steps() {
    let y = (0..64).map(|t| if t < 20 { 0.0 } else if t < 44 { 6.0 } else { -2.0 }).collect();
    let fit = detect(&univariate(y), &ThresholdPolicy::fixed(1.0).with_trim(Trimming::Value(0.0)), false).unwrap();
    assert_eq!(fit.change_points, vec![20, 44]);
}

#[test]
fn fixed_threshold_matches_exhaustive_search() {
    let mut found = 0;
    for seed in 0..6 {
        let mut g = rng(seed);
        let n = 60 + 17 * seed as usize;
        let data = random_dataset(&mut g, n, 3, n / 3, 1.5);
        for (pi, trim) in [(2.0, 0.0), (3.0, 2.0), (4.5, 3.0)] {
            let policy = ThresholdPolicy::fixed(pi).with_trim(Trimming::Value(trim));
            let fit = detect(&data, &policy, false).unwrap();
            assert_eq!(fit.change_points, brute_not(&data, pi, trim), "seed {seed}, pi {pi}, trim {trim}");
            found += fit.change_points.len();
        }
    }
    assert!(found > 0);
}

#[test]
fn path_entries_reproduce_fixed_thresholds() {
    let mut g = rng(21);
    let data = random_dataset(&mut g, 150, 4, 70, 1.0);
    let trim = 2.0;
    let path = solution_path(&data, trim, false).unwrap();
    assert!(path.entries.windows(2).all(|w| w[0].num_cps() <= w[1].num_cps()));
    for e in &path.entries {
        assert!(e.threshold_low < e.threshold_high);
        let fit = detect(&data, &ThresholdPolicy::fixed(e.threshold_low).with_trim(Trimming::Value(trim)), false).unwrap();
        assert_eq!(fit.change_points, e.change_points);
    }
}

#[test]
fn detection_ignores_column_order_and_response_sign() {
    let mut g = rng(8);
    let data = random_dataset(&mut g, 200, 5, 120, 1.5);
    let policy = ThresholdPolicy::default_fixed();
    let base = detect(&data, &policy, false).unwrap();
    let perm = [3, 0, 4, 1, 2];
    let rows: Vec<Vec<f64>> = (0..data.n()).map(|t| perm.iter().map(|&j| data.row(t)[j]).collect()).collect();
    let permuted = RegressionDataset::from_rows(&rows, data.y().to_vec()).unwrap();
    assert_eq!(detect(&permuted, &policy, false).unwrap().change_points, base.change_points);
    let flipped = data.scale_response(-1.0);
    assert_eq!(detect(&flipped, &policy, false).unwrap().change_points, base.change_points);
}

#[test]
fn standardizing_removes_column_scale() {
    let mut g = rng(13);
    let data = random_dataset(&mut g, 180, 4, 90, 1.5);
    let scaled = data.scale_columns(&[10.0, 0.1, 3.0, 1.0]);
    let policy = ThresholdPolicy::default_fixed();
    let a = detect(&data, &policy, true).unwrap();
    let b = detect(&scaled, &policy, true).unwrap();
    assert_eq!(a.change_points, b.change_points);
    assert_eq!(a.mad_constant, Some(1.4826));
}

#[test]
fn repeated_runs_agree() {
    let (data, _) = ScenarioConfig::m3(240, 20, 4).generate().unwrap();
    let a = detect(&data, &ThresholdPolicy::automatic(), true).unwrap();
    let b = detect(&data, &ThresholdPolicy::automatic(), true).unwrap();
    assert_eq!(a, b);
}
