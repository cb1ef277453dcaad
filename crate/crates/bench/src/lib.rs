//! Fixtures shared by the benchmarks.

use mcscan::{RegressionDataset, Scenario, ScenarioConfig};
use nalgebra::DMatrix;

/// Independent Gaussian design with one change in the middle.
pub fn fixture(n: usize, p: usize, seed: u64) -> RegressionDataset {
    let cfg = ScenarioConfig {
        scenario: Scenario::Custom,
        n,
        p,
        change_points: vec![n / 2],
        rho: 1.0,
        sparsity: p.min(5),
        seed,
        ..Default::default()
    };
    cfg.generate().expect("valid fixture").0
}

/// Sample gram matrix of rows `s..e`.
pub fn gram(data: &RegressionDataset, s: usize, e: usize) -> DMatrix<f64> {
    let x = data.x_block(s, e);
    x.tr_mul(&x) / (e - s) as f64
}
