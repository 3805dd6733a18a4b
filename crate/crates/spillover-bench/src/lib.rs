//! Shared data generators for the pipeline benchmarks.

use nalgebra::DMatrix;
use spillover_core::{Panel, synthetic};

/// Correlation-like covariance with uniform off-diagonal loading.
pub fn factor_covariance(n: usize, loading: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { loading })
}

/// Gaussian panel with a one-factor covariance, sized for benchmark runs.
pub fn bench_panel(n_assets: usize, rows: usize, seed: u64) -> Panel {
    synthetic::gaussian_panel(&factor_covariance(n_assets, 0.35), rows, seed, "B")
}
