//! Seeded synthetic panels for experiments, tests and benchmarks.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ingest::Panel;

fn synthetic_dates(n: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
    (0..n)
        .map(|i| start + chrono::Days::new(i as u64))
        .collect()
}

fn cholesky_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    nalgebra::Cholesky::new(cov.clone())
        .expect("covariance must be positive definite")
        .l()
}

/// I.i.d. Gaussian observations with the given covariance; one row per day.
pub fn gaussian_panel(cov: &DMatrix<f64>, rows: usize, seed: u64, asset_prefix: &str) -> Panel {
    let n = cov.nrows();
    let chol = cholesky_factor(cov);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = DMatrix::zeros(rows, n);
    for r in 0..rows {
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let x = &chol * z;
        for c in 0..n {
            values[(r, c)] = x[c];
        }
    }
    let assets = (0..n).map(|i| format!("{asset_prefix}{i}")).collect();
    Panel::new(synthetic_dates(rows), assets, values).expect("synthetic panel is well formed")
}

/// Simulate a zero-intercept VAR with Gaussian innovations of covariance
/// `sigma`. The first `burn_in` draws are discarded.
pub fn simulate_var(
    coefficients: &[DMatrix<f64>],
    sigma: &DMatrix<f64>,
    rows: usize,
    burn_in: usize,
    seed: u64,
) -> Panel {
    let n = sigma.nrows();
    let p = coefficients.len();
    let chol = cholesky_factor(sigma);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = rows + burn_in;
    let mut history: Vec<DVector<f64>> = vec![DVector::zeros(n); p];
    let mut values = DMatrix::zeros(rows, n);
    for t in 0..total {
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let mut x = &chol * z;
        for (lag, phi) in coefficients.iter().enumerate() {
            x += phi * &history[lag];
        }
        history.rotate_right(1);
        history[0] = x.clone();
        if t >= burn_in {
            for c in 0..n {
                values[(t - burn_in, c)] = x[c];
            }
        }
    }
    let assets = (0..n).map(|i| format!("V{i}")).collect();
    Panel::new(synthetic_dates(rows), assets, values).expect("synthetic panel is well formed")
}

/// Independent AR(1) columns with the given autoregressive coefficients and
/// unit-variance innovations.
pub fn independent_ar1_panel(coefficients: &[f64], rows: usize, seed: u64) -> Panel {
    let n = coefficients.len();
    let phi = DMatrix::from_fn(n, n, |r, c| if r == c { coefficients[r] } else { 0.0 });
    simulate_var(&[phi], &DMatrix::identity(n, n), rows, 100, seed)
}
