//! Cross-checks the production variance decomposition against a brute-force
//! reference that works scalar by scalar with explicit selection vectors and
//! its own moving-average recursion.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spillover_core::{generalized_fevd, is_stable, ma_coefficients, CovMatrix, VarModel};

/// Reference moving-average matrices built with the recursion written as
/// `A_i = phi_1 A_{i-1} + ... + phi_p A_{i-p}`; the production code composes
/// the factors in the opposite order, so agreement is informative.
fn reference_ma(phis: &[DMatrix<f64>], horizon: usize) -> Vec<DMatrix<f64>> {
    let n = phis[0].nrows();
    let mut out: Vec<DMatrix<f64>> = vec![DMatrix::identity(n, n)];
    for i in 1..horizon {
        let mut a = DMatrix::zeros(n, n);
        for (j, phi) in phis.iter().enumerate() {
            let lag = j + 1;
            if i >= lag {
                a += phi * &out[i - lag];
            }
        }
        out.push(a);
    }
    out
}

fn unit_vector(n: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 })
}

/// Scalar evaluation of `e_i' M e_j` without matrix products.
fn bilinear(e_i: &DVector<f64>, m: &DMatrix<f64>, e_j: &DVector<f64>) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            acc += e_i[r] * m[(r, c)] * e_j[c];
        }
    }
    acc
}

/// Literal term-by-term evaluation of the generalized decomposition.
fn brute_force_fevd(phis: &[DMatrix<f64>], sigma: &DMatrix<f64>, horizon: usize) -> DMatrix<f64> {
    let n = sigma.nrows();
    let ma = reference_ma(phis, horizon);
    let mut theta = DMatrix::zeros(n, n);
    for i in 0..n {
        let e_i = unit_vector(n, i);
        let mut denom = 0.0;
        for a in ma.iter().take(horizon) {
            let a_sigma_at = a * sigma * a.transpose();
            denom += bilinear(&e_i, &a_sigma_at, &e_i);
        }
        for j in 0..n {
            let e_j = unit_vector(n, j);
            let mut numer = 0.0;
            for a in ma.iter().take(horizon) {
                let term = bilinear(&e_i, &(a * sigma), &e_j);
                numer += term * term;
            }
            theta[(i, j)] = numer / (sigma[(j, j)] * denom);
        }
    }
    theta
}

fn random_stable_var(
    n: usize,
    p: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<DMatrix<f64>>, DMatrix<f64>, VarModel) {
    let labels: Vec<String> = (0..n).map(|i| format!("A{i}")).collect();
    loop {
        let phis: Vec<DMatrix<f64>> = (0..p)
            .map(|_| {
                DMatrix::from_fn(n, n, |_, _| (rng.random::<f64>() - 0.5) * 0.8 / p as f64)
            })
            .collect();
        let g = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let sigma = &g * g.transpose() + DMatrix::identity(n, n) * 0.3;
        let model = VarModel {
            n_vars: n,
            lag_order: p,
            intercept: DVector::zeros(n),
            coefficients: phis.clone(),
            residuals: DMatrix::zeros(10, n),
            residual_cov: sigma.clone(),
            asset_names: labels.clone(),
            warnings: vec![],
            fitted_at: String::new(),
        };
        if is_stable(&model).spectral_radius < 0.95 {
            return (phis, sigma, model);
        }
    }
}

#[test]
fn production_fevd_matches_brute_force_on_random_stable_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    for &n in &[2usize, 3] {
        for &p in &[1usize, 2] {
            for _ in 0..5 {
                let (phis, sigma, model) = random_stable_var(n, p, &mut rng);
                let labels = model.asset_names.clone();
                for &h in &[1usize, 5, 10] {
                    let ma = ma_coefficients(&model, h);
                    let cov = CovMatrix::new(sigma.clone(), labels.clone()).unwrap();
                    let produced = generalized_fevd(&ma, &cov, h).unwrap();
                    let reference = brute_force_fevd(&phis, &sigma, h);
                    let diff = (&produced.theta - &reference).abs().max();
                    assert!(
                        diff < 1e-10,
                        "n={n} p={p} h={h}: max deviation {diff:.3e}"
                    );
                    checked += 1;
                }
            }
        }
    }
    assert_eq!(checked, 60);
}

#[test]
fn brute_force_reproduces_the_static_correlated_pair() {
    let sigma = nalgebra::dmatrix![1.0, 0.5; 0.5, 1.0];
    let phis = vec![DMatrix::zeros(2, 2)];
    let theta = brute_force_fevd(&phis, &sigma, 1);
    let expected = nalgebra::dmatrix![1.0, 0.25; 0.25, 1.0];
    assert!((&theta - &expected).abs().max() < 1e-14);
}
