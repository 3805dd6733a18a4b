//! Vector autoregression estimation and its moving-average representation.
//!
//! A VAR(p) with intercept is fit equation by equation with ordinary least
//! squares:
//!
//! ```text
//! x_t = c + phi_1 x_{t-1} + ... + phi_p x_{t-p} + e_t
//! ```
//!
//! All equations share the same regressors, so one normal-equation solve
//! covers the whole system. The moving-average matrices follow the usual
//! recursion from the fitted coefficients and feed the variance
//! decomposition.

use nalgebra::{DMatrix, DVector};
use serde_json::json;

use crate::error::{Error, Result};
use crate::fevd::CovMatrix;
use crate::ingest::Panel;

/// Relative ridge added to a singular regressor Gram matrix, scaled by its
/// mean diagonal.
const RIDGE_SCALE: f64 = 1e-8;

/// Fitted VAR(p) model.
#[derive(Debug, Clone)]
pub struct VarModel {
    pub n_vars: usize,
    pub lag_order: usize,
    pub intercept: DVector<f64>,
    /// Coefficient matrices phi_1..phi_p, each N x N. Entry (i, j) is the
    /// loading of variable i on lag of variable j.
    pub coefficients: Vec<DMatrix<f64>>,
    /// Residuals, T_eff x N.
    pub residuals: DMatrix<f64>,
    /// Residual covariance, N x N, symmetric.
    pub residual_cov: DMatrix<f64>,
    pub asset_names: Vec<String>,
    pub warnings: Vec<String>,
    /// RFC 3339 timestamp recorded at fit time; informational only.
    pub fitted_at: String,
}

/// Fit options. The degrees-of-freedom correction divides the residual
/// cross product by `T_eff - N p - 1`; without it, by `T_eff`.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub dof_adjust: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { dof_adjust: true }
    }
}

/// Stationarity verdict from the companion-matrix spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability {
    pub stable: bool,
    pub spectral_radius: f64,
}

/// Moving-average coefficient matrices A_0..A_{H-1}, with A_0 = I.
#[derive(Debug, Clone)]
pub struct MaCoefficients {
    pub horizon: usize,
    pub matrices: Vec<DMatrix<f64>>,
}

/// Fit a VAR(p) by per-equation least squares with intercept.
pub fn fit_var(panel: &Panel, lag_order: usize) -> Result<VarModel> {
    fit_var_with(panel, lag_order, &FitOptions::default())
}

pub fn fit_var_with(panel: &Panel, lag_order: usize, opts: &FitOptions) -> Result<VarModel> {
    if lag_order == 0 {
        return Err(Error::InvalidLagOrder);
    }
    let data = panel.values();
    let (t_total, n_vars) = (data.nrows(), data.ncols());
    if !panel.is_dense() {
        return Err(Error::NotAligned);
    }
    let min_rows = n_vars * lag_order + lag_order + 1;
    if t_total <= min_rows {
        return Err(Error::InsufficientObservations {
            required: min_rows,
            actual: t_total,
        });
    }
    check_degenerate_columns(panel)?;

    let t_eff = t_total - lag_order;
    let k = 1 + n_vars * lag_order;

    // X row t: [1, x_{t+p-1}, x_{t+p-2}, ..., x_t]; Y row t: x_{t+p}.
    let mut x = DMatrix::zeros(t_eff, k);
    let mut y = DMatrix::zeros(t_eff, n_vars);
    for t in 0..t_eff {
        x[(t, 0)] = 1.0;
        for lag in 1..=lag_order {
            let src = t + lag_order - lag;
            for j in 0..n_vars {
                x[(t, 1 + (lag - 1) * n_vars + j)] = data[(src, j)];
            }
        }
        for j in 0..n_vars {
            y[(t, j)] = data[(t + lag_order, j)];
        }
    }

    let gram = x.transpose() * &x;
    let xty = x.transpose() * &y;
    let mut warnings = Vec::new();
    let beta = match nalgebra::Cholesky::new(gram.clone()) {
        Some(chol) => chol.solve(&xty),
        None => {
            let ridge = RIDGE_SCALE * gram.trace() / gram.nrows() as f64;
            let msg = format!(
                "regressor Gram matrix is singular; added ridge {ridge:.3e} to the diagonal"
            );
            log::warn!("{msg}");
            warnings.push(msg);
            let regularized = &gram + DMatrix::identity(k, k) * ridge;
            nalgebra::Cholesky::new(regularized)
                .ok_or(Error::SingularGram)?
                .solve(&xty)
        }
    };

    let residuals = &y - &x * &beta;
    let divisor = if opts.dof_adjust {
        (t_eff - n_vars * lag_order - 1) as f64
    } else {
        t_eff as f64
    };
    let cross = residuals.transpose() * &residuals;
    let residual_cov = (&cross + cross.transpose()) / (2.0 * divisor);
    for j in 0..n_vars {
        if residual_cov[(j, j)] <= 0.0 {
            return Err(Error::DegeneratePanel(format!(
                "residual variance of {} is not positive",
                panel.assets()[j]
            )));
        }
    }

    let intercept = beta.row(0).transpose();
    let coefficients = (1..=lag_order)
        .map(|lag| {
            // Rows of beta hold regressors, columns hold equations.
            beta.rows(1 + (lag - 1) * n_vars, n_vars).transpose()
        })
        .collect();

    Ok(VarModel {
        n_vars,
        lag_order,
        intercept,
        coefficients,
        residuals,
        residual_cov,
        asset_names: panel.assets().to_vec(),
        warnings,
        fitted_at: chrono::Utc::now().to_rfc3339(),
    })
}

fn check_degenerate_columns(panel: &Panel) -> Result<()> {
    let data = panel.values();
    let (rows, cols) = (data.nrows(), data.ncols());
    for c in 0..cols {
        let col = data.column(c);
        let mean = col.iter().sum::<f64>() / rows as f64;
        if col.iter().all(|v| (v - mean).abs() < 1e-14 * (1.0 + mean.abs())) {
            return Err(Error::DegeneratePanel(format!(
                "column {} is constant",
                panel.assets()[c]
            )));
        }
    }
    for a in 0..cols {
        for b in a + 1..cols {
            if (0..rows).all(|r| data[(r, a)] == data[(r, b)]) {
                return Err(Error::DegeneratePanel(format!(
                    "columns {} and {} are identical",
                    panel.assets()[a],
                    panel.assets()[b]
                )));
            }
        }
    }
    Ok(())
}

/// Spectral radius of the companion matrix; the model is treated as stable
/// when every eigenvalue modulus stays below `1 - 1e-10`.
pub fn is_stable(model: &VarModel) -> Stability {
    let n = model.n_vars;
    let p = model.lag_order;
    let dim = n * p;
    let mut companion = DMatrix::zeros(dim, dim);
    for (lag, phi) in model.coefficients.iter().enumerate() {
        companion.view_mut((0, lag * n), (n, n)).copy_from(phi);
    }
    for i in 0..n * (p - 1) {
        companion[(n + i, i)] = 1.0;
    }
    let radius = companion
        .complex_eigenvalues()
        .iter()
        .map(|l| l.norm())
        .fold(0.0_f64, f64::max);
    Stability {
        stable: radius < 1.0 - 1e-10,
        spectral_radius: radius,
    }
}

/// Moving-average matrices by the recursion `A_i = sum_j A_{i-j} phi_j`
/// with `A_0 = I` and `A_i = 0` for negative indices.
pub fn ma_coefficients(model: &VarModel, horizon: usize) -> MaCoefficients {
    let n = model.n_vars;
    let mut matrices = Vec::with_capacity(horizon.max(1));
    matrices.push(DMatrix::identity(n, n));
    for i in 1..horizon {
        let mut a = DMatrix::zeros(n, n);
        for (j, phi) in model.coefficients.iter().enumerate() {
            let lag = j + 1;
            if i >= lag {
                a += &matrices[i - lag] * phi;
            }
        }
        matrices.push(a);
    }
    MaCoefficients {
        horizon: horizon.max(1),
        matrices,
    }
}

/// Pick the lag in `1..=max_lag` minimizing AIC. Candidates are fit on a
/// common effective sample (the first `max_lag` rows are reserved) so the
/// criteria are comparable.
pub fn select_lag_aic(panel: &Panel, max_lag: usize) -> Result<usize> {
    if max_lag == 0 {
        return Err(Error::InvalidLagOrder);
    }
    let mut best = (1usize, f64::INFINITY);
    for p in 1..=max_lag {
        let offset = max_lag - p;
        let sub = Panel::new(
            panel.dates()[offset..].to_vec(),
            panel.assets().to_vec(),
            panel
                .values()
                .rows(offset, panel.n_rows() - offset)
                .into_owned(),
        )?;
        let model = fit_var_with(&sub, p, &FitOptions { dof_adjust: false })?;
        let t_eff = model.residuals.nrows() as f64;
        let n = model.n_vars as f64;
        let sigma_ml = model.residuals.transpose() * &model.residuals / t_eff;
        let det = sigma_ml.determinant().max(f64::MIN_POSITIVE);
        let params = n * n * p as f64 + n;
        let aic = det.ln() + 2.0 * params / t_eff;
        if aic < best.1 {
            best = (p, aic);
        }
    }
    Ok(best.0)
}

impl VarModel {
    /// Residual covariance as a labeled covariance matrix.
    pub fn residual_cov_matrix(&self) -> Result<CovMatrix> {
        CovMatrix::new(self.residual_cov.clone(), self.asset_names.clone())
    }

    /// JSON document with coefficients in row-major order plus fit metadata.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "n_vars": self.n_vars,
            "lag_order": self.lag_order,
            "asset_names": self.asset_names,
            "intercept": self.intercept.iter().copied().collect::<Vec<f64>>(),
            "coefficients": self
                .coefficients
                .iter()
                .map(|m| row_major(m))
                .collect::<Vec<_>>(),
            "residual_cov": row_major(&self.residual_cov),
            "warnings": self.warnings,
            "fitted_at": self.fitted_at,
        })
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}
