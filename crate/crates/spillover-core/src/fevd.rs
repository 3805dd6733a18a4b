//! Generalized forecast-error variance decomposition and spillover measures.
//!
//! For MA matrices `A_h` and an innovation covariance `S` with diagonal
//! entries `s_jj`, the H-step generalized decomposition is
//!
//! ```text
//! theta[i][j] = ( s_jj^-1 * sum_{h<H} (A_h S)[i][j]^2 )
//!             / ( sum_{h<H} (A_h S A_h')[i][i] )
//! ```
//!
//! Rows are then normalized to sum to one. The decomposition does not depend
//! on variable ordering, and scaling `S` by a positive constant leaves it
//! unchanged. Aggregates follow the familiar connectedness-table layout:
//! pairwise percentages, FROM and TO sums of off-diagonal shares, NET as
//! their difference, and a total index that equals the mean FROM value.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::var::MaCoefficients;

/// Labeled covariance matrix; symmetric with a strictly positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    matrix: DMatrix<f64>,
    labels: Vec<String>,
}

impl CovMatrix {
    pub fn new(matrix: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        if labels.len() != matrix.nrows() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                actual: labels.len(),
            });
        }
        let scale = matrix.abs().max().max(1.0);
        let asym = (&matrix - matrix.transpose()).abs().max();
        if asym > 1e-10 * scale {
            return Err(Error::Asymmetric(asym));
        }
        for i in 0..matrix.nrows() {
            if !(matrix[(i, i)] > 0.0) {
                return Err(Error::NonPositiveDiagonal { index: i });
            }
        }
        Ok(CovMatrix { matrix, labels })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Unnormalized variance-decomposition shares.
#[derive(Debug, Clone)]
pub struct RawFevd {
    pub theta: DMatrix<f64>,
    pub horizon: usize,
}

/// Row-normalized shares; every row sums to one.
#[derive(Debug, Clone)]
pub struct NormalizedFevd {
    pub theta_bar: DMatrix<f64>,
}

/// Divisor used for the directional FROM/TO sums.
///
/// `RowSum` divides each off-diagonal sum by the (unit) row sum, matching
/// the printed connectedness tables and making the total index the mean of
/// the FROM column. `VariableCount` divides by N instead, so the total
/// index is the sum of the FROM column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DirectionalDivisor {
    #[default]
    RowSum,
    VariableCount,
}

/// Connectedness table: pairwise percentages plus directional aggregates.
#[derive(Debug, Clone)]
pub struct SpilloverTable {
    pub labels: Vec<String>,
    /// Pairwise spillovers as percentages, 100 * theta_bar.
    pub pairwise: DMatrix<f64>,
    pub from_others: Vec<f64>,
    pub to_others: Vec<f64>,
    pub net: Vec<f64>,
    pub total_index: f64,
}

/// Generalized H-step variance decomposition.
pub fn generalized_fevd(ma: &MaCoefficients, sigma: &CovMatrix, horizon: usize) -> Result<RawFevd> {
    let n = sigma.dim();
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    if ma.horizon < horizon {
        return Err(Error::HorizonTooShort {
            requested: horizon,
            available: ma.horizon,
        });
    }
    if ma.matrices[0].nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: ma.matrices[0].nrows(),
            actual: n,
        });
    }
    let s = sigma.matrix();
    for j in 0..n {
        if s[(j, j)] == 0.0 {
            return Err(Error::NonPositiveDiagonal { index: j });
        }
    }

    let mut numer: DMatrix<f64> = DMatrix::zeros(n, n);
    let mut denom = vec![0.0_f64; n];
    for a in ma.matrices.iter().take(horizon) {
        let a_s = a * s;
        let a_s_at = &a_s * a.transpose();
        for i in 0..n {
            for j in 0..n {
                numer[(i, j)] += a_s[(i, j)] * a_s[(i, j)];
            }
            denom[i] += a_s_at[(i, i)];
        }
    }

    let mut theta = DMatrix::zeros(n, n);
    for i in 0..n {
        if denom[i] <= 0.0 {
            return Err(Error::DegenerateProcess { index: i });
        }
        for j in 0..n {
            theta[(i, j)] = numer[(i, j)] / (s[(j, j)] * denom[i]);
        }
    }
    Ok(RawFevd { theta, horizon })
}

/// Normalize each row of the decomposition to sum to one.
pub fn normalize(raw: &RawFevd) -> Result<NormalizedFevd> {
    let n = raw.theta.nrows();
    let mut theta_bar = raw.theta.clone();
    for i in 0..n {
        let row_sum: f64 = raw.theta.row(i).iter().sum();
        if row_sum <= 0.0 {
            return Err(Error::ZeroRowSum { index: i });
        }
        for j in 0..n {
            theta_bar[(i, j)] /= row_sum;
        }
    }
    Ok(NormalizedFevd { theta_bar })
}

/// Total spillover index: 100 times the sum of cross shares over N.
pub fn total_spillover(norm: &NormalizedFevd) -> f64 {
    let n = norm.theta_bar.nrows();
    let cross: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j)
        .map(|(i, j)| norm.theta_bar[(i, j)])
        .sum();
    100.0 * cross / n as f64
}

/// Directional spillovers received from and transmitted to all other
/// variables, as percentages.
pub fn directional(norm: &NormalizedFevd, divisor: DirectionalDivisor) -> (Vec<f64>, Vec<f64>) {
    let n = norm.theta_bar.nrows();
    let scale = match divisor {
        DirectionalDivisor::RowSum => 1.0,
        DirectionalDivisor::VariableCount => n as f64,
    };
    let mut from = vec![0.0; n];
    let mut to = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                from[i] += norm.theta_bar[(i, j)];
                to[i] += norm.theta_bar[(j, i)];
            }
        }
        from[i] *= 100.0 / scale;
        to[i] *= 100.0 / scale;
    }
    (from, to)
}

/// Net spillover: transmitted minus received, elementwise.
pub fn net(from_others: &[f64], to_others: &[f64]) -> Vec<f64> {
    from_others
        .iter()
        .zip(to_others)
        .map(|(f, t)| t - f)
        .collect()
}

/// Assemble the connectedness table for a normalized decomposition.
pub fn build_table(
    norm: &NormalizedFevd,
    labels: &[String],
    divisor: DirectionalDivisor,
) -> Result<SpilloverTable> {
    let n = norm.theta_bar.nrows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    let (from_others, to_others) = directional(norm, divisor);
    let net = net(&from_others, &to_others);
    Ok(SpilloverTable {
        labels: labels.to_vec(),
        pairwise: &norm.theta_bar * 100.0,
        from_others,
        to_others,
        net,
        total_index: total_spillover(norm),
    })
}

impl SpilloverTable {
    /// CSV rendering: one row per variable with pairwise percentages and the
    /// FROM and NET columns, closed by a `TO others` row whose FROM cell is
    /// the grand total of transmitted shares.
    pub fn to_csv_string(&self, decimals: usize) -> String {
        let n = self.labels.len();
        let mut out = String::new();
        out.push(',');
        out.push_str(&self.labels.join(","));
        out.push_str(",FROM,NET\n");
        for i in 0..n {
            out.push_str(&self.labels[i]);
            for j in 0..n {
                out.push_str(&format!(",{:.*}", decimals, self.pairwise[(i, j)]));
            }
            out.push_str(&format!(
                ",{:.*},{:.*}\n",
                decimals, self.from_others[i], decimals, self.net[i]
            ));
        }
        out.push_str("TO others");
        for j in 0..n {
            out.push_str(&format!(",{:.*}", decimals, self.to_others[j]));
        }
        let grand_total: f64 = self.to_others.iter().sum();
        out.push_str(&format!(",{:.*},\n", decimals, grand_total));
        out
    }

    pub fn write_csv(&self, path: &std::path::Path, decimals: usize) -> Result<()> {
        std::fs::write(path, self.to_csv_string(decimals))?;
        Ok(())
    }
}
