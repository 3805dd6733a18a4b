//! Date-aligned panels of prices, log returns and rolling volatility.
//!
//! A panel is a dates x assets matrix. Missing price observations are stored
//! as NaN; return and volatility panels are always dense and finite.

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default annualization factor for daily volatility: sqrt of trading days
/// per year.
pub const DEFAULT_ANNUALIZATION: f64 = 15.874_507_866_387_544; // sqrt(252)

/// A dates x assets matrix with row labels (dates) and column labels (assets).
///
/// Rows are sorted by strictly increasing date and asset names are unique.
/// NaN marks a missing observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    dates: Vec<NaiveDate>,
    assets: Vec<String>,
    values: DMatrix<f64>,
}

impl Panel {
    /// Build a panel from rows that are already date-sorted or not; rows are
    /// sorted here. Duplicate dates and duplicate asset names are rejected.
    pub fn new(
        mut dates: Vec<NaiveDate>,
        assets: Vec<String>,
        values: DMatrix<f64>,
    ) -> Result<Self> {
        if dates.len() != values.nrows() || assets.len() != values.ncols() {
            return Err(Error::DimensionMismatch {
                expected: dates.len() * assets.len(),
                actual: values.nrows() * values.ncols(),
            });
        }
        for (i, a) in assets.iter().enumerate() {
            if assets[..i].contains(a) {
                return Err(Error::DegeneratePanel(format!("duplicate asset name {a}")));
            }
        }
        let mut order: Vec<usize> = (0..dates.len()).collect();
        order.sort_by_key(|&i| dates[i]);
        for w in order.windows(2) {
            if dates[w[0]] == dates[w[1]] {
                return Err(Error::DuplicateDate(dates[w[0]]));
            }
        }
        let sorted = order.iter().any(|&i| order[i] != i);
        let values = if sorted {
            let mut m = DMatrix::zeros(values.nrows(), values.ncols());
            for (new_row, &old_row) in order.iter().enumerate() {
                m.set_row(new_row, &values.row(old_row));
            }
            dates.sort();
            m
        } else {
            values
        };
        Ok(Panel {
            dates,
            assets,
            values,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_dense(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Keep only the listed row indices (must be increasing).
    fn select_rows(&self, keep: &[usize]) -> Panel {
        let mut m = DMatrix::zeros(keep.len(), self.n_assets());
        let mut dates = Vec::with_capacity(keep.len());
        for (new_row, &old_row) in keep.iter().enumerate() {
            m.set_row(new_row, &self.values.row(old_row));
            dates.push(self.dates[old_row]);
        }
        Panel {
            dates,
            assets: self.assets.clone(),
            values: m,
        }
    }

    /// Reorder columns; used by tests and by symbol-to-label mapping.
    pub fn permute_columns(&self, order: &[usize]) -> Result<Panel> {
        if order.len() != self.n_assets() {
            return Err(Error::DimensionMismatch {
                expected: self.n_assets(),
                actual: order.len(),
            });
        }
        let mut m = DMatrix::zeros(self.n_rows(), order.len());
        let mut assets = Vec::with_capacity(order.len());
        for (new_col, &old_col) in order.iter().enumerate() {
            m.set_column(new_col, &self.values.column(old_col));
            assets.push(self.assets[old_col].clone());
        }
        Panel::new(self.dates.clone(), assets, m)
    }

    /// Replace asset names, e.g. mapping tickers to display labels.
    pub fn with_assets(mut self, assets: Vec<String>) -> Result<Self> {
        if assets.len() != self.n_assets() {
            return Err(Error::DimensionMismatch {
                expected: self.n_assets(),
                actual: assets.len(),
            });
        }
        self.assets = assets;
        Ok(self)
    }
}

/// Adjusted closing prices; entries may be missing (NaN).
///
/// Rows that are missing for every asset are dropped on construction, so any
/// retained row carries at least one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel(Panel);

impl PricePanel {
    pub fn new(panel: Panel) -> Result<Self> {
        let keep: Vec<usize> = (0..panel.n_rows())
            .filter(|&r| panel.values.row(r).iter().any(|v| v.is_finite()))
            .collect();
        if keep.is_empty() {
            return Err(Error::NoUsableRows);
        }
        let panel = if keep.len() == panel.n_rows() {
            panel
        } else {
            panel.select_rows(&keep)
        };
        Ok(PricePanel(panel))
    }

    pub fn as_panel(&self) -> &Panel {
        &self.0
    }

    pub fn dates(&self) -> &[NaiveDate] {
        self.0.dates()
    }

    pub fn assets(&self) -> &[String] {
        self.0.assets()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        self.0.values()
    }

    pub fn with_assets(self, assets: Vec<String>) -> Result<Self> {
        Ok(PricePanel(self.0.with_assets(assets)?))
    }
}

/// Daily log returns; dense and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel(Panel);

impl ReturnPanel {
    pub fn new(panel: Panel) -> Result<Self> {
        if !panel.is_dense() {
            return Err(Error::NotAligned);
        }
        Ok(ReturnPanel(panel))
    }

    pub fn as_panel(&self) -> &Panel {
        &self.0
    }

    pub fn dates(&self) -> &[NaiveDate] {
        self.0.dates()
    }

    pub fn assets(&self) -> &[String] {
        self.0.assets()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        self.0.values()
    }
}

/// Rolling-window standard deviation of returns, annualized; dense, finite
/// and nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct VolatilityPanel(Panel);

impl VolatilityPanel {
    pub fn new(panel: Panel) -> Result<Self> {
        if !panel.is_dense() {
            return Err(Error::NotAligned);
        }
        if let Some((r, c)) = first_negative(panel.values()) {
            return Err(Error::DegeneratePanel(format!(
                "negative volatility at row {r}, column {c}"
            )));
        }
        Ok(VolatilityPanel(panel))
    }

    pub fn as_panel(&self) -> &Panel {
        &self.0
    }

    pub fn dates(&self) -> &[NaiveDate] {
        self.0.dates()
    }

    pub fn assets(&self) -> &[String] {
        self.0.assets()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        self.0.values()
    }
}

fn first_negative(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if m[(r, c)] < 0.0 {
                return Some((r, c));
            }
        }
    }
    None
}

/// Align a price panel: forward-fill partially missing cells from the last
/// observation, then drop leading rows that still miss any asset.
///
/// Rows missing for every asset never survive `PricePanel` construction, so
/// alignment only deals with partial gaps. Fails if fewer than two rows
/// remain.
pub fn align(panel: &PricePanel) -> Result<PricePanel> {
    let src = panel.values();
    let (rows, cols) = (src.nrows(), src.ncols());
    let mut filled = src.clone();
    for c in 0..cols {
        let mut last = f64::NAN;
        for r in 0..rows {
            if filled[(r, c)].is_finite() {
                last = filled[(r, c)];
            } else if last.is_finite() {
                filled[(r, c)] = last;
            }
        }
    }
    let first_dense = (0..rows)
        .find(|&r| filled.row(r).iter().all(|v| v.is_finite()))
        .unwrap_or(rows);
    let keep: Vec<usize> = (first_dense..rows).collect();
    if keep.len() < 2 {
        return Err(Error::TooFewRows {
            rows: keep.len(),
            min: 2,
        });
    }
    let aligned = Panel {
        dates: panel.dates()[first_dense..].to_vec(),
        assets: panel.assets().to_vec(),
        values: filled.rows(first_dense, keep.len()).into_owned(),
    };
    PricePanel::new(aligned)
}

/// Daily log returns from an aligned, dense, strictly positive price panel.
pub fn log_returns(panel: &PricePanel) -> Result<ReturnPanel> {
    let prices = panel.values();
    if !panel.as_panel().is_dense() {
        return Err(Error::NotAligned);
    }
    let (rows, cols) = (prices.nrows(), prices.ncols());
    if rows < 2 {
        return Err(Error::TooFewRows { rows, min: 2 });
    }
    for r in 0..rows {
        for c in 0..cols {
            if prices[(r, c)] <= 0.0 {
                return Err(Error::NonPositivePrice {
                    asset: panel.assets()[c].clone(),
                    date: panel.dates()[r],
                    value: prices[(r, c)],
                });
            }
        }
    }
    let mut returns = DMatrix::zeros(rows - 1, cols);
    for r in 0..rows - 1 {
        for c in 0..cols {
            returns[(r, c)] = (prices[(r + 1, c)] / prices[(r, c)]).ln();
        }
    }
    ReturnPanel::new(Panel {
        dates: panel.dates()[1..].to_vec(),
        assets: panel.assets().to_vec(),
        values: returns,
    })
}

/// Rolling sample standard deviation (denominator `window - 1`) of returns,
/// scaled by `annualization_factor`. Output has `rows - window + 1` rows and
/// is stamped with each window's final date.
pub fn rolling_volatility(
    returns: &ReturnPanel,
    window: usize,
    annualization_factor: f64,
) -> Result<VolatilityPanel> {
    if window < 2 {
        return Err(Error::WindowTooShort(window));
    }
    let values = returns.values();
    let rows = values.nrows();
    if rows < window {
        return Err(Error::WindowTooLong { window, rows });
    }
    if !(annualization_factor.is_finite() && annualization_factor > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "annualization factor must be positive, got {annualization_factor}"
        )));
    }
    let cols = values.ncols();
    let out_rows = rows - window + 1;
    let mut out = DMatrix::zeros(out_rows, cols);
    for c in 0..cols {
        for r in 0..out_rows {
            let slice = values.view((r, c), (window, 1));
            let mean = slice.iter().sum::<f64>() / window as f64;
            let ss: f64 = slice.iter().map(|v| (v - mean) * (v - mean)).sum();
            out[(r, c)] = (ss / (window as f64 - 1.0)).sqrt() * annualization_factor;
        }
    }
    VolatilityPanel::new(Panel {
        dates: returns.dates()[window - 1..].to_vec(),
        assets: returns.assets().to_vec(),
        values: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn dates(n: usize) -> Vec<NaiveDate> {
        (0..n)
            .map(|i| date("2020-01-01") + chrono::Days::new(i as u64))
            .collect()
    }

    fn price_panel(rows: &[&[f64]]) -> PricePanel {
        let n = rows.len();
        let k = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        let assets = (0..k).map(|i| format!("A{i}")).collect();
        PricePanel::new(
            Panel::new(dates(n), assets, DMatrix::from_row_slice(n, k, &flat)).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn all_missing_row_is_dropped_on_construction() {
        let p = price_panel(&[
            &[1.0, 2.0],
            &[f64::NAN, f64::NAN],
            &[3.0, 4.0],
        ]);
        assert_eq!(p.values().nrows(), 2);
        assert_eq!(p.dates(), &[date("2020-01-01"), date("2020-01-03")]);
    }

    #[test]
    fn align_keeps_dense_panel_unchanged() {
        let p = price_panel(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let aligned = align(&p).unwrap();
        assert_eq!(aligned, p);
    }

    #[test]
    fn align_forward_fills_mid_series_gap() {
        let p = price_panel(&[
            &[10.0, 20.0],
            &[11.0, f64::NAN],
            &[12.0, 22.0],
            &[13.0, 23.0],
        ]);
        let aligned = align(&p).unwrap();
        assert_eq!(aligned.values()[(1, 1)], 20.0);
        assert_eq!(aligned.values().nrows(), 4);
    }

    #[test]
    fn align_drops_leading_rows_with_unfilled_cells() {
        let p = price_panel(&[
            &[f64::NAN, 20.0],
            &[f64::NAN, 21.0],
            &[12.0, 22.0],
            &[13.0, 23.0],
        ]);
        let aligned = align(&p).unwrap();
        assert_eq!(aligned.values().nrows(), 2);
        assert_eq!(aligned.dates()[0], date("2020-01-03"));
    }

    #[test]
    fn align_is_idempotent() {
        let p = price_panel(&[
            &[f64::NAN, 20.0],
            &[11.0, f64::NAN],
            &[12.0, 22.0],
            &[13.0, 23.0],
        ]);
        let once = align(&p).unwrap();
        let twice = align(&once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn align_fails_when_fewer_than_two_rows_survive() {
        let p = price_panel(&[&[f64::NAN, 20.0], &[f64::NAN, 21.0], &[1.0, 22.0]]);
        assert!(matches!(
            align(&p),
            Err(Error::TooFewRows { rows: 1, min: 2 })
        ));
    }

    #[test]
    fn log_returns_flat_prices_are_zero() {
        let p = price_panel(&[&[100.0], &[100.0]]);
        let r = log_returns(&p).unwrap();
        assert_eq!(r.values()[(0, 0)], 0.0);
    }

    #[test]
    fn log_return_of_e_ratio_is_one() {
        let p = price_panel(&[&[1.0], &[std::f64::consts::E]]);
        let r = log_returns(&p).unwrap();
        assert!((r.values()[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_returns_match_direct_ratio() {
        let p = price_panel(&[&[100.0], &[105.0], &[99.75]]);
        let r = log_returns(&p).unwrap();
        assert!((r.values()[(0, 0)] - 0.048_790).abs() < 1e-6);
        assert!((r.values()[(1, 0)] - (-0.051_293)).abs() < 1e-6);
        assert!((r.values()[(0, 0)] - (105.0f64 / 100.0).ln()).abs() < 1e-15);
        assert!((r.values()[(1, 0)] - (99.75f64 / 105.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn log_returns_reject_non_positive_prices() {
        let p = price_panel(&[&[1.0], &[0.0]]);
        assert!(matches!(
            log_returns(&p),
            Err(Error::NonPositivePrice { .. })
        ));
    }

    #[test]
    fn log_returns_round_trip_reconstructs_prices() {
        let p = price_panel(&[&[100.0, 50.0], &[101.5, 49.0], &[99.0, 52.5], &[103.2, 51.1]]);
        let r = log_returns(&p).unwrap();
        for c in 0..2 {
            let mut level = p.values()[(0, c)];
            for t in 0..r.values().nrows() {
                level *= r.values()[(t, c)].exp();
                let expected = p.values()[(t + 1, c)];
                assert!((level - expected).abs() / expected < 1e-12);
            }
        }
    }

    #[test]
    fn rolling_volatility_of_constant_returns_is_zero() {
        let p = price_panel(&[&[1.0], &[2.0], &[4.0], &[8.0], &[16.0]]);
        let r = log_returns(&p).unwrap();
        let v = rolling_volatility(&r, 2, 1.0).unwrap();
        assert!(v.values().iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn rolling_volatility_two_point_sample_std() {
        let panel = Panel::new(
            dates(2),
            vec!["A".into()],
            DMatrix::from_row_slice(2, 1, &[0.01, -0.01]),
        )
        .unwrap();
        let r = ReturnPanel::new(panel).unwrap();
        let v = rolling_volatility(&r, 2, 1.0).unwrap();
        assert!((v.values()[(0, 0)] - 0.014_142_135_623_730_95).abs() < 1e-12);
    }

    #[test]
    fn rolling_volatility_output_length() {
        let panel = Panel::new(
            dates(10),
            vec!["A".into()],
            DMatrix::from_fn(10, 1, |r, _| (r as f64 * 0.37).sin() * 0.01),
        )
        .unwrap();
        let r = ReturnPanel::new(panel).unwrap();
        for window in 2..=10 {
            let v = rolling_volatility(&r, window, 1.0).unwrap();
            assert_eq!(v.values().nrows(), 10 - window + 1);
        }
        assert!(matches!(
            rolling_volatility(&r, 11, 1.0),
            Err(Error::WindowTooLong { .. })
        ));
    }

    #[test]
    fn default_annualization_matches_daily_volatility_scale() {
        assert!((DEFAULT_ANNUALIZATION - 252.0f64.sqrt()).abs() < 1e-12);
        // A 4.2% daily standard deviation lands on the annualized scale of
        // crypto volatility (around 0.62 mean, 0.67 here).
        assert!((0.042 * DEFAULT_ANNUALIZATION - 0.667).abs() < 5e-3);
    }

    #[test]
    fn shuffled_rows_are_sorted_on_construction() {
        let d = dates(3);
        let shuffled = vec![d[2], d[0], d[1]];
        let panel = Panel::new(
            shuffled,
            vec!["A".into()],
            DMatrix::from_row_slice(3, 1, &[3.0, 1.0, 2.0]),
        )
        .unwrap();
        assert_eq!(panel.dates(), &d[..]);
        assert_eq!(panel.values().as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn duplicate_dates_are_rejected() {
        let d = vec![date("2020-01-01"), date("2020-01-01")];
        let err = Panel::new(
            d,
            vec!["A".into()],
            DMatrix::from_row_slice(2, 1, &[1.0, 2.0]),
        );
        assert!(matches!(err, Err(Error::DuplicateDate(_))));
    }
}
