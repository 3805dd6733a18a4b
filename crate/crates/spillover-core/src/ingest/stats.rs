//! Per-asset descriptive statistics.

use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::panel::Panel;

/// One row of descriptive statistics for a single asset.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub asset: String,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// Descriptive statistics table, one row per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsTable {
    pub rows: Vec<StatsRow>,
}

impl StatsTable {
    /// CSV rendering with the `Count,Mean,Std,Min,25%,50%,75%,Max` header and
    /// an unnamed leading label column. Numbers use five decimals.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(",Count,Mean,Std,Min,25%,50%,75%,Max\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.5},{:.5},{:.5},{:.5},{:.5},{:.5},{:.5}\n",
                csv_escape(&r.asset),
                r.count,
                r.mean,
                r.std,
                r.min,
                r.q25,
                r.median,
                r.q75,
                r.max
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Quantile by linear interpolation between order statistics of a sorted
/// sample; `p` in [0, 1].
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n as f64 - 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Descriptive statistics per asset. Missing (NaN) entries are excluded from
/// the count and every statistic; quantiles interpolate linearly.
pub fn describe(panel: &Panel) -> Result<StatsTable> {
    if panel.n_rows() == 0 || panel.n_assets() == 0 {
        return Err(Error::EmptyPanel);
    }
    let mut rows = Vec::with_capacity(panel.n_assets());
    for (c, asset) in panel.assets().iter().enumerate() {
        let mut sample: Vec<f64> = panel
            .values()
            .column(c)
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .collect();
        if sample.is_empty() {
            return Err(Error::DegeneratePanel(format!(
                "asset {asset} has no observations"
            )));
        }
        sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sample.len();
        let mean = sample.iter().sum::<f64>() / n as f64;
        // A constant sample has zero dispersion by definition; skipping the
        // mean subtraction avoids rounding residue.
        let std = if n > 1 && sample[0] < sample[n - 1] {
            (sample.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
        } else {
            0.0
        };
        rows.push(StatsRow {
            asset: asset.clone(),
            count: n,
            mean,
            std,
            min: sample[0],
            q25: quantile_sorted(&sample, 0.25),
            median: quantile_sorted(&sample, 0.50),
            q75: quantile_sorted(&sample, 0.75),
            max: sample[n - 1],
        });
    }
    Ok(StatsTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn panel_from_columns(cols: &[Vec<f64>]) -> Panel {
        let rows = cols[0].len();
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let dates = (0..rows)
            .map(|i| start + chrono::Days::new(i as u64))
            .collect();
        let assets = (0..cols.len()).map(|i| format!("A{i}")).collect();
        let values = DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]);
        Panel::new(dates, assets, values).unwrap()
    }

    #[test]
    fn simple_column_statistics() {
        let table = describe(&panel_from_columns(&[vec![1.0, 2.0, 3.0]])).unwrap();
        let row = &table.rows[0];
        assert_eq!(row.count, 3);
        assert!((row.mean - 2.0).abs() < 1e-15);
        assert!((row.median - 2.0).abs() < 1e-15);
        assert!((row.std - 1.0).abs() < 1e-15);
        assert!((row.q25 - 1.5).abs() < 1e-15);
        assert!((row.q75 - 2.5).abs() < 1e-15);
    }

    #[test]
    fn constant_column_has_zero_std_and_equal_extremes() {
        let table = describe(&panel_from_columns(&[vec![4.2; 10]])).unwrap();
        let row = &table.rows[0];
        assert_eq!(row.std, 0.0);
        assert_eq!(row.min, row.max);
    }

    #[test]
    fn count_matches_row_count_on_dense_panel() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let col: Vec<f64> = (0..2834).map(|_| rng.random::<f64>() - 0.5).collect();
        let table = describe(&panel_from_columns(&[col])).unwrap();
        assert_eq!(table.rows[0].count, 2834);
    }

    #[test]
    fn count_excludes_missing_entries() {
        let table = describe(&panel_from_columns(&[vec![1.0, f64::NAN, 3.0]])).unwrap();
        assert_eq!(table.rows[0].count, 2);
        assert!((table.rows[0].mean - 2.0).abs() < 1e-15);
    }

    #[test]
    fn quantiles_are_monotone_on_random_panels() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let n = rng.random_range(2..200);
            let col: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
            let table = describe(&panel_from_columns(&[col])).unwrap();
            let r = &table.rows[0];
            assert!(r.min <= r.q25 && r.q25 <= r.median);
            assert!(r.median <= r.q75 && r.q75 <= r.max);
            assert!(r.std >= 0.0);
        }
    }

    #[test]
    fn csv_header_matches_report_layout() {
        let table = describe(&panel_from_columns(&[vec![1.0, 2.0]])).unwrap();
        let csv = table.to_csv_string();
        assert!(csv.starts_with(",Count,Mean,Std,Min,25%,50%,75%,Max\n"));
    }
}
