//! CSV reading and writing for price panels.
//!
//! Expected layout: a header `date,SYM1,SYM2,...` with ISO-8601 dates and
//! decimal-point numbers. Empty or unparsable cells are treated as missing.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::ingest::panel::{Panel, PricePanel};

const DATE_FORMAT: &str = "%Y-%m-%d";

/// Column mapping for [`load_csv`].
#[derive(Debug, Clone)]
pub struct CsvSchema {
    /// Name of the date column.
    pub date_column: String,
    /// Asset columns to load, in order. `None` loads every non-date column
    /// in header order.
    pub asset_columns: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            date_column: "date".to_string(),
            asset_columns: None,
        }
    }
}

/// Load a price panel from a CSV file. Rows are sorted by date; unparsable
/// value cells become missing entries; rows with an unparsable date are
/// skipped.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<PricePanel> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema)
}

/// Same as [`load_csv`] but from any reader.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<PricePanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::MalformedHeader(e.to_string()))?
        .clone();
    let date_idx = headers
        .iter()
        .position(|h| h == schema.date_column)
        .ok_or_else(|| {
            Error::MalformedHeader(format!("missing date column `{}`", schema.date_column))
        })?;

    let asset_indices: Vec<(usize, String)> = match &schema.asset_columns {
        Some(cols) => cols
            .iter()
            .map(|name| {
                headers
                    .iter()
                    .position(|h| h == name)
                    .map(|i| (i, name.clone()))
                    .ok_or_else(|| {
                        Error::MalformedHeader(format!("missing asset column `{name}`"))
                    })
            })
            .collect::<Result<_>>()?,
        None => headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != date_idx)
            .map(|(i, h)| (i, h.to_string()))
            .collect(),
    };
    if asset_indices.is_empty() {
        return Err(Error::MalformedHeader(
            "no asset columns in header".to_string(),
        ));
    }

    let mut dates = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let Some(date_cell) = record.get(date_idx) else {
            continue;
        };
        let Ok(d) = NaiveDate::parse_from_str(date_cell, DATE_FORMAT) else {
            continue;
        };
        let row: Vec<f64> = asset_indices
            .iter()
            .map(|&(i, _)| {
                record
                    .get(i)
                    .and_then(|cell| {
                        if cell.is_empty() {
                            None
                        } else {
                            cell.parse::<f64>().ok()
                        }
                    })
                    .unwrap_or(f64::NAN)
            })
            .collect();
        dates.push(d);
        rows.push(row);
    }
    if dates.is_empty() {
        return Err(Error::NoUsableRows);
    }

    let n_assets = asset_indices.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let values = DMatrix::from_row_slice(dates.len(), n_assets, &flat);
    let assets = asset_indices.into_iter().map(|(_, n)| n).collect();
    PricePanel::new(Panel::new(dates, assets, values)?)
}

/// Write any panel in the `date,SYM1,...` layout; missing cells are empty.
pub fn write_panel_csv(panel: &Panel, path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    write_panel(panel, &mut wtr)
}

/// Render a panel as a CSV string.
pub fn panel_to_csv_string(panel: &Panel) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    write_panel(panel, &mut wtr)?;
    let bytes = wtr
        .into_inner()
        .map_err(|e| Error::Persistence(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Persistence(e.to_string()))
}

fn write_panel<W: std::io::Write>(panel: &Panel, wtr: &mut csv::Writer<W>) -> Result<()> {
    let mut header = vec!["date".to_string()];
    header.extend(panel.assets().iter().cloned());
    wtr.write_record(&header)?;
    for (r, date) in panel.dates().iter().enumerate() {
        let mut record = vec![date.format(DATE_FORMAT).to_string()];
        for c in 0..panel.n_assets() {
            let v = panel.values()[(r, c)];
            record.push(if v.is_finite() {
                format!("{v}")
            } else {
                String::new()
            });
        }
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}
