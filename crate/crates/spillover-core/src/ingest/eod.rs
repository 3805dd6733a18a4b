//! End-of-day price client for REST endpoints shaped like
//! `GET <endpoint>/eod/<symbol>?from=..&to=..&api_token=..&fmt=json`.
//!
//! Responses are cached as one CSV per symbol so repeated runs work offline
//! and produce identical panels.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::panel::{Panel, PricePanel};

/// Inclusive date range of a fetch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateRange {
    pub from: NaiveDate,
    pub to: NaiveDate,
}

/// Fetched panel plus per-symbol diagnostics (404 skips and similar).
#[derive(Debug)]
pub struct FetchedPanel {
    pub panel: PricePanel,
    pub warnings: Vec<String>,
}

/// Client configuration. `api_key` is normally sourced from the
/// `EOD_API_KEY` environment variable by the caller.
#[derive(Debug, Clone)]
pub struct EodClient {
    pub endpoint: String,
    pub api_key: String,
    pub retries: u32,
    pub backoff: Duration,
    pub cache_dir: Option<PathBuf>,
    pub timeout: Duration,
}

impl EodClient {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Self {
        EodClient {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            retries: 3,
            backoff: Duration::from_millis(250),
            cache_dir: None,
            timeout: Duration::from_secs(30),
        }
    }

    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn with_retries(mut self, retries: u32, backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = backoff;
        self
    }

    /// Fetch adjusted closes for the symbols and merge them by date union,
    /// columns in the given symbol order. Symbols the server does not know
    /// are skipped with a warning; fetching fails only when every symbol
    /// fails.
    pub fn fetch(&self, symbols: &[String], range: DateRange) -> Result<FetchedPanel> {
        if symbols.is_empty() {
            return Err(Error::EmptySymbolList);
        }
        if self.api_key.is_empty() {
            return Err(Error::EmptyApiKey);
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| Error::Http(e.to_string()))?;

        let mut warnings = Vec::new();
        let mut series: Vec<(String, BTreeMap<NaiveDate, f64>)> = Vec::new();
        for symbol in symbols {
            match self.fetch_symbol(&client, symbol, range) {
                Ok(bars) => series.push((symbol.clone(), bars)),
                Err(SymbolError::NotFound) => {
                    let msg = format!("symbol {symbol} not found, skipping");
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
                Err(SymbolError::Fatal(e)) => return Err(e),
            }
        }
        if series.is_empty() {
            return Err(Error::AllSymbolsFailed(format!(
                "none of {} symbols returned data",
                symbols.len()
            )));
        }

        let mut dates: Vec<NaiveDate> = series
            .iter()
            .flat_map(|(_, bars)| bars.keys().copied())
            .collect();
        dates.sort();
        dates.dedup();
        let values = DMatrix::from_fn(dates.len(), series.len(), |r, c| {
            series[c].1.get(&dates[r]).copied().unwrap_or(f64::NAN)
        });
        let assets = series.iter().map(|(s, _)| s.clone()).collect();
        let panel = PricePanel::new(Panel::new(dates, assets, values)?)?;
        Ok(FetchedPanel { panel, warnings })
    }

    fn fetch_symbol(
        &self,
        client: &reqwest::blocking::Client,
        symbol: &str,
        range: DateRange,
    ) -> std::result::Result<BTreeMap<NaiveDate, f64>, SymbolError> {
        if let Some(dir) = &self.cache_dir {
            let path = self.cache_path(dir, symbol, range);
            if path.exists() {
                return read_cache(&path).map_err(SymbolError::Fatal);
            }
        }

        let url = format!(
            "{}/eod/{}?from={}&to={}&api_token={}&fmt=json",
            self.endpoint.trim_end_matches('/'),
            symbol,
            range.from.format("%Y-%m-%d"),
            range.to.format("%Y-%m-%d"),
            self.api_key
        );

        let mut last_err = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            match client.get(&url).send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status == reqwest::StatusCode::NOT_FOUND {
                        return Err(SymbolError::NotFound);
                    }
                    if status.is_success() {
                        let bars: Vec<EodBar> = resp
                            .json()
                            .map_err(|e| SymbolError::Fatal(Error::Http(e.to_string())))?;
                        let parsed = parse_bars(&bars);
                        if let Some(dir) = &self.cache_dir {
                            let path = self.cache_path(dir, symbol, range);
                            write_cache(&path, &parsed).map_err(SymbolError::Fatal)?;
                        }
                        return Ok(parsed);
                    }
                    last_err = format!("{symbol}: status {status}");
                }
                Err(e) => last_err = format!("{symbol}: {e}"),
            }
        }
        Err(SymbolError::Fatal(Error::Http(format!(
            "{last_err} after {} attempts",
            self.retries + 1
        ))))
    }

    fn cache_path(&self, dir: &Path, symbol: &str, range: DateRange) -> PathBuf {
        let mut hasher = Sha256::new();
        hasher.update(self.endpoint.as_bytes());
        hasher.update(symbol.as_bytes());
        hasher.update(range.from.format("%Y-%m-%d").to_string().as_bytes());
        hasher.update(range.to.format("%Y-%m-%d").to_string().as_bytes());
        let digest = hasher.finalize();
        let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        let safe: String = symbol
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        dir.join(format!("{safe}_{hex}.csv"))
    }
}

enum SymbolError {
    NotFound,
    Fatal(Error),
}

#[derive(Debug, Deserialize)]
struct EodBar {
    date: String,
    #[serde(default)]
    adjusted_close: Option<f64>,
}

fn parse_bars(bars: &[EodBar]) -> BTreeMap<NaiveDate, f64> {
    bars.iter()
        .filter_map(|bar| {
            let date = NaiveDate::parse_from_str(&bar.date, "%Y-%m-%d").ok()?;
            let close = bar.adjusted_close.filter(|v| v.is_finite())?;
            Some((date, close))
        })
        .collect()
}

fn read_cache(path: &Path) -> Result<BTreeMap<NaiveDate, f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for line in text.lines().skip(1) {
        let mut parts = line.splitn(2, ',');
        let (Some(d), Some(v)) = (parts.next(), parts.next()) else {
            continue;
        };
        if let (Ok(date), Ok(value)) = (NaiveDate::parse_from_str(d, "%Y-%m-%d"), v.parse::<f64>())
        {
            out.insert(date, value);
        }
    }
    Ok(out)
}

fn write_cache(path: &Path, bars: &BTreeMap<NaiveDate, f64>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = String::from("date,adjusted_close\n");
    for (date, value) in bars {
        text.push_str(&format!("{},{}\n", date.format("%Y-%m-%d"), value));
    }
    std::fs::write(path, text)?;
    Ok(())
}
