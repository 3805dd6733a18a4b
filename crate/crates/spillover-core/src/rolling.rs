//! Static and rolling spillover analysis: fit a VAR per window, optionally
//! denoise its residual covariance, decompose, and collect total and net
//! series stamped with each window's final date.

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::denoiser::DenoiserModel;
use crate::error::{Error, Result};
use crate::fevd::{
    build_table, generalized_fevd, normalize, DirectionalDivisor, SpilloverTable,
};
use crate::ingest::Panel;
use crate::var::{fit_var_with, is_stable, ma_coefficients, FitOptions, VarModel};

/// Which covariance feeds the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpilloverMode {
    Traditional,
    Denoised,
}

/// Which panel the analysis runs on; recorded in output metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisTarget {
    #[default]
    Returns,
    Volatility,
}

/// Window, lag and horizon settings for one analysis run.
#[derive(Debug, Clone)]
pub struct RollingConfig {
    pub window_length: usize,
    pub step: usize,
    pub var_lag: usize,
    pub horizon: usize,
    pub mode: SpilloverMode,
    pub target: AnalysisTarget,
    /// Evaluate windows concurrently; the output is identical either way.
    pub parallel: bool,
    pub divisor: DirectionalDivisor,
    /// Degrees-of-freedom correction for the residual covariance.
    pub dof_adjust: bool,
}

impl Default for RollingConfig {
    fn default() -> Self {
        RollingConfig {
            window_length: 200,
            step: 1,
            var_lag: 1,
            horizon: 10,
            mode: SpilloverMode::Traditional,
            target: AnalysisTarget::Returns,
            parallel: true,
            divisor: DirectionalDivisor::RowSum,
            dof_adjust: true,
        }
    }
}

/// Per-window diagnostic attached to gaps and degraded fits.
#[derive(Debug, Clone)]
pub struct WindowWarning {
    pub window: usize,
    pub date: NaiveDate,
    pub message: String,
}

/// Time series of spillover measures, one value per window end date. Failed
/// windows leave explicit gaps.
#[derive(Debug, Clone)]
pub struct RollingSeries {
    pub assets: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub total: Vec<Option<f64>>,
    /// Net spillover per asset, indexed `[asset][window]`.
    pub net: Vec<Vec<Option<f64>>>,
    pub warnings: Vec<WindowWarning>,
}

/// Traditional and denoised series over identical windows.
#[derive(Debug, Clone)]
pub struct ModeComparison {
    pub traditional: RollingSeries,
    pub denoised: RollingSeries,
}

/// Number of windows of length `window` advancing by `step` over `rows`
/// observations.
pub fn window_count(rows: usize, window: usize, step: usize) -> usize {
    if rows < window || step == 0 {
        0
    } else {
        (rows - window) / step + 1
    }
}

/// Full-sample spillover table.
pub fn run_static(
    panel: &Panel,
    config: &RollingConfig,
    model: Option<&DenoiserModel>,
) -> Result<SpilloverTable> {
    validate(panel, config, model, false)?;
    let fitted = fit_var_with(panel, config.var_lag, &fit_options(config))?;
    spillover_table(&fitted, config, model, config.mode)
}

/// Rolling spillover series. Windows that fail to fit are recorded as gaps
/// with a warning; the run fails only when every window fails.
pub fn run_rolling(
    panel: &Panel,
    config: &RollingConfig,
    model: Option<&DenoiserModel>,
) -> Result<RollingSeries> {
    validate(panel, config, model, true)?;
    let outcomes = evaluate_windows(panel, config, |window_panel| {
        let fitted = fit_var_with(window_panel, config.var_lag, &fit_options(config))?;
        let table = spillover_table(&fitted, config, model, config.mode)?;
        Ok((fit_warnings(&fitted), vec![table]))
    })?;
    let (series, failures) = assemble(panel, config, outcomes, 0);
    if series.total.iter().all(|v| v.is_none()) {
        return Err(Error::AllWindowsFailed(failures));
    }
    Ok(series)
}

/// Run traditional and denoised modes over identical windows, sharing each
/// window's VAR fit.
pub fn compare_modes(
    panel: &Panel,
    config: &RollingConfig,
    model: &DenoiserModel,
) -> Result<ModeComparison> {
    validate(panel, config, Some(model), true)?;
    let outcomes = evaluate_windows(panel, config, |window_panel| {
        let fitted = fit_var_with(window_panel, config.var_lag, &fit_options(config))?;
        let traditional = spillover_table(&fitted, config, None, SpilloverMode::Traditional)?;
        let denoised = spillover_table(&fitted, config, Some(model), SpilloverMode::Denoised)?;
        Ok((fit_warnings(&fitted), vec![traditional, denoised]))
    })?;
    let denoised_outcomes: Vec<WindowOutcome> = outcomes
        .iter()
        .map(|o| match o {
            Ok((w, tables)) => Ok((w.clone(), tables[1..].to_vec())),
            Err(e) => Err(e.clone()),
        })
        .collect();
    let (traditional, fail_a) = assemble(panel, config, outcomes, 0);
    let (denoised, _) = assemble(panel, config, denoised_outcomes, 0);
    if traditional.total.iter().all(|v| v.is_none()) {
        return Err(Error::AllWindowsFailed(fail_a));
    }
    Ok(ModeComparison {
        traditional,
        denoised,
    })
}

type WindowOutcome = std::result::Result<(Vec<String>, Vec<SpilloverTable>), String>;

fn evaluate_windows<F>(panel: &Panel, config: &RollingConfig, eval: F) -> Result<Vec<WindowOutcome>>
where
    F: Fn(&Panel) -> Result<(Vec<String>, Vec<SpilloverTable>)> + Sync,
{
    let count = window_count(panel.n_rows(), config.window_length, config.step);
    let run_one = |w: usize| -> WindowOutcome {
        let window_panel = slice_panel(panel, w * config.step, config.window_length);
        eval(&window_panel).map_err(|e| e.to_string())
    };
    let outcomes: Vec<WindowOutcome> = if config.parallel {
        (0..count).into_par_iter().map(run_one).collect()
    } else {
        (0..count).map(run_one).collect()
    };
    Ok(outcomes)
}

fn slice_panel(panel: &Panel, start: usize, len: usize) -> Panel {
    Panel::new(
        panel.dates()[start..start + len].to_vec(),
        panel.assets().to_vec(),
        panel.values().rows(start, len).into_owned(),
    )
    .expect("window of a valid panel is a valid panel")
}

fn assemble(
    panel: &Panel,
    config: &RollingConfig,
    outcomes: Vec<WindowOutcome>,
    table_index: usize,
) -> (RollingSeries, String) {
    let n = panel.n_assets();
    let count = outcomes.len();
    let mut dates = Vec::with_capacity(count);
    let mut total = Vec::with_capacity(count);
    let mut net = vec![Vec::with_capacity(count); n];
    let mut warnings = Vec::new();
    let mut first_failure = String::new();
    for (w, outcome) in outcomes.into_iter().enumerate() {
        let end_date = panel.dates()[w * config.step + config.window_length - 1];
        dates.push(end_date);
        match outcome {
            Ok((fit_warnings, tables)) => {
                let table = &tables[table_index];
                total.push(Some(table.total_index));
                for (a, series) in net.iter_mut().enumerate() {
                    series.push(Some(table.net[a]));
                }
                for message in fit_warnings {
                    warnings.push(WindowWarning {
                        window: w,
                        date: end_date,
                        message,
                    });
                }
            }
            Err(message) => {
                if first_failure.is_empty() {
                    first_failure = message.clone();
                }
                total.push(None);
                for series in net.iter_mut() {
                    series.push(None);
                }
                warnings.push(WindowWarning {
                    window: w,
                    date: end_date,
                    message,
                });
            }
        }
    }
    (
        RollingSeries {
            assets: panel.assets().to_vec(),
            dates,
            total,
            net,
            warnings,
        },
        first_failure,
    )
}

fn fit_options(config: &RollingConfig) -> FitOptions {
    FitOptions {
        dof_adjust: config.dof_adjust,
    }
}

fn fit_warnings(model: &VarModel) -> Vec<String> {
    let mut warnings = model.warnings.clone();
    let stability = is_stable(model);
    if !stability.stable {
        warnings.push(format!(
            "window VAR is not stationary (spectral radius {:.6})",
            stability.spectral_radius
        ));
    }
    warnings
}

fn spillover_table(
    fitted: &VarModel,
    config: &RollingConfig,
    model: Option<&DenoiserModel>,
    mode: SpilloverMode,
) -> Result<SpilloverTable> {
    let sigma = fitted.residual_cov_matrix()?;
    let sigma = match mode {
        SpilloverMode::Traditional => sigma,
        SpilloverMode::Denoised => model.ok_or(Error::MissingDenoiser)?.denoise(&sigma)?,
    };
    let ma = ma_coefficients(fitted, config.horizon);
    let raw = generalized_fevd(&ma, &sigma, config.horizon)?;
    let norm = normalize(&raw)?;
    build_table(&norm, &fitted.asset_names, config.divisor)
}

fn validate(
    panel: &Panel,
    config: &RollingConfig,
    model: Option<&DenoiserModel>,
    rolling: bool,
) -> Result<()> {
    let n = panel.n_assets();
    if config.step == 0 {
        return Err(Error::InvalidConfig("step must be at least 1".into()));
    }
    if config.var_lag == 0 {
        return Err(Error::InvalidLagOrder);
    }
    if config.horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    let min_window = n * config.var_lag + config.var_lag + 1;
    if rolling {
        if config.window_length <= min_window {
            return Err(Error::InvalidConfig(format!(
                "window length {} must exceed {min_window} for {n} variables at lag {}",
                config.window_length, config.var_lag
            )));
        }
        if panel.n_rows() < config.window_length {
            return Err(Error::WindowTooLong {
                window: config.window_length,
                rows: panel.n_rows(),
            });
        }
    }
    if config.mode == SpilloverMode::Denoised {
        let model = model.ok_or(Error::MissingDenoiser)?;
        if model.n_assets() != n {
            return Err(Error::ModelSizeMismatch {
                model: model.n_assets(),
                input: n,
            });
        }
    }
    Ok(())
}

impl RollingSeries {
    /// Number of windows.
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Long-format CSV `date,series,value` with `total` and one `net:<asset>`
    /// series per asset. Gaps render as empty values.
    pub fn to_long_csv(&self) -> String {
        let mut out = String::from("date,series,value\n");
        for (w, date) in self.dates.iter().enumerate() {
            let stamp = date.format("%Y-%m-%d");
            match self.total[w] {
                Some(v) => out.push_str(&format!("{stamp},total,{v}\n")),
                None => out.push_str(&format!("{stamp},total,\n")),
            }
            for (a, asset) in self.assets.iter().enumerate() {
                match self.net[a][w] {
                    Some(v) => out.push_str(&format!("{stamp},net:{asset},{v}\n")),
                    None => out.push_str(&format!("{stamp},net:{asset},\n")),
                }
            }
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_long_csv())?;
        Ok(())
    }
}
