//! Run configuration: a single JSON document covering data source, panel
//! construction, model settings and outputs. Command-line flags override the
//! file; the resolved configuration is echoed into every output sidecar.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chrono::NaiveDate;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use spillover_core::{AnalysisTarget, DirectionalDivisor, Standardization};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Local CSV with a `date,SYM1,SYM2,...` header.
    Csv {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        date_column: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        columns: Option<Vec<String>>,
    },
    /// REST endpoint serving `GET /eod/<symbol>?from=..&to=..`. The API key
    /// comes from the `EOD_API_KEY` environment variable.
    Eod {
        endpoint: String,
        symbols: Vec<String>,
        from: NaiveDate,
        to: NaiveDate,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cache_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolatilitySection {
    /// Rolling window length for the volatility panel, in observations.
    pub window: usize,
    /// Multiplier applied to the rolling standard deviation; defaults to
    /// sqrt(252).
    pub annualization: Option<f64>,
}

impl Default for VolatilitySection {
    fn default() -> Self {
        VolatilitySection {
            window: 30,
            annualization: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarSection {
    pub lag: usize,
    /// When set, pick the lag in `1..=select_lag_max` by AIC instead of
    /// using `lag` directly.
    pub select_lag_max: Option<usize>,
    /// Divide the residual covariance by `T - N p - 1` instead of `T`.
    pub dof_adjust: bool,
    /// Fit volatility analyses on log levels instead of levels.
    pub log_volatility: bool,
}

impl Default for VarSection {
    fn default() -> Self {
        VarSection {
            lag: 1,
            select_lag_max: None,
            dof_adjust: true,
            log_volatility: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RollingSection {
    pub window: usize,
    pub step: usize,
    pub parallel: bool,
}

impl Default for RollingSection {
    fn default() -> Self {
        RollingSection {
            window: 200,
            step: 1,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiserSection {
    /// Hidden widths; defaults to a single bottleneck of 4N.
    pub hidden_dims: Option<Vec<usize>>,
    pub alpha: f64,
    pub eig_floor: f64,
    pub standardization: Standardization,
    pub lambda1: f64,
    pub lambda2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    pub early_stop_patience: usize,
    /// Window and step for the training covariance windows; default to the
    /// rolling section's values.
    pub cov_window: Option<usize>,
    pub cov_step: Option<usize>,
}

impl Default for DenoiserSection {
    fn default() -> Self {
        DenoiserSection {
            hidden_dims: None,
            alpha: 0.5,
            eig_floor: 1e-6,
            standardization: Standardization::Correlation,
            lambda1: 1.0,
            lambda2: 1.0,
            batch_size: 32,
            epochs: 200,
            learning_rate: 1e-3,
            momentum: 0.9,
            seed: 42,
            early_stop_patience: 20,
            cov_window: None,
            cov_step: None,
        }
    }
}

/// Which covariance feeds the spillover runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Traditional,
    Denoised,
    Both,
}

impl Mode {
    pub fn traditional(self) -> bool {
        matches!(self, Mode::Traditional | Mode::Both)
    }

    pub fn denoised(self) -> bool {
        matches!(self, Mode::Denoised | Mode::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DivisorChoice {
    #[default]
    RowSum,
    VariableCount,
}

impl From<DivisorChoice> for DirectionalDivisor {
    fn from(choice: DivisorChoice) -> Self {
        match choice {
            DivisorChoice::RowSum => DirectionalDivisor::RowSum,
            DivisorChoice::VariableCount => DirectionalDivisor::VariableCount,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    /// Display labels replacing raw column names or symbols, in order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default)]
    pub target: AnalysisTarget,
    #[serde(default)]
    pub volatility: VolatilitySection,
    #[serde(default)]
    pub var: VarSection,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub rolling: RollingSection,
    #[serde(default)]
    pub denoiser: DenoiserSection,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub directional_divisor: DivisorChoice,
    #[serde(default = "default_decimals")]
    pub decimals: usize,
    pub out_dir: PathBuf,
}

fn default_horizon() -> usize {
    10
}

fn default_decimals() -> usize {
    2
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse config {}", path.display()))?;
        Ok(config)
    }

    /// Apply command-line overrides.
    pub fn apply_overrides(
        &mut self,
        mode: Option<Mode>,
        out: Option<PathBuf>,
        seed: Option<u64>,
    ) {
        if let Some(mode) = mode {
            self.mode = mode;
        }
        if let Some(out) = out {
            self.out_dir = out;
        }
        if let Some(seed) = seed {
            self.denoiser.seed = seed;
        }
    }

    /// Reject values that would violate a downstream precondition before any
    /// computation starts.
    pub fn validate(&self) -> anyhow::Result<()> {
        match &self.data {
            DataSource::Csv { path, .. } => {
                if !path.exists() {
                    bail!("data.path {} does not exist", path.display());
                }
            }
            DataSource::Eod {
                symbols, from, to, ..
            } => {
                if symbols.is_empty() {
                    bail!("data.symbols must not be empty");
                }
                if from > to {
                    bail!("data.from {from} is after data.to {to}");
                }
            }
        }
        if self.horizon == 0 {
            bail!("horizon must be at least 1");
        }
        if self.volatility.window < 2 {
            bail!("volatility.window must be at least 2");
        }
        if let Some(f) = self.volatility.annualization {
            if !(f.is_finite() && f > 0.0) {
                bail!("volatility.annualization must be positive");
            }
        }
        if self.var.lag == 0 {
            bail!("var.lag must be at least 1");
        }
        if self.var.select_lag_max == Some(0) {
            bail!("var.select_lag_max must be at least 1 when set");
        }
        if self.rolling.window < 2 {
            bail!("rolling.window must be at least 2");
        }
        if self.rolling.step == 0 {
            bail!("rolling.step must be at least 1");
        }
        let d = &self.denoiser;
        if !(d.alpha > 0.0 && d.alpha <= 1.0) {
            bail!("denoiser.alpha must lie in (0, 1]");
        }
        if !(d.eig_floor > 0.0) {
            bail!("denoiser.eig_floor must be positive");
        }
        if !(d.lambda1 > 0.0 && d.lambda2 > 0.0) {
            bail!("denoiser.lambda1 and lambda2 must be positive");
        }
        if d.batch_size == 0 {
            bail!("denoiser.batch_size must be at least 1");
        }
        if !(d.learning_rate > 0.0 && d.learning_rate.is_finite()) {
            bail!("denoiser.learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&d.momentum) {
            bail!("denoiser.momentum must lie in [0, 1)");
        }
        if d.early_stop_patience == 0 {
            bail!("denoiser.early_stop_patience must be at least 1");
        }
        if let Some(dims) = &d.hidden_dims {
            if dims.is_empty() || dims.iter().any(|&w| w == 0) {
                bail!("denoiser.hidden_dims must be non-empty positive widths");
            }
        }
        if matches!(d.cov_window, Some(w) if w < 2) {
            bail!("denoiser.cov_window must be at least 2 when set");
        }
        if d.cov_step == Some(0) {
            bail!("denoiser.cov_step must be at least 1 when set");
        }
        if self.decimals > 12 {
            bail!("decimals must be at most 12");
        }
        Ok(())
    }

    pub fn annualization_factor(&self) -> f64 {
        self.volatility
            .annualization
            .unwrap_or(spillover_core::DEFAULT_ANNUALIZATION)
    }

    pub fn cov_window(&self) -> usize {
        self.denoiser.cov_window.unwrap_or(self.rolling.window)
    }

    pub fn cov_step(&self) -> usize {
        self.denoiser.cov_step.unwrap_or(self.rolling.step)
    }
}
