//! Return and volatility spillover analysis for multi-asset panels.
//!
//! The pipeline loads daily prices, builds log-return and rolling-volatility
//! panels, fits vector autoregressions, and decomposes forecast-error
//! variance into directional spillover measures. A small feed-forward
//! denoiser can be trained on rolling covariance windows and applied to the
//! VAR residual covariance before the decomposition, in both full-sample and
//! rolling-window analyses.

pub mod denoiser;
pub mod error;
pub mod fevd;
pub mod ingest;
pub mod rolling;
pub mod synthetic;
pub mod var;

pub use denoiser::{
    cov_windows, devectorize, gelu, layer_norm_forward, loss, loss_gradients, psd_project, train,
    vectorize, CovWindowSet, DenoiserConfig, DenoiserModel, Standardization, TrainConfig,
    TrainedDenoiser,
};
pub use error::{Error, Result};
pub use fevd::{
    build_table, directional, generalized_fevd, net, normalize, total_spillover, CovMatrix,
    DirectionalDivisor, NormalizedFevd, RawFevd, SpilloverTable,
};
pub use ingest::{
    align, describe, load_csv, log_returns, read_csv, rolling_volatility, CsvSchema, DateRange,
    EodClient, Panel, PricePanel, ReturnPanel, StatsTable, VolatilityPanel,
    DEFAULT_ANNUALIZATION,
};
pub use rolling::{
    compare_modes, run_rolling, run_static, window_count, AnalysisTarget, ModeComparison,
    RollingConfig, RollingSeries, SpilloverMode,
};
pub use var::{
    fit_var, is_stable, ma_coefficients, select_lag_aic, MaCoefficients, Stability, VarModel,
};
