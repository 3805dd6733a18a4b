//! Loading, aligning and transforming raw daily price data into return and
//! volatility panels, plus descriptive statistics.

mod csv_io;
mod eod;
mod panel;
mod stats;

pub use csv_io::{load_csv, panel_to_csv_string, read_csv, write_panel_csv, CsvSchema};
pub use eod::{DateRange, EodClient, FetchedPanel};
pub use panel::{
    align, log_returns, rolling_volatility, Panel, PricePanel, ReturnPanel, VolatilityPanel,
    DEFAULT_ANNUALIZATION,
};
pub use stats::{describe, StatsRow, StatsTable};
