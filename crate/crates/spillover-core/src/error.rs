//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by panel ingestion, model fitting, decomposition, denoising
/// and rolling analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("http request failed: {0}")]
    Http(String),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("no usable rows in input")]
    NoUsableRows,

    #[error("duplicate date in panel: {0}")]
    DuplicateDate(chrono::NaiveDate),

    #[error("empty symbol list")]
    EmptySymbolList,

    #[error("api key is empty")]
    EmptyApiKey,

    #[error("all symbols failed to fetch: {0}")]
    AllSymbolsFailed(String),

    #[error("panel has {rows} rows after alignment, need at least {min}")]
    TooFewRows { rows: usize, min: usize },

    #[error("non-positive price for {asset} on {date}: {value}")]
    NonPositivePrice {
        asset: String,
        date: chrono::NaiveDate,
        value: f64,
    },

    #[error("panel contains missing or non-finite values; align it first")]
    NotAligned,

    #[error("rolling window must be at least 2, got {0}")]
    WindowTooShort(usize),

    #[error("rolling window {window} exceeds series length {rows}")]
    WindowTooLong { window: usize, rows: usize },

    #[error("panel is empty")]
    EmptyPanel,

    #[error("lag order must be at least 1")]
    InvalidLagOrder,

    #[error("not enough observations: need more than {required}, got {actual}")]
    InsufficientObservations { required: usize, actual: usize },

    #[error("degenerate panel: {0}")]
    DegeneratePanel(String),

    #[error("regressor Gram matrix is singular even after ridge fallback")]
    SingularGram,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("covariance matrix is not symmetric (max deviation {0:.3e})")]
    Asymmetric(f64),

    #[error("covariance diagonal entry {index} is not strictly positive")]
    NonPositiveDiagonal { index: usize },

    #[error("moving-average horizon {available} is shorter than requested {requested}")]
    HorizonTooShort { requested: usize, available: usize },

    #[error("forecast-error variance is zero for variable {index}")]
    DegenerateProcess { index: usize },

    #[error("row {index} of the decomposition sums to zero")]
    ZeroRowSum { index: usize },

    #[error("vector of length {0} is not a flattened square matrix")]
    NotPerfectSquare(usize),

    #[error("non-finite values in {0}")]
    NonFiniteInput(&'static str),

    #[error("non-finite activations in layer {layer}")]
    NonFiniteActivation { layer: usize },

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("not enough covariance windows: need at least {required}, got {actual}")]
    InsufficientWindows { required: usize, actual: usize },

    #[error("denoiser was built for {model} assets but the input has {input}")]
    ModelSizeMismatch { model: usize, input: usize },

    #[error("every rolling window failed: {0}")]
    AllWindowsFailed(String),

    #[error("denoised mode requested but no denoiser model was supplied")]
    MissingDenoiser,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("model persistence error: {0}")]
    Persistence(String),
}
