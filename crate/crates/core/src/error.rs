use chrono::NaiveDate;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by all analysis stages.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("duplicate date {date} in series {ticker}")]
    DuplicateDate { ticker: String, date: NaiveDate },
    #[error("no input series in {0}")]
    NoInputSeries(String),
    #[error("invalid price: {0}")]
    InvalidPrice(String),
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),
    #[error("empty histogram: no samples in [{lo}, {hi})")]
    EmptyHistogram { lo: f64, hi: f64 },
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("insufficient conditional data: no volume bin reaches min_count {min_count}")]
    InsufficientConditionalData { min_count: usize },
    #[error("offset too small: minimum admissible offset is {min_offset}")]
    OffsetTooSmall { min_offset: f64 },
    #[error("rate non-positive at v = {v}")]
    RateNonPositive { v: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no tail samples: fewer than {min} samples with g >= g_min = {g_min}")]
    NoTailSamples { min: usize, g_min: f64 },
    #[error("infeasible initialization: {0}")]
    InfeasibleInit(String),
    #[error("no data in volume range [{lo}, {hi})")]
    NoDataInVolumeRange { lo: f64, hi: f64 },
    #[error("insufficient LMV points: {occupied} occupied bins, need at least 3")]
    InsufficientLmvPoints { occupied: usize },
    #[error("insufficient data for fraction {fraction} with {n} days")]
    InsufficientDataForFraction { fraction: f64, n: usize },
    #[error("invalid binning: {0}")]
    InvalidBinning(String),
    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
