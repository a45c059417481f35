//! Volume-conditional volatility analysis for daily stock data.
//!
//! The pipeline runs in stages, each backed by its own module:
//!
//! 1. [`ingest`]: parse and validate per-ticker daily CSV files.
//! 2. [`normalize`]: normalized volatility `g(t)` and detrended,
//!    standardized log-volume `v(t)`.
//! 3. [`distributions`]: histogram pdfs, volume-conditional pdfs and the
//!    `v + offset` scaling collapse.
//! 4. [`tailfit`]: maximum-likelihood fit of the volume-conditional tail
//!    model `P(g|v) ∝ g^{-ξ(v)} e^{-ς(v) g}` on `g ≥ g_min`.
//! 5. [`lmv`]: local maximum volatility over volume bins at arbitrary lags.
//! 6. [`predictor`]: quintile-conditioned extreme-day analysis and the
//!    next-day volatility regression uplift.
//! 7. [`synth`]: deterministic synthetic universes used to verify every
//!    estimator above.

pub mod distributions;
mod error;
pub mod ingest;
pub mod lmv;
pub mod normalize;
pub mod optim;
pub mod predictor;
pub mod special;
pub mod stats;
pub mod synth;
pub mod tailfit;

pub use error::{Error, Result};
pub use ingest::{DailyBar, StockSeries, ValidationReport};
pub use normalize::{DetrendFit, NormalizationStats, NormalizedSeries};
pub use tailfit::TailFitParams;
