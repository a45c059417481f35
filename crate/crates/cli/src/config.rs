//! Run configuration: defaults, the flat `key = value` config file, and
//! command-line overrides. Precedence is defaults < file < flags.

use std::path::{Path, PathBuf};

use clap::Args;
use volvol::predictor::QuintileMode;
use volvol::synth::Scenario;

use crate::CliError;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Number of linear volume bins on [-3, 3].
    pub volume_bins: usize,
    pub g_min: f64,
    pub collapse_offset: f64,
    pub extreme_fraction: f64,
    pub max_lag: usize,
    pub quintile_mode: QuintileMode,
    pub seed: u64,
    pub synth_scenario: Option<Scenario>,
    pub synth_days: usize,
    pub synth_tickers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input_dir: None,
            output_dir: PathBuf::from("out"),
            volume_bins: 30,
            g_min: 0.1,
            collapse_offset: 4.5,
            extreme_fraction: 0.01,
            max_lag: 16,
            quintile_mode: QuintileMode::PerStock,
            seed: 0,
            synth_scenario: None,
            synth_days: 4000,
            synth_tickers: 10,
        }
    }
}

/// Command-line flags; every one of them shadows a config-file key.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Directory of per-ticker daily CSV files (date,close,volume).
    #[arg(long, global = true)]
    pub input_dir: Option<PathBuf>,
    /// Directory for all output files.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Lower volatility cutoff of the tail fit.
    #[arg(long, global = true)]
    pub g_min: Option<f64>,
    /// Offset of the scaling collapse rescaling g / (v + offset).
    #[arg(long, global = true)]
    pub offset: Option<f64>,
    /// Number of linear volume bins on [-3, 3].
    #[arg(long, global = true)]
    pub bins: Option<usize>,
    /// Extreme-day fraction per ticker.
    #[arg(long, global = true)]
    pub fraction: Option<f64>,
    /// Largest volume-to-volatility lag, in days.
    #[arg(long, global = true)]
    pub max_lag: Option<usize>,
    /// Joint-grid quintile boundaries: per-stock or pooled.
    #[arg(long, global = true)]
    pub quintile_mode: Option<String>,
    /// Seed of the synthetic generator.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Synthetic scenario: model, iid, collapse, monotone-envelope,
    /// injected-dependence.
    #[arg(long, global = true)]
    pub synth_scenario: Option<String>,
    /// Days per synthetic ticker.
    #[arg(long, global = true)]
    pub synth_days: Option<usize>,
    /// Number of synthetic tickers.
    #[arg(long, global = true)]
    pub synth_tickers: Option<usize>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_field<T: std::str::FromStr>(field: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| config_err(format!("{field}: cannot parse '{value}': {e}")))
}

impl RunConfig {
    /// Apply a flat `key = value` file. Unknown keys are errors; `#` starts
    /// a comment line.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("config: cannot read '{}': {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(config_err(format!(
                    "config: line {} is not 'key = value': '{raw}'",
                    lineno + 1
                )));
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "input_dir" => self.input_dir = Some(PathBuf::from(value)),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "bins" => self.volume_bins = parse_field(key, value)?,
            "g_min" => self.g_min = parse_field(key, value)?,
            "offset" => self.collapse_offset = parse_field(key, value)?,
            "fraction" => self.extreme_fraction = parse_field(key, value)?,
            "max_lag" => self.max_lag = parse_field(key, value)?,
            "quintile_mode" => {
                self.quintile_mode = value.parse().map_err(|e| config_err(format!("quintile_mode: {e}")))?
            }
            "seed" => self.seed = parse_field(key, value)?,
            "synth_scenario" => {
                self.synth_scenario =
                    Some(value.parse().map_err(|e| config_err(format!("synth_scenario: {e}")))?)
            }
            "synth_days" => self.synth_days = parse_field(key, value)?,
            "synth_tickers" => self.synth_tickers = parse_field(key, value)?,
            other => return Err(config_err(format!("config: unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn apply_overrides(&mut self, ov: &Overrides) -> Result<(), CliError> {
        if let Some(d) = &ov.input_dir {
            self.input_dir = Some(d.clone());
        }
        if let Some(d) = &ov.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(x) = ov.g_min {
            self.g_min = x;
        }
        if let Some(x) = ov.offset {
            self.collapse_offset = x;
        }
        if let Some(x) = ov.bins {
            self.volume_bins = x;
        }
        if let Some(x) = ov.fraction {
            self.extreme_fraction = x;
        }
        if let Some(x) = ov.max_lag {
            self.max_lag = x;
        }
        if let Some(s) = &ov.quintile_mode {
            self.quintile_mode = s.parse().map_err(|e| config_err(format!("quintile_mode: {e}")))?;
        }
        if let Some(x) = ov.seed {
            self.seed = x;
        }
        if let Some(s) = &ov.synth_scenario {
            self.synth_scenario =
                Some(s.parse().map_err(|e| config_err(format!("synth_scenario: {e}")))?);
        }
        if let Some(x) = ov.synth_days {
            self.synth_days = x;
        }
        if let Some(x) = ov.synth_tickers {
            self.synth_tickers = x;
        }
        Ok(())
    }

    /// Validate ranges and the data-source rule. `needs_data` is false for
    /// the synth command, which generates its own universe.
    pub fn validate(&self, needs_data: bool) -> Result<(), CliError> {
        if !(self.g_min > 0.0 && self.g_min.is_finite()) {
            return Err(config_err(format!("g_min: must be > 0, got {}", self.g_min)));
        }
        if !self.collapse_offset.is_finite() {
            return Err(config_err("offset: must be finite".to_string()));
        }
        if !(2..=1000).contains(&self.volume_bins) {
            return Err(config_err(format!("bins: must be in 2..=1000, got {}", self.volume_bins)));
        }
        if !(self.extreme_fraction > 0.0 && self.extreme_fraction <= 0.5) {
            return Err(config_err(format!(
                "fraction: must be in (0, 0.5], got {}",
                self.extreme_fraction
            )));
        }
        if self.max_lag > 1000 {
            return Err(config_err(format!("max_lag: must be <= 1000, got {}", self.max_lag)));
        }
        if self.synth_days < 2 {
            return Err(config_err(format!("synth_days: must be >= 2, got {}", self.synth_days)));
        }
        if self.synth_tickers == 0 {
            return Err(config_err("synth_tickers: must be >= 1".to_string()));
        }
        if self.input_dir.is_some() && self.synth_scenario.is_some() {
            return Err(config_err(
                "input_dir: set either input_dir or synth_scenario, not both".to_string(),
            ));
        }
        if needs_data && self.input_dir.is_none() && self.synth_scenario.is_none() {
            return Err(config_err(
                "input_dir: missing; set input_dir or synth_scenario".to_string(),
            ));
        }
        if let Some(dir) = &self.input_dir {
            if !dir.is_dir() {
                return Err(config_err(format!(
                    "input_dir: '{}' is not a directory",
                    dir.display()
                )));
            }
        }
        Ok(())
    }

    /// Scenario to generate when no input directory is given; the synth
    /// command defaults to the model scenario.
    pub fn effective_scenario(&self) -> Scenario {
        self.synth_scenario.unwrap_or(Scenario::Model)
    }
}
