//! Command-line front end of the analysis pipeline: configuration loading,
//! stage orchestration, and output-file writing.

pub mod config;
pub mod pipeline;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{Overrides, RunConfig};

/// Analysis stage selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ingest,
    Distributions,
    Fit,
    Lmv,
    Predict,
    Synth,
    All,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration; the message names the offending field.
    Config(String),
    Io(String),
    Analysis(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Analysis(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Analysis(m) => write!(f, "analysis error: {m}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "volvol", about = "Volume-conditional volatility analysis of daily stock data")]
pub struct Cli {
    /// Flat `key = value` config file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: CliCommand,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Parse and validate the input universe.
    Ingest,
    /// Volume/volatility pdfs, conditional pdfs and the scaling collapse.
    Distributions,
    /// Maximum-likelihood tail fit of the conditional volatility model.
    Fit,
    /// Local-maximum-volatility curves and lagged correlations.
    Lmv,
    /// Quintile-conditioned extreme-day statistics and regression uplift.
    Predict,
    /// Generate a synthetic universe as ingest-format CSV files.
    Synth,
    /// Run every analysis stage in order.
    All,
}

impl CliCommand {
    fn as_command(&self) -> Command {
        match self {
            CliCommand::Ingest => Command::Ingest,
            CliCommand::Distributions => Command::Distributions,
            CliCommand::Fit => Command::Fit,
            CliCommand::Lmv => Command::Lmv,
            CliCommand::Predict => Command::Predict,
            CliCommand::Synth => Command::Synth,
            CliCommand::All => Command::All,
        }
    }
}

/// Resolve the configuration (defaults, then file, then flags) and run the
/// selected command. Returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    let command = cli.command.as_command();
    let result = resolve_config(cli, command).and_then(|cfg| pipeline::run(command, &cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn resolve_config(cli: &Cli, command: Command) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    cfg.apply_overrides(&cli.overrides)?;
    cfg.validate(command != Command::Synth)?;
    Ok(cfg)
}
