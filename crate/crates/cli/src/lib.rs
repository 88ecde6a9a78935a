//! Command-line pipeline: ingest prices, backtest models, cross-validate, and
//! build comparison reports.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "oilsignal", version, about = "Trading-signal models and backtests for daily price series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON run configuration (flags override its values)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Price CSV path or http(s) URL
    #[arg(long, global = true)]
    pub source: Option<String>,

    /// Model name, comma-separated list, or `all`
    #[arg(long, global = true)]
    pub model: Option<String>,

    /// Master seed for every stochastic component
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory [default: $OILSIGNAL_OUT or ./out]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Fraction of rows used for training
    #[arg(long, global = true)]
    pub split: Option<f64>,

    /// Number of cross-validation folds
    #[arg(long, global = true)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Read, clean and store a price series
    Ingest,
    /// Train on the first block, trade the second, write reports
    Backtest,
    /// Ordered k-fold cross-validation
    Cv,
    /// Consolidate backtest outputs into comparison tables and plot series
    Report,
}

impl Cli {
    pub fn resolve(&self) -> Result<RunConfig> {
        let flags = Overrides {
            source: self.source.clone(),
            model: self.model.clone(),
            seed: self.seed,
            out: self.out.clone(),
            split: self.split,
            k: self.k,
        };
        RunConfig::resolve(self.config.as_deref(), flags)
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.resolve()?;
    match cli.command {
        Command::Ingest => {
            let r = commands::ingest(&cfg)?;
            eprintln!(
                "ingested {} rows ({} dropped), {} to {}",
                r.rows_written, r.rows_dropped, r.first_date, r.last_date
            );
        }
        Command::Backtest => {
            let s = commands::backtest(&cfg)?;
            eprintln!("backtest: {} of {} models succeeded", s.models.len() - s.failed(), s.models.len());
        }
        Command::Cv => {
            let s = commands::cv(&cfg)?;
            eprintln!("cv: {} of {} models succeeded", s.models.len() - s.failed(), s.models.len());
        }
        Command::Report => {
            let models = commands::report(&cfg)?;
            eprintln!("report: {} models", models.len());
        }
    }
    Ok(())
}
