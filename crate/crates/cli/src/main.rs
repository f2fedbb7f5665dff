//! `valuation-lab` command-line interface.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use crate::config::Config;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Ingest,
    Fit,
    Diagnose,
    Predict,
    Ruin,
    Portfolio,
    Ctsim,
    Report,
}

/// Valuation measures, AR(1) fits, ruin simulation and continuous-time models.
#[derive(Debug, Parser)]
#[command(name = "valuation-lab", version)]
pub struct Args {
    /// Analysis to run.
    #[arg(long, value_enum)]
    pub command: Command,
    /// Market CSV (`year,price,dividend,earnings,cpi`); the bundled 1871-2020 file when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Master seed for every simulation.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON overrides, inline or as a path to a JSON file.
    #[arg(long)]
    pub config: Option<String>,
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn input(kind: &str, message: impl Into<String>) -> Self {
        Self { code: 2, kind: kind.into(), message: message.into() }
    }
}

impl From<valuation_lab::Error> for CliError {
    fn from(e: valuation_lab::Error) -> Self {
        Self { code: if e.is_input_error() { 2 } else { 3 }, kind: e.kind().into(), message: e.to_string() }
    }
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("VALUATION_LAB_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::input("InvalidParameter", format!("VALUATION_LAB_THREADS must be an integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::input("InvalidParameter", e.to_string()))?;
    }
    Ok(())
}

fn run(args: &Args) -> Result<(), CliError> {
    init_threads()?;
    let config = Config::load(args.config.as_deref())?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::input("OutputNotWritable", format!("{}: {e}", args.out.display())))?;
    commands::dispatch(args, &config)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e.kind, "message": e.message, "exit_code": e.code });
            eprintln!("{body}");
            ExitCode::from(e.code)
        }
    }
}
