//! Command-line front end: configuration, experiment orchestration, CSV
//! output and the self-verification battery.

pub mod commands;
pub mod config;
pub mod format;
pub mod verify;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use config::{Method, ModeArg};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("incompatible options: {0}")]
    Incompatible(String),
    #[error("malformed CSV: {0}")]
    MalformedCsv(String),
    #[error("verification failed: {}", .0.join(", "))]
    VerifyFailed(Vec<String>),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Incompatible(_) => 3,
            CliError::MalformedCsv(_) => 4,
            CliError::VerifyFailed(_) | CliError::Runtime(_) => 1,
        }
    }
}

impl From<nmrb::Error> for CliError {
    fn from(e: nmrb::Error) -> Self {
        match e {
            nmrb::Error::DepthLimit { .. } | nmrb::Error::Unsupported(_) => CliError::Incompatible(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nmrb", version, about = "Randomized benchmarking of qubits coupled to a bosonic bath")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configured method.
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Overrides the configured decay mode.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitChoice {
    Exp,
    Powexp,
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    /// Flips the sign of the `𝕀/d` twirl coefficient inside the checks.
    TwirlSign,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Survival probability versus depth (`depth,value,stderr`).
    Decay(RunArgs),
    /// Trace-distance witness over random circuits (`circuit_id,depth,D,deltaD`).
    Witness(RunArgs),
    /// Bath photon statistics versus depth (`cutoff,depth,n_avg,n_var`).
    Photon(RunArgs),
    /// Fits a decay CSV and classifies it.
    Fit {
        /// CSV produced by `decay`.
        input: PathBuf,
        #[arg(long, value_enum, default_value = "compare")]
        model: FitChoice,
        /// Fixed offset; defaults to 1/d from the file's config header, else 1/2.
        #[arg(long)]
        offset: Option<f64>,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the cross-check battery.
    Verify {
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<Fault>,
    },
}

/// Environment variable overriding the worker-thread count.
pub const THREADS_ENV: &str = "NMRB_THREADS";

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Decay(args) => {
            let cfg = commands::resolve(&args)?;
            emit(args.out.as_ref(), &commands::decay(&cfg)?)
        }
        Command::Witness(args) => {
            let cfg = commands::resolve(&args)?;
            emit(args.out.as_ref(), &commands::witness(&cfg)?)
        }
        Command::Photon(args) => {
            let cfg = commands::resolve(&args)?;
            emit(args.out.as_ref(), &commands::photon(&cfg)?)
        }
        Command::Fit { input, model, offset, format, out } => {
            let text = std::fs::read_to_string(&input)
                .map_err(|e| CliError::MalformedCsv(format!("cannot read {}: {e}", input.display())))?;
            emit(out.as_ref(), &commands::fit(&text, model, offset, format)?)
        }
        Command::Verify { inject_fault } => {
            let report = verify::run_battery(inject_fault);
            print!("{}", report.render());
            let failed = report.failures();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::VerifyFailed(failed))
            }
        }
    }
}
