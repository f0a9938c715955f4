//! Command-line experiment runner: config in, CSV tables and a JSON manifest out.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 config error, 3 hypothesis or
//! precondition violation, 4 numerical diagnostic.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0)` also rejects NaN

pub mod config;
pub mod manifest;
pub mod run;
pub mod table;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use holorenorm::ErrorClass;

pub use config::{parse_config, parse_config_str, ExperimentConfig, Mode};
pub use manifest::RunManifest;
pub use run::{run, RunOutput};
pub use table::Table;

#[derive(Debug, Clone, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Library(#[from] holorenorm::Error),
    /// The run finished but its headline error exceeds the tolerance.
    #[error("tolerance exceeded: {0}")]
    Tolerance(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Library(e) => match e.class() {
                ErrorClass::Precondition => 3,
                ErrorClass::Numerical => 4,
            },
            CliError::Tolerance(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            1 => "io",
            2 => "config",
            3 => "precondition",
            _ => "numerical",
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "holorenorm", version, about = "Renormalization experiments for elementary maps of C^2")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form iterates F^n
    Iterate(RunArgs),
    /// Renormalized compositions F^n ∘ F_N^{-n}
    Renorm(RunArgs),
    /// Coefficients of the entire limit ψ
    Limit(RunArgs),
    /// Convergence table (n, sup_error)
    Scan(RunArgs),
    /// Rescaling extraction for a non-normal family
    Zalcman(RunArgs),
    /// Linear renormalization coefficients of the foreword map
    Counterexample(RunArgs),
    /// Elementary correspondence with an algebraic part
    Correspondence(RunArgs),
    /// Conjugation on the repelling basin and the pushed family
    Basin(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Seed for the randomized cross-checks; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Headline error threshold; overrides the config.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

impl Command {
    pub fn split(&self) -> (Mode, &RunArgs) {
        match self {
            Command::Iterate(a) => (Mode::Iterate, a),
            Command::Renorm(a) => (Mode::Renorm, a),
            Command::Limit(a) => (Mode::Limit, a),
            Command::Scan(a) => (Mode::Scan, a),
            Command::Zalcman(a) => (Mode::Zalcman, a),
            Command::Counterexample(a) => (Mode::Counterexample, a),
            Command::Correspondence(a) => (Mode::Correspondence, a),
            Command::Basin(a) => (Mode::Basin, a),
        }
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
/// Errors are reported on stderr and, once the output directory is known, in
/// the manifest.
pub fn execute<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (mode, args) = cli.command.split();
    let started = chrono::Utc::now();
    let parsed = parse_config(&args.config, Some(mode)).and_then(|mut cfg| {
        if let Some(seed) = args.seed {
            cfg.seed = seed;
            cfg.echo.seed = Some(seed);
        }
        if let Some(t) = args.tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Config("--tolerance: must be positive and finite".into()));
            }
            cfg.tolerance = Some(t);
            cfg.echo.tolerance = Some(t);
        }
        Ok(cfg)
    });
    let result = match &parsed {
        Ok(cfg) => run(cfg)
            .and_then(|output| output.check_tolerance(cfg.tolerance).map(|_| output))
            .and_then(|output| manifest::write_success(&args.out, cfg, &output, started))
            .inspect_err(|err| {
                let _ = manifest::write_failure(&args.out, mode, Some(&cfg.echo), err, started);
            }),
        Err(err) => {
            let _ = manifest::write_failure(&args.out, mode, None, err, started);
            Err(err.clone())
        }
    };
    match result {
        Ok(_) => 0,
        Err(err) => {
            eprintln!("holorenorm {mode}: {err}");
            err.exit_code()
        }
    }
}
