//! The `hrw` command-line tool: experiment configs in, CSV tables and JSON
//! sidecars out.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Read;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hierwalk::stepdist::LawSpec;

use config::{ExperimentConfig, Grid, MRange, ProcessKind, StatisticKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad or inconsistent configuration.
    Config(String),
    /// A computation failed or an output could not be written.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Failure(_) => EXIT_NUMERIC,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Failure(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<hierwalk::Error> for CliError {
    fn from(e: hierwalk::Error) -> Self {
        use hierwalk::Error::*;
        match e {
            InvalidParameter(_) | KappaOutOfRange { .. } | OrderMismatch(..) | CriticalRegime | MissingRatioLimit(_) => {
                CliError::Config(e.to_string())
            }
            Overflow(_) | ShellTruncation { .. } | NotPositiveSemidefinite { .. } | MonotonicityViolation { .. } => {
                CliError::Failure(e.to_string())
            }
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hrw", version, about = "Hierarchical random walk experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Walk parameters and tables of r_j, h(j), f_j.
    Walkinfo,
    /// Law of |ξ_n|, optionally against the dynamic-programming oracle.
    Radial,
    /// Var N_n(L) over L = 0..=L and its limit.
    VarianceScan,
    /// Finite-n covariance against its limit along a subsequence n_i.
    FluctCov,
    /// g_κ table with scaling and long-range-dependence diagnostics.
    Gkappa,
    /// Replica runs of the particle system against exact values.
    Simulate,
    /// Sample paths of the Gaussian limit processes.
    SampleLimit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Walkinfo => "walkinfo",
            Command::Radial => "radial",
            Command::VarianceScan => "variance-scan",
            Command::FluctCov => "fluct-cov",
            Command::Gkappa => "gkappa",
            Command::Simulate => "simulate",
            Command::SampleLimit => "sample-limit",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON config file, or `-` for stdin.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Step law as JSON, e.g. '{"family":"crw","M":2,"c":1.0}'.
    #[arg(long, global = true, value_parser = parse_law)]
    pub law: Option<LawSpec>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// CSV destination; the sidecar goes to `<out>.json`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub n: Option<u64>,
    #[arg(long = "L", global = true)]
    pub radius: Option<u64>,
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
    /// Time grid: `1,2,4` or `a^{-m}, m=0..3`.
    #[arg(long, global = true)]
    pub grid: Option<Grid>,
    #[arg(long = "m-range", global = true, allow_hyphen_values = true)]
    pub m_range: Option<MRange>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Compare with the dynamic-programming oracle (radial).
    #[arg(long, global = true)]
    pub oracle: bool,
    #[arg(long, global = true, value_enum)]
    pub statistic: Option<StatisticKind>,
    #[arg(long, global = true, value_enum)]
    pub process: Option<ProcessKind>,
    #[arg(long, global = true)]
    pub scale: Option<f64>,
}

fn parse_law(s: &str) -> Result<LawSpec, String> {
    serde_json::from_str(s).map_err(|e| e.to_string())
}

impl Flags {
    fn as_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            law: self.law.clone(),
            seed: self.seed,
            out: self.out.clone(),
            replicas: self.replicas,
            tol: self.tol,
            n: self.n,
            radius: self.radius,
            kappa: self.kappa,
            grid: self.grid.clone(),
            m_range: self.m_range,
            lambda: self.lambda,
            shift: None,
            oracle: self.oracle.then_some(true),
            statistic: self.statistic,
            process: self.process,
            scale: self.scale,
        }
    }
}

/// Reads the config file (if any) and lays the flags over it.
pub fn effective_config(flags: &Flags) -> Result<ExperimentConfig, CliError> {
    let base = match &flags.config {
        None => ExperimentConfig::default(),
        Some(path) => {
            let text = if path.as_os_str() == "-" {
                let mut s = String::new();
                std::io::stdin()
                    .read_to_string(&mut s)
                    .map_err(|e| CliError::Config(format!("reading stdin: {e}")))?;
                s
            } else {
                std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?
            };
            serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?
        }
    };
    Ok(base.overlay(flags.as_config()))
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("HRW_THREADS") else {
        return Ok(());
    };
    let threads: usize = v
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Config(format!("HRW_THREADS must be a positive integer, got `{v}`")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Parses `args` and runs the command; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = configure_threads()
        .and_then(|_| effective_config(&cli.flags))
        .and_then(|cfg| commands::execute(cli.command, &cfg));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
