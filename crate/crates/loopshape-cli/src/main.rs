//! Command-line front end: reproducible A/B encodes, gain analysis over
//! their CSV outputs, and reference-table generation.
//!
//! Exit codes: 0 success, 2 configuration error (including flag misuse),
//! 3 I/O error, 4 numerical/analysis error. Set LOOPSHAPE_WORKERS to cap
//! the worker pool; the default uses every core.

// Validation guards are written `!(x > 0.0)` so NaN fails them; the
// comparison clippy suggests would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

mod cmd_analyze;
mod cmd_encode;
mod cmd_oracle;
mod config;
mod tables;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Analysis(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Analysis(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config: {msg}"),
            CliError::Io(msg) => write!(f, "io: {msg}"),
            CliError::Analysis(msg) => write!(f, "analysis: {msg}"),
        }
    }
}

pub type CResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "loopshape",
    version,
    about = "In-loop reshaping codec harness: A/B encodes, gain analysis, reference tables"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Subcommand)]
enum Cmd {
    /// Encode the configured input in both reshaper arms across the QP list
    Encode {
        /// key=value config file; flags override its values
        #[arg(long)]
        config: Option<std::path::PathBuf>,
        #[command(flatten)]
        overrides: config::ConfigOverrides,
    },
    /// Compute gain reports from an encode run's CSV outputs
    Analyze(cmd_analyze::AnalyzeArgs),
    /// Emit reference tables (closed-form and Monte-Carlo)
    Oracle {
        #[command(subcommand)]
        which: cmd_oracle::OracleCmd,
    },
}

fn init_workers() -> CResult<()> {
    if let Ok(raw) = std::env::var("LOOPSHAPE_WORKERS") {
        let n: usize = raw
            .parse()
            .map_err(|_| CliError::Config(format!("LOOPSHAPE_WORKERS={raw:?} is not a count")))?;
        if n == 0 {
            return Err(CliError::Config("LOOPSHAPE_WORKERS must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CResult<()> {
    match cli.cmd {
        Cmd::Encode { config: config_path, overrides } => {
            let mut cfg = config::RunConfig::default();
            if let Some(path) = &config_path {
                config::load_config_file(path, &mut cfg)?;
            }
            overrides.apply(&mut cfg)?;
            cmd_encode::run(&cfg)
        }
        Cmd::Analyze(args) => cmd_analyze::run(&args),
        Cmd::Oracle { which } => cmd_oracle::run(&which),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = init_workers().and_then(|()| run(cli));
    match status {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
