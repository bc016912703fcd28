//! `qlp`: quasi-local Penrose runs from a JSON config.
//!
//! Exit codes: 0 success, 1 a check or inequality failed, 2 usage or I/O
//! error, 3 scenario hypotheses not met.

mod commands;
mod config;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(String),
}

impl From<qlp_core::Error> for CliError {
    fn from(e: qlp_core::Error) -> Self {
        match e {
            qlp_core::Error::Io(_) | qlp_core::Error::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "qlp", version, about = "Quasi-local energy, unit-normal flows and Penrose-type bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for batch scenarios.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Grid as NθxNφ, e.g. 16x32.
    #[arg(long, global = true, value_parser = parse_resolution)]
    resolution: Option<(usize, usize)>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate ρ(r) and F for the reference.
    Profile,
    /// Run the unit-normal flow and write monitor series.
    Flow,
    /// Flow plus the u-equation and energy trace.
    Solve,
    /// Run the invariant suite.
    Verify {
        /// Deliberately corrupt a quantity to exercise the suite.
        #[arg(long, value_enum)]
        mutate: Option<verify::Mutation>,
    },
    /// Check the quasi-local Penrose inequality.
    Scenario,
    /// Condition-preservation constants.
    Constants,
}

fn parse_resolution(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected NxM, got `{s}`"))?;
    let n = a.trim().parse::<usize>().map_err(|e| e.to_string())?;
    let m = b.trim().parse::<usize>().map_err(|e| e.to_string())?;
    Ok((n, m))
}

pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub jobs: usize,
    pub resolution: (usize, usize),
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let path = cli.config.ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    let config = RunConfig::load(&path)?;
    let out = cli.out.unwrap_or_else(|| config.outputs.directory.clone());
    std::fs::create_dir_all(&out).map_err(|e| CliError::Usage(format!("{}: {e}", out.display())))?;
    let resolution = config.resolution(cli.resolution);
    let ctx = Context { config, out, jobs: cli.jobs.max(1), resolution };
    match cli.command {
        Command::Profile => commands::profile(&ctx),
        Command::Flow => commands::flow(&ctx),
        Command::Solve => commands::solve(&ctx),
        Command::Verify { mutate } => verify::run(&ctx, mutate),
        Command::Scenario => commands::scenario(&ctx),
        Command::Constants => commands::constants(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
