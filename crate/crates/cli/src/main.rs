//! `paultrap`: field solve, multipole fit, Mathieu parameters, trajectory
//! spectra, equi-frequency traces and filament sweeps from one config file.
//!
//! ```text
//! paultrap [--config run.json] [--out DIR] [--threads N] [--section.field VALUE ...] <command>
//! ```
//!
//! Exit status: 0 success, 2 config error, 3 numeric failure, 4 instability,
//! 1 for I/O failures while writing outputs.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use paultrap::Error;

pub const EXIT_IO: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_UNSTABLE: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidParameter { .. } | Error::DegenerateGeometry(_) | Error::Format(_) => EXIT_CONFIG,
            Error::Unstable(_) | Error::Escaped { .. } => EXIT_UNSTABLE,
            Error::Io(_) => EXIT_IO,
            _ => EXIT_NUMERIC,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "paultrap", version, about = "Paul-trap secular frequencies with a filament perturbation")]
struct Cli {
    /// JSON run configuration; every field is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the basis potential, dump the grid and fit the multipole model.
    SolveField,
    /// Fit the multipole model to an existing PTGRID01 dump.
    Fit {
        #[arg(long)]
        grid: PathBuf,
    },
    /// Mathieu a, q, β and secular frequency per axis.
    Aq,
    /// Integrate one trajectory and extract secular frequencies.
    Simulate,
    /// Equi-frequency line: U_dc against V_rf at a fixed secular frequency.
    Trace,
    /// Axial frequency against filament height (full pipeline per height).
    Sweep,
}

/// Top-level config keys that take a scalar and so have no dotted form.
const SCALAR_KEYS: [&str; 2] = ["coefficients", "exec"];

fn is_override(name: &str) -> bool {
    name.contains('.') || SCALAR_KEYS.contains(&name)
}

/// Splits `--a.b VALUE` / `--a.b=VALUE` config overrides from the clap arguments.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), CliError> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let key = arg.strip_prefix("--").filter(|k| k.split('=').next().is_some_and(is_override));
        match key {
            Some(k) => match k.split_once('=') {
                Some((path, value)) => overrides.push((path.to_string(), value.to_string())),
                None => {
                    let value = it
                        .next()
                        .ok_or_else(|| CliError::config(format!("flag --{k} needs a value")))?;
                    overrides.push((k.to_string(), value));
                }
            },
            None => rest.push(arg),
        }
    }
    Ok((rest, overrides))
}

fn run() -> Result<(), CliError> {
    let (args, overrides) = split_overrides(std::env::args().collect())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            std::process::exit(code.into());
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("--threads: {e}")))?;
    }
    let cfg = config::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::SolveField => commands::solve_field(&cfg, &cli.out),
        Command::Fit { grid } => commands::fit(&cfg, &grid, &cli.out),
        Command::Aq => commands::aq(&cfg, &cli.out),
        Command::Simulate => commands::simulate(&cfg, &cli.out),
        Command::Trace => commands::trace(&cfg, &cli.out),
        Command::Sweep => commands::sweep(&cfg, &cli.out),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
