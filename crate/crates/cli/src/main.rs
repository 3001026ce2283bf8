//! `geomech` command-line front end.

mod config;
mod modes;
mod output;
mod systems;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Mode, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "geomech", version, about = "Simulate, reduce and check Lagrangian systems")]
struct Cli {
    #[arg(value_enum)]
    mode: Mode,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for relative output paths.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides `integration.dt`.
    #[arg(long)]
    dt: Option<f64>,
    /// Worker threads for independent checks.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
}

/// Failure classes, one per exit code.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numerical(String),
    Tolerance(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Tolerance(_) => 4,
        }
    }

    /// Sorts engine errors: bad input is a validation failure, anything
    /// raised while integrating or solving is numerical.
    pub fn engine(context: &str, e: geomech::Error) -> Self {
        use geomech::Error as E;
        let msg = format!("{context}: {e}");
        match e {
            E::Syntax { .. }
            | E::UnknownFunction { .. }
            | E::UnknownIdentifier { .. }
            | E::UnboundVariable(_)
            | E::Dimension(_)
            | E::Precondition(_)
            | E::InvarianceFailure(_) => Failure::Validation(msg),
            _ => Failure::Numerical(msg),
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (kind, msg) = match self {
            Failure::Validation(m) => ("validation error", m),
            Failure::Numerical(m) => ("numerical failure", m),
            Failure::Tolerance(m) => ("tolerance failure", m),
        };
        write!(f, "{kind}: {msg}")
    }
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var("GEOMECH_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Validation(format!("GEOMECH_SEED must be an unsigned integer, got `{s}`"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let config = RunConfig::load(&cli.config)?.effective(cli.mode, cli.dt, env_seed()?)?;
    modes::run(&config, &cli.out, usize::from(cli.jobs))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("geomech: {f}");
            ExitCode::from(f.code())
        }
    }
}
