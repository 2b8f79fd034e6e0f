mod commands;
mod plugin;
mod scenario;
mod svg;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sdtdg_core::GameError;

use crate::commands::FieldArgs;
use crate::scenario::ScenarioArgs;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  invalid configuration or arguments
  3  numerical or geometric failure
  4  external strategy plugin failure

Set SDTDG_THREADS to cap the number of worker threads.";

#[derive(Debug, Parser)]
#[command(name = "sdtdg", version, about = "Slow-defender target-defence game solver", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dominance regions of the two players.
    Oval(ScenarioArgs),
    /// Closed barrier around the attacker's winning region.
    Barrier(ScenarioArgs),
    /// Play the game with the chosen strategies.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Overlay the barrier of the initial defender position.
        #[arg(long)]
        with_barrier: bool,
    },
    /// Values of constrained-phase trajectories over a (rho_D, theta) lattice.
    Phase2Field {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        field: FieldArgs,
    },
    /// Winning side of a state under optimal play.
    Classify(ScenarioArgs),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("strategy plugin failure: {0}")]
    Plugin(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Plugin(_) => 4,
        }
    }
}

impl From<GameError> for CliError {
    fn from(e: GameError) -> Self {
        match e {
            GameError::InvalidConfig(m) => CliError::Config(m),
            GameError::Strategy(m) => CliError::Plugin(m),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("cannot write output: {e}"))
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SDTDG_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("SDTDG_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Oval(args) => commands::oval(&args.resolve()?),
        Command::Barrier(args) => commands::barrier(&args.resolve()?),
        Command::Simulate { scenario, with_barrier } => commands::simulate(&scenario.resolve()?, with_barrier),
        Command::Phase2Field { scenario, field } => commands::phase2_field(&scenario.resolve()?, &field),
        Command::Classify(args) => commands::classify(&args.resolve()?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
