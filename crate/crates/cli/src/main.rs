use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

use commands::Failure;

/// Remote-signal synthesis studies on linearized power-system models.
#[derive(Debug, Parser)]
#[command(name = "gridobs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenmodes, participation factors and loop-selection ranking.
    Modal(Common),
    /// Observer design, certificate and estimation-error simulation.
    Observer(ObserverArgs),
    /// Wide-area stabilizer tuning and open/closed-loop comparison.
    Closedloop(ClosedLoopArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Model file, or `builtin` for the two-area benchmark.
    #[arg(long, default_value = "builtin")]
    pub model: String,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Seed for randomized initial conditions.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct TimeArgs {
    #[arg(long = "t-end", default_value_t = gridobs::simulate::DEFAULT_T_END)]
    pub t_end: f64,
    #[arg(long, default_value_t = gridobs::simulate::DEFAULT_DT)]
    pub dt: f64,
    /// Disturbance pulse `T0,W,AMP`, or `off`.
    #[arg(long, default_value = "1,0.5,0.05")]
    pub pulse: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObserverKind {
    Luenberger,
    Uio,
}

#[derive(Debug, Clone, Args)]
pub struct ObserverArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub time: TimeArgs,
    #[arg(long, value_enum, default_value = "luenberger")]
    pub kind: ObserverKind,
    /// Minimum decay rate of the Luenberger design (1/s).
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    /// Norm of the seeded initial estimation error. Defaults to 0.01 for the
    /// Luenberger observer and 0 for the unknown-input observer.
    #[arg(long)]
    pub e0: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ClosedLoopArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub time: TimeArgs,
    /// Candidate gains `START,STEP,END`.
    #[arg(long = "k-grid", default_value = commands::DEFAULT_K_GRID)]
    pub k_grid: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Modal(args) => commands::modal(args),
        Command::Observer(args) => commands::observer(args),
        Command::Closedloop(args) => commands::closed_loop(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, message }) => {
            eprintln!("gridobs: {message}");
            ExitCode::from(code)
        }
    }
}
