use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use priokit_cli::{commands, CliError};

/// Prioritized input-output linearization toolkit.
#[derive(Parser)]
#[command(name = "priokit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prioritized LQ factorization of a stacked task Jacobian.
    Decompose {
        /// Whitespace-separated matrix file, one row per line.
        matrix: PathBuf,
        /// Task row counts, e.g. "2,1".
        #[arg(long)]
        dims: String,
        /// Rank tolerance "rel" or "rel,abs".
        #[arg(long)]
        tol: Option<String>,
    },
    /// Evaluate the prioritized linearizer at one state.
    Linearize {
        scenario: PathBuf,
        /// State "x0,x1,..."; defaults to the scenario's x0.
        #[arg(long)]
        state: Option<String>,
        /// Command vector "v1,..."; defaults to the tracking law at --time.
        #[arg(long)]
        v: Option<String>,
        /// Damping override "l1,l2,..." (use `inf` to disable a task).
        #[arg(long)]
        lambda: Option<String>,
        /// Time at which references are evaluated.
        #[arg(long, default_value_t = 0.0)]
        time: f64,
    },
    /// Run a closed-loop scenario and write trace.csv + summary.txt.
    Simulate {
        scenario: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Step-size override.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Gain certification, bound estimation and M-matrix feasibility.
    Analyze {
        scenario: PathBuf,
        /// Sample count override for the bound estimation.
        #[arg(long)]
        samples: Option<usize>,
        /// Bounds file overriding the sampled estimates.
        #[arg(long)]
        bounds: Option<PathBuf>,
        /// Trace CSV to fit tracking-error envelopes against.
        #[arg(long)]
        envelope: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Decompose { matrix, dims, tol } => {
            commands::cmd_decompose(&matrix, &dims, tol.as_deref())
        }
        Command::Linearize {
            scenario,
            state,
            v,
            lambda,
            time,
        } => commands::cmd_linearize(&scenario, state.as_deref(), v.as_deref(), lambda.as_deref(), time),
        Command::Simulate { scenario, out, dt } => commands::cmd_simulate(&scenario, &out, dt),
        Command::Analyze {
            scenario,
            samples,
            bounds,
            envelope,
        } => commands::cmd_analyze(&scenario, samples, bounds.as_deref(), envelope.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
