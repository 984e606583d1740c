use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use randopt_cli::{execute, to_json, write_atomic, Command, Overrides, Status};

#[derive(Parser)]
#[command(
    name = "randopt",
    version,
    about = "Measurable solutions of scenario optimization problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Global minimization over the feasible set, per atom.
    SolveRop(RunArgs),
    /// Certified local minimization over the search box, per atom.
    SolveRlop(RunArgs),
    /// Measurability of the objective, feasible set and candidate.
    CheckMeasurable(RunArgs),
    /// Stationary points of every scenario.
    Stationary(RunArgs),
    /// First- and second-order necessary conditions at the candidate.
    Necessary(RunArgs),
    /// Brute-force grid minimum of every scenario.
    Oracle(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Grid points per axis for enumeration.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also report Newton-polished grid minima.
    #[arg(long)]
    polish: bool,
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("RANDOPT_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| format!("RANDOPT_THREADS must be a non-negative integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(Status::InputError.exit_code() as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(message) = configure_threads() {
        eprintln!("error: {message}");
        return ExitCode::from(Status::InputError.exit_code() as u8);
    }
    let (command, args) = match cli.command {
        Cmd::SolveRop(a) => (Command::SolveRop, a),
        Cmd::SolveRlop(a) => (Command::SolveRlop, a),
        Cmd::CheckMeasurable(a) => (Command::CheckMeasurable, a),
        Cmd::Stationary(a) => (Command::Stationary, a),
        Cmd::Necessary(a) => (Command::Necessary, a),
        Cmd::Oracle(a) => (Command::Oracle, a),
    };
    let overrides = Overrides {
        grid: args.grid,
        seed: args.seed,
        polish: args.polish,
    };
    let report = execute(command, &args.input, &overrides);
    if let Some(error) = &report.error {
        eprintln!("{}: {}", command.name(), error.message);
    }
    if let Err(e) = write_atomic(&args.output, &to_json(&report)) {
        eprintln!("error: cannot write {}: {e}", args.output.display());
        return ExitCode::from(Status::InputError.exit_code() as u8);
    }
    ExitCode::from(report.exit_code as u8)
}
