use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use levy_impulse_cli::{
    cmd_ladder, cmd_simulate, cmd_solve, cmd_sweep, cmd_transform, cmd_verify, CliError, Outcome, ProblemSpec,
};

/// Long-run average impulse control of Lévy processes.
///
/// Exit codes: 0 success, 1 error, 2 degeneracy detected, 3 verification
/// failed. Set RAYON_NUM_THREADS to bound the worker count.
#[derive(Parser)]
#[command(name = "levy-impulse", version, allow_negative_numbers = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for (rho*, s, S) and print the result document.
    Solve { spec: PathBuf },
    /// Simulate a band strategy.
    Simulate {
        spec: PathBuf,
        #[arg(long = "s", allow_negative_numbers = true)]
        s: Option<f64>,
        #[arg(long = "S", allow_negative_numbers = true)]
        big_s: f64,
        #[arg(long)]
        cycles: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve, then run the verification protocol.
    Verify { spec: PathBuf },
    /// Re-solve over a parameter grid; CSV on stdout.
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
    },
    /// Dump ladder characteristics as CSV.
    Ladder {
        spec: PathBuf,
        #[arg(long)]
        potential: bool,
    },
    /// Dump (x, hat_h, generator, g) as CSV.
    Transform {
        spec: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long, default_value_t = 201)]
        steps: usize,
    },
}

/// Writes to stdout, treating a closed pipe (`| head`) as success.
fn out(text: &str) -> Result<(), CliError> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(e)),
        _ => Ok(()),
    }
}

fn emit(outcome: Result<Outcome, CliError>) -> Result<i32, CliError> {
    let outcome = outcome?;
    let text = serde_json::to_string_pretty(&outcome.result).expect("result serializes");
    out(&text)?;
    out("\n")?;
    if let Some(msg) = &outcome.result.message {
        log::warn!("{msg}");
    }
    Ok(outcome.exit_code)
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Solve { spec } => emit(cmd_solve(&ProblemSpec::from_path(&spec)?)),
        Command::Simulate {
            spec,
            s,
            big_s,
            cycles,
            seed,
        } => emit(cmd_simulate(&ProblemSpec::from_path(&spec)?, s, big_s, cycles, seed)),
        Command::Verify { spec } => emit(cmd_verify(&ProblemSpec::from_path(&spec)?)),
        Command::Sweep {
            spec,
            param,
            from,
            to,
            steps,
        } => {
            out(&cmd_sweep(&ProblemSpec::from_path(&spec)?, &param, from, to, steps)?)?;
            Ok(0)
        }
        Command::Ladder { spec, potential } => {
            out(&cmd_ladder(&ProblemSpec::from_path(&spec)?, potential)?)?;
            Ok(0)
        }
        Command::Transform { spec, from, to, steps } => {
            out(&cmd_transform(&ProblemSpec::from_path(&spec)?, from, to, steps)?)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
