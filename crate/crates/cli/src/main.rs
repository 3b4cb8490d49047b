use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linfel_cli::{compare, exit, run, CliError, CompareOptions, RunConfig, RunMode};

/// L-infinity extremals of second-order operators by L^p continuation.
#[derive(Parser)]
#[command(name = "linfel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=linfel_cli::config::MAX_SEED))]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Construct a minimiser by continuation in p.
    Solve(RunArgs),
    /// Certify a candidate with the penalised continuation.
    Certify(RunArgs),
    /// Run the diagnostics on a given field.
    Diagnose(RunArgs),
    /// Reference solution of the one-dimensional clamped problem.
    Oracle1d(RunArgs),
    /// Compare two artifact directories.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Compare only scalar results, allowing different grids.
        #[arg(long)]
        scalars_only: bool,
        #[arg(long, default_value_t = 0.0)]
        tolerance: f64,
        /// Also write the comparison to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run_mode(mode: RunMode, args: &RunArgs) -> Result<i32, CliError> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("linfel-out"));
    let outcome = run(&config, mode, &out)?;
    let r = &outcome.report;
    println!(
        "{}: e_infty = {:e}, certificate {}, artifact in {}",
        mode.name(),
        r.e_infty_estimate,
        if r.verdict { "passed" } else { "failed" },
        outcome.out_dir.display()
    );
    if outcome.exit_code != exit::OK {
        eprintln!("{}", r.status.message);
    }
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => run_mode(RunMode::Solve, a),
        Command::Certify(a) => run_mode(RunMode::Certify, a),
        Command::Diagnose(a) => run_mode(RunMode::Diagnose, a),
        Command::Oracle1d(a) => run_mode(RunMode::Oracle1d, a),
        Command::Compare {
            a,
            b,
            scalars_only,
            tolerance,
            out,
        } => {
            let options = CompareOptions {
                scalars_only: *scalars_only,
                tolerance: *tolerance,
            };
            compare(a, b, &options).and_then(|c| {
                let text = serde_yaml::to_string(&c).expect("comparison serialises");
                print!("{text}");
                if let Some(path) = out {
                    std::fs::write(path, &text).map_err(|e| CliError::io(path, e))?;
                }
                Ok(if c.pass { exit::OK } else { exit::FAILURE })
            })
        }
    };
    let code = result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
