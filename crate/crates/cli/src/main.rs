use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use degenlab::config::parse_config;
use degenlab::runner::{report, run, Mode, RunOptions};

/// Numerical laboratory for widely degenerate anisotropic energies: solve
/// regularized minimization problems on grids, sweep the regularization to
/// zero, and verify the localized estimates the minimizers satisfy.
#[derive(Parser)]
#[command(name = "degenlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Overrides the seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root directory (default: config `output.dir`, then
    /// `$DEGENLAB_OUT`, then `runs`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker cap recorded in the manifest; reductions stay deterministic.
    #[arg(long)]
    threads: Option<usize>,
    /// Abort on the first failing stage instead of continuing.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// One minimization at the first schedule entry.
    Solve {
        config: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Full eps-continuation with per-eps diagnostics and estimate checks.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Estimate checks on a previously saved solution field.
    Verify {
        config: PathBuf,
        solution: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Standalone inequality suites.
    Lab {
        #[command(subcommand)]
        suite: LabSuite,
    },
    /// Summary of a finished run directory.
    Report { run_dir: PathBuf },
}

#[derive(Subcommand)]
enum LabSuite {
    /// Randomized compactly supported fields against the anisotropic
    /// Sobolev inequality.
    Troisi {
        config: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve { config, opts } => execute(&config, Mode::Solve, &opts),
        Command::Sweep { config, opts } => execute(&config, Mode::Sweep, &opts),
        Command::Verify { config, solution, opts } => {
            execute(&config, Mode::Verify { solution }, &opts)
        }
        Command::Lab { suite: LabSuite::Troisi { config, opts } } => {
            execute(&config, Mode::LabTroisi, &opts)
        }
        Command::Report { run_dir } => {
            return match report(&run_dir) {
                Ok(0) => ExitCode::SUCCESS,
                Ok(_) => ExitCode::FAILURE,
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(2)
                }
            };
        }
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}

fn execute(
    config_path: &PathBuf,
    mode: Mode,
    opts: &CommonOpts,
) -> Result<ExitCode, degenlab::DriverError> {
    let config = parse_config(config_path)?;
    let run_opts = RunOptions {
        seed: opts.seed,
        out: opts.out.clone(),
        threads: opts.threads,
        strict: opts.strict,
    };
    let outcome = run(&config, mode, &run_opts)?;
    println!("run directory: {}", outcome.dir.display());
    for r in &outcome.reports {
        println!(
            "check {}: {} (lhs {:e}, rhs {:e}, ratio {:e})",
            r.name,
            if r.pass { "pass" } else { "FAIL" },
            r.lhs,
            r.rhs_core,
            r.ratio
        );
    }
    if outcome.failed_checks > 0 || outcome.stage_errors > 0 {
        println!(
            "{} failed check(s), {} stage error(s)",
            outcome.failed_checks, outcome.stage_errors
        );
        Ok(ExitCode::FAILURE)
    } else {
        Ok(ExitCode::SUCCESS)
    }
}
