//! Command-line entry point.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::scenario::Kind;
use crate::selftest::{self, ClosedForms};
use crate::{run, CliError};

#[derive(Parser)]
#[command(name = "ptk", version, about = "Phases of Lagrangian manifolds: scenario runner and self-test")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the integration step count.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Lagrangian check and caustic search.
    Check(RunArgs),
    /// Trajectories with accumulated action.
    Flow(RunArgs),
    /// Phase transport of cover points.
    Transport(RunArgs),
    /// Hamilton-Jacobi solution by characteristics.
    Hj(RunArgs),
    /// Maslov indices and quantization residues.
    Ebk(RunArgs),
    /// Weyl translations of a sampled wavefunction.
    Weyl(RunArgs),
    /// Relative invariance of p dx - H dt.
    Invariance(RunArgs),
    /// Closed-form phase laws against direct transport.
    Selftest {
        /// Comma-separated tags (default: all).
        #[arg(long)]
        only: Option<String>,
        /// Random cases per tag.
        #[arg(long, default_value_t = selftest::DEFAULT_CASES)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Sizes the global thread pool from `PTK_THREADS`. Call once per process.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("PTK_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Validation(format!("PTK_THREADS: expected a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Validation(format!("PTK_THREADS: {e}")))
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32, CliError> {
    let (kind, args) = match cmd {
        Command::Selftest { only, cases, seed } => {
            let tags = selftest::select(only.as_deref())?;
            if cases == 0 {
                return Err(CliError::Validation("--cases: must be positive".into()));
            }
            let results = selftest::run(&tags, ClosedForms::default(), cases, seed);
            for r in &results {
                writeln!(out, "{r}")?;
            }
            return Ok(if results.iter().all(|r| r.passed) { 0 } else { 1 });
        }
        Command::Check(a) => (Kind::Check, a),
        Command::Flow(a) => (Kind::Flow, a),
        Command::Transport(a) => (Kind::Transport, a),
        Command::Hj(a) => (Kind::Hj, a),
        Command::Ebk(a) => (Kind::Ebk, a),
        Command::Weyl(a) => (Kind::Weyl, a),
        Command::Invariance(a) => (Kind::Invariance, a),
    };
    for p in run::run_file(&args.scenario, Some(kind), &args.out, args.seed, args.steps)? {
        writeln!(out, "{}", p.display())?;
    }
    Ok(0)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr, results to `out`.
pub fn run_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ptk: {e}");
            e.exit_code()
        }
    }
}
