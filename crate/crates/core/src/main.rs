//! `softq` — deterministic experiment runner for maximum-entropy Q-iteration,
//! additive task composition, and composition-bound certification.

use clap::{Args, Parser, Subcommand};
use softq::harness::{
    cmd_bench, cmd_certify, cmd_compose, cmd_gen, cmd_plotdata, cmd_solve, cmd_verify,
    CommandError, RunOptions,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "softq",
    version,
    about = "Soft Q-iteration, additive composition, and bound certification on finite MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON, fail-closed: unknown fields are rejected).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Replace the config's seed list with this single seed.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Override the config's solver tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Worker threads for seed sweeps (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve each task's optimal soft Q-function and write solution documents.
    Solve(Common),
    /// Average constituent solutions into merged policies (zero extra sweeps).
    Compose(Common),
    /// Certify composition error bounds for every task pair; nonzero exit iff
    /// any slack is below -1e-6.
    Certify(Common),
    /// Run the four-method comparison (soft/hard x direct/merged) with
    /// seeded rollouts; write report.csv, rollouts.csv, report.json.
    Bench(Common),
    /// Emit residual-vs-iteration traces (traces.csv) for plotting.
    Plotdata(Common),
    /// Cross-check production solvers against independent high-precision
    /// oracles.
    Verify(Common),
    /// Materialize the configured MDP and rewards into a problem document.
    Gen(Common),
}

type CommandFn = fn(&RunOptions) -> Result<(), CommandError>;

fn run(command: &Command) -> Result<(), CommandError> {
    let (common, body): (&Common, CommandFn) = match command {
        Command::Solve(common) => (common, cmd_solve),
        Command::Compose(common) => (common, cmd_compose),
        Command::Certify(common) => (common, cmd_certify),
        Command::Bench(common) => (common, cmd_bench),
        Command::Plotdata(common) => (common, cmd_plotdata),
        Command::Verify(common) => (common, cmd_verify),
        Command::Gen(common) => (common, cmd_gen),
    };
    let options = RunOptions {
        config_path: common.config.clone(),
        out_dir: common.out.clone(),
        seed_override: common.seed_override,
        tol_override: common.tol,
        jobs: common.jobs,
    };
    body(&options)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code() as u8)
        }
    }
}
