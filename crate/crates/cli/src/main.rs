use std::path::PathBuf;
use std::process::ExitCode;

use betaplane_cli::commands::report;
use betaplane_cli::{execute, RunOptions, Subcommand};
use clap::{Args, Parser};

#[derive(Parser)]
#[command(name = "betaplane", version, about = "β-plane vorticity solver and synchronization experiments")]
enum Cli {
    /// Integrate one trajectory and write diagnostics.
    Simulate(RunArgs),
    /// Master-slave run coupled through the low Fourier modes.
    SyncModes(RunArgs),
    /// Master-slave run nudged through nodal values.
    SyncNodes(RunArgs),
    /// Evaluate the determining-modes and nodes thresholds.
    Thresholds(RunArgs),
    /// Zonalization or empirical threshold sweeps.
    Sweep(RunArgs),
    /// Monitor the a-priori vorticity bounds along a trajectory.
    CheckBounds(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration, or a manifest.json from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override; sync runs use it for the master and seed + 1 for the slave.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress the report on stdout.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (cmd, args) = match Cli::parse() {
        Cli::Simulate(a) => (Subcommand::Simulate, a),
        Cli::SyncModes(a) => (Subcommand::SyncModes, a),
        Cli::SyncNodes(a) => (Subcommand::SyncNodes, a),
        Cli::Thresholds(a) => (Subcommand::Thresholds, a),
        Cli::Sweep(a) => (Subcommand::Sweep, a),
        Cli::CheckBounds(a) => (Subcommand::CheckBounds, a),
    };
    let opts = RunOptions { out: args.out, seed: args.seed, quiet: args.quiet };
    match execute(cmd, &args.config, &opts) {
        Ok(out) => {
            if let Err(e) = report(&out, opts.quiet) {
                eprintln!("betaplane: {e}");
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("betaplane {}: {e}", cmd.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
