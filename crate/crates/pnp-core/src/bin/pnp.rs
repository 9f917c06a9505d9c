use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pnp_core::runner::{self, Command as RunCommand, RunOptions};

/// Multiscale drift-diffusion / potential simulation suite.
#[derive(Parser)]
#[command(name = "pnp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the periodic cell problems and report the effective tensor.
    Cell(CommonArgs),
    /// Run the macroscopic (homogenized) transient model.
    Homog(CommonArgs),
    /// Run the microscopic transient model on the perforated domain.
    Micro(CommonArgs),
    /// Epsilon sweep: micro runs against the macroscopic reference.
    Converge(CommonArgs),
    /// Regularized-diffusion sweep against the classical model.
    AppPnpSweep(CommonArgs),
    /// Verify the invariants of a stored run directory.
    Check(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to the TOML configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the configuration's output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweep members.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Accept charge-incompatible data; all potential solves are skipped.
    #[arg(long)]
    allow_incompatible: bool,
}

fn run(cmd: RunCommand, args: &CommonArgs) -> pnp_core::Result<usize> {
    let text = std::fs::read_to_string(&args.config)?;
    let base = args.config.parent();
    let cfg = runner::parse_config(&text, base, cmd, args.allow_incompatible)?;
    let opts = RunOptions {
        out_dir: args.out.clone(),
        threads: args.threads.max(1),
        allow_incompatible: args.allow_incompatible,
    };
    runner::orchestrate(cmd, &cfg, &opts)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match &cli.command {
        Cmd::Cell(a) => (RunCommand::Cell, a),
        Cmd::Homog(a) => (RunCommand::Homog, a),
        Cmd::Micro(a) => (RunCommand::Micro, a),
        Cmd::Converge(a) => (RunCommand::Converge, a),
        Cmd::AppPnpSweep(a) => (RunCommand::AppPnpSweep, a),
        Cmd::Check(a) => (RunCommand::Check, a),
    };
    match run(cmd, args) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("pnp: {failed} check(s) failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("pnp: error: {e}");
            ExitCode::FAILURE
        }
    }
}
