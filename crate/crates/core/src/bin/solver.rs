use std::path::PathBuf;

use clap::Parser;
use hardy_variational::cli::{run, RunOptions, Task};

/// Variational solvers for Dirichlet problems with Hardy potentials.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[arg(value_enum)]
    task: Task,
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Solve even when a hypothesis check fails.
    #[arg(long)]
    force: bool,
    /// Write the iterate log as line-delimited JSON.
    #[arg(long)]
    log_iterates: bool,
}

fn main() -> std::process::ExitCode {
    let args = Args::parse();
    let opts = RunOptions { out: args.out, force: args.force, log_iterates: args.log_iterates };
    std::process::ExitCode::from(run(args.task, &args.config, &opts).code())
}
