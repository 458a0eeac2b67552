use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use netheat_core::runner::{run, Command, RunOptions};
use netheat_core::scenario::parse_scenario;

/// Heat diffusion on metric graphs with time-dependent vertex conditions.
#[derive(Parser)]
#[command(name = "netheat", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for CSV/JSON results.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and validate a scenario without running anything.
    Validate(CommonArgs),
    /// Sample the eigenvalue curves over the analysis grid.
    Spectrum(CommonArgs),
    /// Integrate the evolution and write the trajectory.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Downsample the trajectory to this many points per edge.
        #[arg(long)]
        downsample: Option<usize>,
    },
    /// Run the full stability analysis pipeline.
    Analyze(CommonArgs),
    /// Compare discrete eigenvalues against closed forms under refinement.
    Convergence(CommonArgs),
}

fn main() -> ExitCode {
    match try_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("netheat: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn try_main() -> anyhow::Result<()> {
    // NETHEAT_THREADS caps sweep parallelism; unset means one per core
    let threads = std::env::var("NETHEAT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    netheat_core::exec::configure_threads(threads);

    let cli = Cli::parse();
    let (command, common, downsample) = match &cli.command {
        Cmd::Validate(c) => (Command::Validate, c, None),
        Cmd::Spectrum(c) => (Command::Spectrum, c, None),
        Cmd::Simulate { common, downsample } => (Command::Simulate, common, *downsample),
        Cmd::Analyze(c) => (Command::Analyze, c, None),
        Cmd::Convergence(c) => (Command::Convergence, c, None),
    };
    let scenario = parse_scenario(&common.scenario)
        .with_context(|| format!("loading {}", common.scenario.display()))?;
    let options = RunOptions {
        out_dir: common.out.clone(),
        downsample,
    };
    let report = run(&scenario, command, &options)
        .with_context(|| format!("running {}", command.name()))?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
