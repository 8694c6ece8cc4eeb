//! Thin command-line front end: argument parsing and error reporting only;
//! all behavior lives in the library's `runner` module.

use clap::{Args, Parser, Subcommand};
use romcert::config::ExperimentConfig;
use romcert::runner;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "romcert",
    version,
    about = "Reduced-order modeling with certified error estimates for adaptively integrated ODE systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override the greedy driver: 1 (closure-free) or 2 (closure-aware).
    #[arg(long, value_name = "1|2")]
    alg: Option<u8>,
    /// Override the closure surrogate: rbf or fnn.
    #[arg(long, value_name = "rbf|fnn")]
    surrogate: Option<String>,
    /// Override the master seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the full model adaptively and dump trajectory, outputs and metadata
    SimulateFom(CommonArgs),
    /// Sample exact defects over the training set and fit the closure surrogate
    ClosureTrain(CommonArgs),
    /// Greedy reduced-basis construction with certified candidate selection
    Greedy(CommonArgs),
    /// Sweep the output-error estimate over the held-out test parameters
    Estimate(CommonArgs),
    /// Heat failure study: imposed-scheme estimate against the true error
    DemoHeat(CommonArgs),
    /// Singular-value decay reports for defect and state snapshots
    SvdReport(CommonArgs),
}

fn execute() -> romcert::Result<()> {
    let cli = Cli::parse();
    let (args, run): (&CommonArgs, fn(&ExperimentConfig) -> romcert::Result<()>) =
        match &cli.command {
            Cmd::SimulateFom(a) => (a, runner::simulate_fom),
            Cmd::ClosureTrain(a) => (a, runner::closure_train),
            Cmd::Greedy(a) => (a, runner::greedy),
            Cmd::Estimate(a) => (a, runner::estimate),
            Cmd::DemoHeat(a) => (a, runner::demo_heat),
            Cmd::SvdReport(a) => (a, runner::svd_report),
        };
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    cfg.apply_overrides(
        args.alg,
        args.surrogate.as_deref(),
        args.seed,
        args.out.as_deref(),
    )?;
    run(&cfg)
}

fn main() {
    if let Err(e) = execute() {
        eprintln!("{}", runner::error_json(&e));
        std::process::exit(1);
    }
}
