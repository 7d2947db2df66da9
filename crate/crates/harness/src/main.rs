use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use simplex_sparse::{run_experiment, Experiment, ExperimentConfig, HarnessError, Overrides};

/// Runs one experiment and writes results.jsonl, summary.csv and plot data.
#[derive(Debug, Parser)]
#[command(name = "simplex-sparse", version)]
struct Cli {
    /// cs, regress, density, portfolio, qst or denoise.
    experiment: String,
    /// Flat key = value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `out`, or the `out` key of the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; 0 uses one per core.
    #[arg(long)]
    workers: Option<usize>,
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let experiment: Experiment = cli.experiment.parse()?;
    let overrides = Overrides { out: cli.out, seed: cli.seed, trials: cli.trials, workers: cli.workers };
    let config = ExperimentConfig::load(experiment, &cli.config, &overrides)?;
    let out = run_experiment(&config)?;
    eprintln!("{} records -> {}", out.records, out.results.display());
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with code 2 on usage errors, matching configuration errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
