//! Batch experiments for simplex-constrained sparse estimation and low-rank
//! density-matrix estimation.
//!
//! A run reads an [`ExperimentConfig`], evaluates every configured method on
//! every (grid point, trial) instance and writes `results.jsonl` (one
//! [`TrialRecord`] per line), `summary.csv` and any requested `plot_*.csv`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use thiserror::Error;

pub mod aggregate;
pub mod config;
pub mod experiments;
pub mod plot;
pub mod record;

pub use aggregate::{aggregate, read_records, summarize, write_summary, SummaryRow};
pub use config::{Experiment, ExperimentConfig, Method, Overrides, PlotKind};
pub use experiments::collect_records;
pub use plot::emit_plot_data;
pub use record::TrialRecord;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    /// An input file exists but its content is unusable.
    #[error("input error: {0}")]
    Input(String),

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

impl HarnessError {
    /// Process exit code: 2 for configuration errors, 3 for everything touching files.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }
}

/// Paths written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub results: PathBuf,
    pub summary: PathBuf,
    pub plots: Vec<PathBuf>,
    pub records: usize,
}

/// Runs an experiment and writes its outputs under `config.out`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let dir = &config.out;
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.clone(), source })?;
    let records = collect_records(config)?;

    let results = dir.join("results.jsonl");
    let io = |source| HarnessError::Io { path: results.clone(), source };
    let mut w = BufWriter::new(File::create(&results).map_err(io)?);
    for rec in &records {
        let line = serde_json::to_string(rec).expect("records serialize");
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)?;

    let summary = dir.join("summary.csv");
    write_summary(&aggregate(&results)?, &summary)?;

    let mut plots = Vec::new();
    for &kind in &config.plots {
        let path = dir.join(format!("plot_{}.csv", kind.name()));
        emit_plot_data(&summary, kind, &path)?;
        plots.push(path);
    }
    Ok(RunOutput { results, summary, plots, records: records.len() })
}
