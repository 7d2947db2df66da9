//! Grouped statistics over `results.jsonl`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::record::TrialRecord;
use crate::HarnessError;

/// One row of `summary.csv`: a (method, grid point) cell, or for
/// portfolio runs a (method, tau, path point) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub method: String,
    pub grid: usize,
    pub n: usize,
    pub p_or_m: usize,
    pub s_or_r: usize,
    pub tau: Option<f64>,
    /// The path value for portfolio rows, else the mean selected value.
    pub hyperparameter: Option<f64>,
    pub count: usize,
    pub mean_l2: Option<f64>,
    pub median_l2: Option<f64>,
    pub se_l2: Option<f64>,
    pub mean_linf: Option<f64>,
    pub median_linf: Option<f64>,
    pub se_linf: Option<f64>,
    pub recovery_fraction: f64,
    pub mean_mcc: Option<f64>,
    /// Fraction of records whose support size or rank equals `s_or_r`.
    pub rank_detection: f64,
    pub converged_fraction: f64,
    pub mean_sharpe: Option<f64>,
    pub mean_norm_l2: Option<f64>,
}

pub const SUMMARY_HEADER: [&str; 21] = [
    "experiment",
    "method",
    "grid",
    "n",
    "p_or_m",
    "s_or_r",
    "tau",
    "hyperparameter",
    "count",
    "mean_l2",
    "median_l2",
    "se_l2",
    "mean_linf",
    "median_linf",
    "se_linf",
    "recovery_fraction",
    "mean_mcc",
    "rank_detection",
    "converged_fraction",
    "mean_sharpe",
    "mean_norm_l2",
];

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len() / 2;
    Some(if s.len() % 2 == 1 { s[k] } else { 0.5 * (s[k - 1] + s[k]) })
}

/// Standard error of the mean; needs at least two values.
fn standard_error(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = mean(v)?;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    Some((var / v.len() as f64).sqrt())
}

fn present(records: &[&TrialRecord], f: impl Fn(&TrialRecord) -> Option<f64>) -> Vec<f64> {
    records.iter().filter_map(|r| f(r)).collect()
}

fn fraction(records: &[&TrialRecord], f: impl Fn(&TrialRecord) -> bool) -> f64 {
    records.iter().filter(|r| f(r)).count() as f64 / records.len() as f64
}

/// Sort key for `f64` group labels.
fn bits(v: Option<f64>) -> Option<u64> {
    v.map(|x| {
        let b = x.to_bits();
        // Order-preserving map from floats to unsigned integers.
        if b >> 63 == 1 {
            !b
        } else {
            b | (1 << 63)
        }
    })
}

/// Groups records and computes per-cell statistics, rows ordered by
/// (experiment, method, grid point, path value).
pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    type Key = (String, String, usize, Option<u64>);
    let mut groups: BTreeMap<Key, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        let path_point = if r.experiment == "portfolio" { bits(r.hyperparameter) } else { None };
        groups.entry((r.experiment.clone(), r.method.clone(), r.grid, path_point)).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let first = g[0];
            let l2 = present(&g, |r| r.l2_error);
            let linf = present(&g, |r| r.linf_error);
            let hyper = present(&g, |r| r.hyperparameter);
            SummaryRow {
                experiment: first.experiment.clone(),
                method: first.method.clone(),
                grid: first.grid,
                n: first.n,
                p_or_m: first.p_or_m,
                s_or_r: first.s_or_r,
                tau: first.tau,
                hyperparameter: if first.experiment == "portfolio" { first.hyperparameter } else { mean(&hyper) },
                count: g.len(),
                mean_l2: mean(&l2),
                median_l2: median(&l2),
                se_l2: standard_error(&l2),
                mean_linf: mean(&linf),
                median_linf: median(&linf),
                se_linf: standard_error(&linf),
                recovery_fraction: fraction(&g, |r| r.recovered),
                mean_mcc: mean(&present(&g, |r| r.mcc)),
                rank_detection: fraction(&g, |r| r.error.is_none() && r.rank_or_support_size == r.s_or_r),
                converged_fraction: fraction(&g, |r| r.converged),
                mean_sharpe: mean(&present(&g, |r| r.sharpe)),
                mean_norm_l2: mean(&present(&g, |r| r.norm_l2)),
            }
        })
        .collect()
}

/// Reads `results.jsonl`. Blank lines are skipped; anything else that does
/// not parse is reported with its 1-based line number.
pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>, HarnessError> {
    let io = |source| HarnessError::Io { path: path.to_path_buf(), source };
    let file = File::open(path).map_err(io)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| HarnessError::Malformed { line: i + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

/// Summary of a results file.
pub fn aggregate(results_path: &Path) -> Result<Vec<SummaryRow>, HarnessError> {
    Ok(summarize(&read_records(results_path)?))
}

/// Writes rows under [`SUMMARY_HEADER`]; the header is written even with no rows.
pub fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io { path: path.to_path_buf(), source };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(|e| csv_io(e, path))?;
    w.write_record(SUMMARY_HEADER).map_err(|e| csv_io(e, path))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_io(e, path))?;
    }
    w.flush().map_err(io)
}

/// Reads a summary written by [`write_summary`].
pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(e, path))?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| HarnessError::Malformed { line: i + 2, message: e.to_string() }))
        .collect()
}

pub(crate) fn csv_io(e: csv::Error, path: &Path) -> HarnessError {
    let message = e.to_string();
    match e.into_kind() {
        csv::ErrorKind::Io(source) => HarnessError::Io { path: path.to_path_buf(), source },
        _ => HarnessError::Input(format!("{}: {message}", path.display())),
    }
}
