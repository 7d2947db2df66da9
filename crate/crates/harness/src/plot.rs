//! Long-format plot data derived from `summary.csv`.

use std::path::Path;

use crate::aggregate::{csv_io, read_summary, SummaryRow};
use crate::config::PlotKind;
use crate::HarnessError;

/// Experiments whose contour level is the mean MCC rather than the recovery fraction.
fn mcc_contour(experiment: &str) -> bool {
    matches!(experiment, "regress" | "density")
}

/// Plot rows `(x, y, series, level)` for one kind.
///
/// * `error_curve`: mean l2 error against `n`, one series per method and sparsity or rank.
/// * `contour`: one row per `(n, s)` cell and method; `level` is the
///   recovery fraction, or the mean MCC for regression and density.
/// * `sharpe_curve`: out-of-sample Sharpe ratio against the l2 norm of the
///   weights, one series per method and `tau`.
pub fn plot_rows(rows: &[SummaryRow], kind: PlotKind) -> Vec<(f64, f64, String, Option<f64>)> {
    match kind {
        PlotKind::ErrorCurve => rows
            .iter()
            .filter(|r| r.experiment != "portfolio")
            .filter_map(|r| r.mean_l2.map(|y| (r.n as f64, y, format!("{} s={}", r.method, r.s_or_r), None)))
            .collect(),
        PlotKind::Contour => rows
            .iter()
            .filter(|r| r.experiment != "portfolio")
            .filter_map(|r| {
                let level = if mcc_contour(&r.experiment) { r.mean_mcc? } else { r.recovery_fraction };
                Some((r.n as f64, r.s_or_r as f64, r.method.clone(), Some(level)))
            })
            .collect(),
        PlotKind::SharpeCurve => rows
            .iter()
            .filter_map(|r| {
                let series = format!("{} tau={}", r.method, r.tau?);
                Some((r.mean_norm_l2?, r.mean_sharpe?, series, None))
            })
            .collect(),
    }
}

/// Writes the plot data for `kind` from a summary file and returns the number of data rows.
pub fn emit_plot_data(summary_path: &Path, kind: PlotKind, out_path: &Path) -> Result<usize, HarnessError> {
    let rows = plot_rows(&read_summary(summary_path)?, kind);
    let mut w = csv::Writer::from_path(out_path).map_err(|e| csv_io(e, out_path))?;
    if kind == PlotKind::Contour {
        w.write_record(["x", "y", "series", "level"]).map_err(|e| csv_io(e, out_path))?;
    } else {
        w.write_record(["x", "y", "series"]).map_err(|e| csv_io(e, out_path))?;
    }
    for (x, y, series, level) in &rows {
        let mut fields = vec![x.to_string(), y.to_string(), series.clone()];
        if let Some(l) = level {
            fields.push(l.to_string());
        }
        w.write_record(&fields).map_err(|e| csv_io(e, out_path))?;
    }
    w.flush().map_err(|source| HarnessError::Io { path: out_path.to_path_buf(), source })?;
    Ok(rows.len())
}
