use super::basic::{erm, weighted_l1};
use super::dc::{neg_l2_dantzig, neg_l2_erm};
use crate::error::{invalid, Result};
use crate::geometry::SimplexVector;
use crate::optim::{Fit, SolverConfig};
use crate::risk::QuadraticRisk;

/// Estimator swept along a regularization grid.
#[derive(Debug, Clone, PartialEq)]
pub enum PathMethod {
    NegL2Erm,
    /// Weighted `l1` with weights taken from this pilot estimate.
    WeightedL1(SimplexVector),
    NegL2Dantzig,
}

/// Estimates along an ascending grid, each warm-started from its predecessor.
///
/// A failed grid point keeps the warm-start estimate, is marked
/// not converged, and records its error message.
#[derive(Debug, Clone)]
pub struct EstimatePath {
    pub lambdas: Vec<f64>,
    pub estimates: Vec<SimplexVector>,
    pub objectives: Vec<f64>,
    pub supports: Vec<Vec<usize>>,
    pub converged: Vec<bool>,
    pub errors: Vec<Option<String>>,
}

impl EstimatePath {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Distinct supports in order of first appearance.
    pub fn distinct_supports(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        for s in &self.supports {
            if !s.is_empty() && !out.contains(s) {
                out.push(s.clone());
            }
        }
        out
    }
}

/// `n` points spaced evenly in log scale from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}

/// Sweeps `method` over `grid`, starting from the ERM solution.
pub fn lambda_path(method: &PathMethod, risk: &QuadraticRisk, grid: &[f64], config: &SolverConfig) -> Result<EstimatePath> {
    if grid.is_empty() {
        return invalid("empty grid");
    }
    if grid.windows(2).any(|w| !(w[0] <= w[1])) || grid.iter().any(|l| !(*l >= 0.0)) {
        return invalid("grid must be nonnegative and ascending");
    }
    let mut current = erm(risk, config, None)?.estimate;
    let mut path = EstimatePath {
        lambdas: Vec::with_capacity(grid.len()),
        estimates: Vec::with_capacity(grid.len()),
        objectives: Vec::with_capacity(grid.len()),
        supports: Vec::with_capacity(grid.len()),
        converged: Vec::with_capacity(grid.len()),
        errors: Vec::with_capacity(grid.len()),
    };
    for &lambda in grid {
        let fit: Result<Fit<SimplexVector>> = match method {
            PathMethod::NegL2Erm => neg_l2_erm(risk, lambda, &current, config),
            PathMethod::WeightedL1(pilot) => weighted_l1(risk, lambda, pilot, config),
            PathMethod::NegL2Dantzig => neg_l2_dantzig(risk, lambda, &current, config),
        };
        path.lambdas.push(lambda);
        match fit {
            Ok(fit) => {
                current = fit.estimate.clone();
                path.supports.push(fit.estimate.support());
                path.objectives.push(fit.objective);
                path.converged.push(fit.converged);
                path.estimates.push(fit.estimate);
                path.errors.push(None);
            }
            Err(e) => {
                path.supports.push(current.support());
                path.objectives.push(f64::NAN);
                path.converged.push(false);
                path.estimates.push(current.clone());
                path.errors.push(Some(e.to_string()));
            }
        }
    }
    Ok(path)
}
