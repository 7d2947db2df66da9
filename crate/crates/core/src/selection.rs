//! Model-selection criteria and evaluation metrics.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::geometry::SimplexVector;
use crate::matrix::{weighted_l1_eigen, SpectralEstimate};
use crate::optim::SolverConfig;
use crate::risk::{build_regression_risk, QuadraticRisk, TraceRegressionProblem};
use crate::vector::weighted_l1_with_weights;

/// Outcome of choosing among candidates by a criterion.
#[derive(Debug, Clone)]
pub struct SelectionResult<T> {
    /// First index attaining the minimum criterion value.
    pub chosen_index: usize,
    pub criterion_values: Vec<f64>,
    pub refit_estimate: T,
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Least-squares residual `||Y - X_S b||^2 / n` over unrestricted `b`
/// (minimum-norm solution when `X_S` is rank deficient).
fn ls_residual(support: &[usize], x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    let n = x.nrows() as f64;
    if support.is_empty() {
        return Ok(y.norm_squared() / n);
    }
    let xs = x.select_columns(support);
    let svd = xs.clone().svd(true, true);
    let coef = svd
        .solve(y, 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Numerical(e.to_string()))?;
    Ok((y - xs * coef).norm_squared() / n)
}

/// `min_{b : b_{S^c} = 0} ||Y - X b||^2 / n + 2 sigma^2 log(p) |S| / n`.
pub fn ric(support: &[usize], x: &DMatrix<f64>, y: &DVector<f64>, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return invalid("sigma must be positive");
    }
    let (n, p) = x.shape();
    if n == 0 || y.len() != n {
        return invalid("design and response shapes do not match");
    }
    if support.iter().any(|&j| j >= p) {
        return invalid("support index out of range");
    }
    let penalty = 2.0 * sigma * sigma * (p as f64).ln() * support.len() as f64 / n as f64;
    Ok(ls_residual(support, x, y)? + penalty)
}

/// Picks the support minimizing [`ric`] and refits by least squares over the
/// simplex restricted to it.
pub fn select_by_ric(
    candidates: &[Vec<usize>],
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    sigma: f64,
    config: &SolverConfig,
) -> Result<SelectionResult<SimplexVector>> {
    if candidates.is_empty() {
        return invalid("no candidates");
    }
    let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut values = Vec::with_capacity(candidates.len());
    for s in candidates {
        let mut key = s.clone();
        key.sort_unstable();
        key.dedup();
        let v = match cache.get(&key) {
            Some(&v) => v,
            None => {
                let v = ric(&key, x, y, sigma)?;
                cache.insert(key, v);
                v
            }
        };
        values.push(v);
    }
    let chosen = argmin(&values);
    let support = &candidates[chosen];
    if support.is_empty() {
        return invalid("chosen support is empty");
    }
    let risk = build_regression_risk(x, y)?;
    let mut weights = DVector::from_element(x.ncols(), f64::INFINITY);
    for &j in support {
        weights[j] = 0.0;
    }
    let fit = weighted_l1_with_weights(&risk, 0.0, &weights, config)?;
    Ok(SelectionResult { chosen_index: chosen, criterion_values: values, refit_estimate: fit.estimate })
}

/// `R_n(B) + C sigma^2 log(m^2) rank(B) / n`, minimized over the candidates;
/// the winner's eigenvalues are refitted by least squares with its
/// eigenvectors fixed.
pub fn matrix_rank_criterion(
    candidates: &[SpectralEstimate],
    prob: &TraceRegressionProblem,
    c: f64,
    config: &SolverConfig,
) -> Result<SelectionResult<SpectralEstimate>> {
    if candidates.is_empty() {
        return invalid("no candidates");
    }
    if !(c >= 0.0) {
        return invalid("penalty constant must be nonnegative");
    }
    let m = prob.dim() as f64;
    let n = prob.len() as f64;
    let sigma = prob.noise_sigma();
    let unit = c * sigma * sigma * (m * m).ln() / n;
    let values: Vec<f64> = candidates
        .iter()
        .map(|b| prob.value(&b.to_matrix()) + unit * b.rank().max(1) as f64)
        .collect();
    let chosen = argmin(&values);
    let refit = weighted_l1_eigen(prob, &candidates[chosen], 0.0, config)?;
    Ok(SelectionResult { chosen_index: chosen, criterion_values: values, refit_estimate: refit.estimate })
}

/// Matthews correlation coefficient between two supports of `{0, .., p-1}`;
/// zero when the denominator vanishes.
pub fn mcc(s_hat: &[usize], s_true: &[usize], p: usize) -> f64 {
    let mut est = vec![false; p];
    let mut truth = vec![false; p];
    for &j in s_hat.iter().filter(|&&j| j < p) {
        est[j] = true;
    }
    for &j in s_true.iter().filter(|&&j| j < p) {
        truth[j] = true;
    }
    let (mut tp, mut tn, mut fp, mut fneg) = (0.0, 0.0, 0.0, 0.0);
    for j in 0..p {
        match (est[j], truth[j]) {
            (true, true) => tp += 1.0,
            (false, false) => tn += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fneg += 1.0,
        }
    }
    let denom: f64 = (tp + fp) * (tp + fneg) * (tn + fp) * (tn + fneg);
    if denom == 0.0 {
        return 0.0;
    }
    (tp * tn - fp * fneg) / denom.sqrt()
}

/// Mean over standard deviation (divisor `weeks - 1`) of the portfolio's
/// weekly returns.
pub fn sharpe_ratio(weights: &SimplexVector, returns: &DMatrix<f64>) -> Result<f64> {
    if returns.ncols() != weights.len() {
        return invalid("returns and weights differ in dimension");
    }
    let weeks = returns.nrows();
    if weeks < 2 {
        return invalid("need at least two weeks of returns");
    }
    let r = returns * weights.as_vector();
    let mean = r.mean();
    let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (weeks - 1) as f64;
    let sd = var.sqrt();
    // Relative test so rounding noise on constant returns also counts as zero.
    if !(sd > 1e-12 * mean.abs()) || sd == 0.0 {
        return Err(Error::UndefinedRatio("portfolio returns have zero variance".into()));
    }
    Ok(mean / sd)
}

/// The candidate with the smallest validation risk (first on ties).
pub fn holdout_select(candidates: &[SimplexVector], validation: &QuadraticRisk) -> Result<SelectionResult<SimplexVector>> {
    if candidates.is_empty() {
        return invalid("no candidates");
    }
    if candidates.iter().any(|b| b.len() != validation.dim()) {
        return invalid("candidate dimension does not match the validation risk");
    }
    let values: Vec<f64> = candidates.iter().map(|b| validation.value(b.as_vector())).collect();
    let chosen = argmin(&values);
    Ok(SelectionResult { chosen_index: chosen, criterion_values: values, refit_estimate: candidates[chosen].clone() })
}
