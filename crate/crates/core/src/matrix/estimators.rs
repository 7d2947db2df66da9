use nalgebra::{DMatrix, DVector};

use super::SpectralEstimate;
use crate::error::{invalid, Error, Result};
use crate::geometry::{project_psd_cone, spectral_simplex, SparsityBudget};
use crate::hermitian::HermitianMatrix;
use crate::optim::{apg, inner_step_tol, ApgOptions, Fit, SolverConfig};
use crate::risk::{QuadraticRisk, TraceRegressionProblem};
use crate::vector::weighted_l1_with_weights;
use crate::{C64, SUPPORT_TOL};

/// Problems with real symmetric operators are solved over real matrices:
/// the imaginary part is invisible to the risk and would otherwise drift.
fn restrict(prob: &TraceRegressionProblem, b: HermitianMatrix) -> HermitianMatrix {
    if prob.is_real() {
        b.real_part()
    } else {
        b
    }
}

fn project(prob: &TraceRegressionProblem, b: &HermitianMatrix, rank: Option<SparsityBudget>) -> Result<HermitianMatrix> {
    let p = spectral_simplex(&restrict(prob, b.clone()), rank)?;
    Ok(restrict(prob, p.to_matrix()))
}

fn check_start(prob: &TraceRegressionProblem, init: Option<&HermitianMatrix>) -> Result<HermitianMatrix> {
    match init {
        Some(b) if b.dim() != prob.dim() => invalid("initial matrix does not match the operator dimension"),
        Some(b) => project(prob, b, None),
        None => Ok(HermitianMatrix::identity(prob.dim()).scaled(1.0 / prob.dim() as f64)),
    }
}

fn spectral_fit(point: &HermitianMatrix, objective: f64, iterations: usize, converged: bool) -> Result<Fit<SpectralEstimate>> {
    // The point is feasible, so projecting again only extracts its spectrum.
    Ok(Fit {
        estimate: spectral_simplex(point, None)?,
        objective,
        iterations,
        converged,
        history: Vec::new(),
    })
}

/// Minimizes the trace-regression risk over unit-trace PSD matrices.
pub fn erm_matrix(
    prob: &TraceRegressionProblem,
    config: &SolverConfig,
    init: Option<&HermitianMatrix>,
) -> Result<Fit<SpectralEstimate>> {
    config.validate()?;
    let start = check_start(prob, init)?;
    let res = apg(
        start,
        |b| prob.value(b),
        |b| prob.gradient(b),
        |v| project(prob, v, None),
        prob.lipschitz(),
        ApgOptions::from_config(config),
    )?;
    spectral_fit(&res.point, res.value, res.iterations, res.converged)
}

/// Minimizes `R(B) - lambda ||B||_F^2` over unit-trace PSD matrices by the
/// convex-concave procedure (subproblem `R(B) - 2 lambda <B_k, B>`).
pub fn neg_l2_erm_matrix(
    prob: &TraceRegressionProblem,
    lambda: f64,
    init: &HermitianMatrix,
    config: &SolverConfig,
) -> Result<Fit<SpectralEstimate>> {
    config.validate()?;
    if !(lambda >= 0.0) {
        return invalid("lambda must be nonnegative");
    }
    let mut b = check_start(prob, Some(init))?;
    let objective = |x: &HermitianMatrix| prob.value(x) - lambda * x.inner(x);
    let mut opts = ApgOptions::from_config(config);
    let mut f = objective(&b);
    let mut history = vec![f];
    let mut inner_ok = true;
    let mut last_step = f64::INFINITY;
    let finish = |b: &HermitianMatrix, f: f64, k: usize, ok: bool, history: Vec<f64>| -> Result<Fit<SpectralEstimate>> {
        let mut fit = spectral_fit(b, f, k, ok)?;
        fit.history = history;
        Ok(fit)
    };
    for k in 1..=config.max_outer_iters {
        opts.step_tol = inner_step_tol(config, last_step);
        let anchor = b.scaled(2.0 * lambda);
        let res = apg(
            b.clone(),
            |x| prob.value(x) - anchor.inner(x),
            |x| HermitianMatrix::lincomb(1.0, &prob.gradient(x), -1.0, &anchor),
            |v| project(prob, v, None),
            prob.lipschitz(),
            opts,
        )?;
        inner_ok &= res.converged;
        let f_next = objective(&res.point);
        if !(f_next < f) {
            if opts.step_tol > config.tol_iterate {
                // No progress under a loose inner solve: tighten and retry.
                last_step = 0.0;
                continue;
            }
            return finish(&b, f, k, inner_ok, history);
        }
        let step = HermitianMatrix::lincomb(1.0, &res.point, -1.0, &b).frobenius_norm();
        last_step = step;
        b = res.point;
        f = f_next;
        history.push(f);
        if step <= config.tol_iterate && opts.step_tol <= config.tol_iterate {
            return finish(&b, f, k, inner_ok, history);
        }
    }
    finish(&b, f, config.max_outer_iters, false, history)
}

/// [`neg_l2_erm_matrix`] along `grid` in the given order, each solve
/// warm-started from the previous estimate.
pub fn neg_l2_matrix_path(
    prob: &TraceRegressionProblem,
    grid: &[f64],
    init: &HermitianMatrix,
    config: &SolverConfig,
) -> Result<Vec<Fit<SpectralEstimate>>> {
    let mut current = init.clone();
    let mut out = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let fit = neg_l2_erm_matrix(prob, lambda, &current, config)?;
        current = fit.estimate.to_matrix();
        out.push(fit);
    }
    Ok(out)
}

/// Frobenius-norm maximization over `{B : X(B) = Y}` for noiseless data,
/// approached by [`neg_l2_erm_matrix`] along a decreasing geometric `lambda`
/// sequence (from `0.005 L/2` down to `1e-9 L/2`, ratio `0.3`, `L` the
/// gradient Lipschitz constant) followed by an ERM polish.
///
/// `init` is typically the ERM solution.
pub fn max_frobenius_noiseless(
    prob: &TraceRegressionProblem,
    init: &HermitianMatrix,
    config: &SolverConfig,
) -> Result<Fit<SpectralEstimate>> {
    let top = 0.5 * prob.lipschitz();
    let mut grid = Vec::new();
    let mut lambda = 0.005 * top;
    while lambda > 1e-9 * top {
        grid.push(lambda);
        lambda *= 0.3;
    }
    let path = neg_l2_matrix_path(prob, &grid, init, config)?;
    let start = path.last().map_or_else(|| init.clone(), |fit| fit.estimate.to_matrix());
    let iterations: usize = path.iter().map(|fit| fit.iterations).sum();
    let mut fit = erm_matrix(prob, config, Some(&start))?;
    fit.iterations += iterations;
    Ok(fit)
}

/// Closed-form minimizer of `R(B) - lambda ||B||_F^2` for the
/// symmetric-vectorization design with `n = m(m+1)/2` responses, given
/// `Upsilon = X*(Y)`.
pub fn denoise_matrix_closed_form(upsilon: &HermitianMatrix, lambda: f64, n: usize) -> Result<SpectralEstimate> {
    if !(lambda >= 0.0) {
        return invalid("lambda must be nonnegative");
    }
    if n == 0 {
        return invalid("n must be positive");
    }
    let nl = n as f64 * lambda;
    if nl >= 1.0 {
        let (_, vectors) = upsilon.eigh()?;
        let m = upsilon.dim();
        let mut values = vec![0.0; m];
        values[0] = 1.0;
        return Ok(SpectralEstimate::from_parts(values, vectors));
    }
    spectral_simplex(&upsilon.scaled(1.0 / (1.0 - nl)), None)
}

/// A spectrally thresholded estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCandidate {
    pub tau: f64,
    /// Eigenvalues below `tau` set to zero; not renormalized.
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
}

impl SpectralCandidate {
    pub fn to_matrix(&self, parent: &SpectralEstimate) -> HermitianMatrix {
        HermitianMatrix::from_spectrum(&self.eigenvalues, parent.eigenvectors())
    }
}

/// One candidate per distinct positive eigenvalue, by descending rank.
pub fn spectral_threshold_candidates(estimate: &SpectralEstimate) -> Vec<SpectralCandidate> {
    let mut taus: Vec<f64> = estimate.eigenvalues().iter().copied().filter(|&v| v > SUPPORT_TOL).collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    taus.into_iter()
        .map(|tau| {
            let eigenvalues: Vec<f64> = estimate.eigenvalues().iter().map(|&v| if v >= tau { v } else { 0.0 }).collect();
            let rank = eigenvalues.iter().filter(|&&v| v > SUPPORT_TOL).count();
            SpectralCandidate { tau, eigenvalues, rank }
        })
        .collect()
}

/// The risk as a function of the eigenvalues with eigenvectors `U` held
/// fixed: design column `j` is `X(u_j u_j^H)`.
pub fn reduced_eigen_risk(prob: &TraceRegressionProblem, eigenvectors: &DMatrix<C64>) -> Result<QuadraticRisk> {
    let m = prob.dim();
    if eigenvectors.nrows() != m {
        return invalid("eigenvectors do not match the operator dimension");
    }
    let n = prob.len();
    let mut design = DMatrix::zeros(n, eigenvectors.ncols());
    for j in 0..eigenvectors.ncols() {
        let u: DVector<C64> = eigenvectors.column(j).into_owned();
        design.set_column(j, &prob.apply(&restrict(prob, HermitianMatrix::outer(&u))));
    }
    crate::risk::build_regression_risk(&design, prob.responses())
}

/// Refits the eigenvalues of `pilot` with its eigenvectors fixed, penalized by
/// `lambda <w, phi>` with `w_j = 1 / phi_j` (infinite at zero eigenvalues).
pub fn weighted_l1_eigen(
    prob: &TraceRegressionProblem,
    pilot: &SpectralEstimate,
    lambda: f64,
    config: &SolverConfig,
) -> Result<Fit<SpectralEstimate>> {
    let weights = DVector::from_iterator(
        pilot.dim(),
        pilot.eigenvalues().iter().map(|&v| if v > 1e-12 { 1.0 / v } else { f64::INFINITY }),
    );
    eigen_refit(prob, pilot.eigenvectors(), &weights, lambda, config)
}

pub(crate) fn eigen_refit(
    prob: &TraceRegressionProblem,
    vectors: &DMatrix<C64>,
    weights: &DVector<f64>,
    lambda: f64,
    config: &SolverConfig,
) -> Result<Fit<SpectralEstimate>> {
    if weights.iter().all(|w| !w.is_finite()) {
        return invalid("all eigenvalues are zero");
    }
    let risk = reduced_eigen_risk(prob, vectors)?;
    let fit = weighted_l1_with_weights(&risk, lambda, weights, config)?;
    let phi = fit.estimate.as_slice().to_vec();
    let mut order: Vec<usize> = (0..phi.len()).collect();
    order.sort_by(|&a, &b| phi[b].total_cmp(&phi[a]));
    let values: Vec<f64> = order.iter().map(|&j| phi[j]).collect();
    let vecs = DMatrix::from_fn(vectors.nrows(), vectors.ncols(), |r, c| vectors[(r, order[c])]);
    Ok(Fit {
        estimate: SpectralEstimate::from_parts(values, vecs),
        objective: fit.objective,
        iterations: fit.iterations,
        converged: fit.converged,
        history: Vec::new(),
    })
}

/// Projected gradient onto unit-trace PSD matrices of rank at most `r`,
/// constant step `1 / L`.
pub fn iht_matrix(
    prob: &TraceRegressionProblem,
    r: SparsityBudget,
    config: &SolverConfig,
    init: Option<&HermitianMatrix>,
) -> Result<Fit<SpectralEstimate>> {
    config.validate()?;
    if r.get() > prob.dim() {
        return invalid(format!("rank budget {} exceeds dimension {}", r.get(), prob.dim()));
    }
    let step = 1.0 / prob.lipschitz().max(1e-12);
    let mut b = project(prob, &check_start(prob, init)?, Some(r))?;
    let mut value = prob.value(&b);
    for k in 1..=config.max_inner_iters {
        let next = project(prob, &HermitianMatrix::lincomb(1.0, &b, -step, &prob.gradient(&b)), Some(r))?;
        let next_value = prob.value(&next);
        let moved = HermitianMatrix::lincomb(1.0, &next, -1.0, &b).frobenius_norm();
        let change = (value - next_value).abs();
        b = next;
        value = next_value;
        if moved <= config.tol_iterate || change <= config.tol_obj * value.abs().max(1.0) * 1e-3 {
            return spectral_fit(&b, value, k, true);
        }
    }
    spectral_fit(&b, value, config.max_inner_iters, false)
}

/// Trace-penalized least squares over the PSD cone, divided by its trace.
pub fn nuclear_normalize(prob: &TraceRegressionProblem, lambda: f64, config: &SolverConfig) -> Result<Fit<SpectralEstimate>> {
    config.validate()?;
    if !(lambda >= 0.0) {
        return invalid("lambda must be nonnegative");
    }
    let m = prob.dim();
    let shift = HermitianMatrix::identity(m).scaled(lambda);
    let res = apg(
        HermitianMatrix::zeros(m),
        |b| prob.value(b) + lambda * b.trace(),
        |b| HermitianMatrix::lincomb(1.0, &prob.gradient(b), 1.0, &shift),
        |v| project_psd_cone(&restrict(prob, v.clone())).map(|p| restrict(prob, p)),
        prob.lipschitz(),
        ApgOptions::from_config(config),
    )?;
    let trace = res.point.trace();
    if !(trace > SUPPORT_TOL) {
        return Err(Error::DegenerateNormalization);
    }
    let normalized = res.point.scaled(1.0 / trace);
    let (values, vectors) = normalized.eigh()?;
    let values: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
    let total: f64 = values.iter().sum();
    let values: Vec<f64> = values.into_iter().map(|v| v / total).collect();
    let estimate = SpectralEstimate::from_parts(values, vectors);
    Ok(Fit {
        objective: prob.value(&estimate.to_matrix()),
        estimate,
        iterations: res.iterations,
        converged: res.converged,
        history: Vec::new(),
    })
}
