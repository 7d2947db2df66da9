use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::geometry::{project_simplex, project_sparse_simplex, support_of, SimplexVector, SparsityBudget};
use crate::optim::{apg, ApgOptions, Fit, SolverConfig};
use crate::risk::{build_regression_risk, QuadraticRisk};
use crate::SUPPORT_TOL;

fn check_init(risk: &QuadraticRisk, init: Option<&SimplexVector>) -> Result<SimplexVector> {
    match init {
        Some(b) if b.len() != risk.dim() => {
            invalid(format!("initial point has length {}, risk has dimension {}", b.len(), risk.dim()))
        }
        Some(b) => Ok(b.clone()),
        None => Ok(SimplexVector::uniform(risk.dim())),
    }
}

/// Minimizes `risk` over the simplex by accelerated projected gradient.
pub fn erm(risk: &QuadraticRisk, config: &SolverConfig, init: Option<&SimplexVector>) -> Result<Fit<SimplexVector>> {
    config.validate()?;
    let start = check_init(risk, init)?;
    erm_with(risk, start, ApgOptions::from_config(config))
}

pub(crate) fn erm_with(risk: &QuadraticRisk, start: SimplexVector, opts: ApgOptions) -> Result<Fit<SimplexVector>> {
    let res = apg(
        start.into_inner(),
        |b| risk.value(b),
        |b| risk.gradient(b),
        |v| project_simplex(v).map(SimplexVector::into_inner),
        risk.lipschitz(),
        opts,
    )?;
    Ok(Fit {
        estimate: SimplexVector::from_projection(res.point),
        objective: res.value,
        iterations: res.iterations,
        converged: res.converged,
        history: Vec::new(),
    })
}

/// Closed-form minimizer of `||Z - b||^2 / n - lambda ||b||^2` over the simplex.
pub fn denoise_closed_form(z: &DVector<f64>, lambda: f64) -> Result<SimplexVector> {
    let n = z.len();
    if n == 0 {
        return invalid("empty observation");
    }
    if !(lambda >= 0.0) {
        return invalid("lambda must be nonnegative");
    }
    let nl = n as f64 * lambda;
    if nl >= 1.0 {
        if z.iter().any(|v| !v.is_finite()) {
            return invalid("observation has non-finite entries");
        }
        let mut best = 0;
        for j in 1..n {
            if z[j] > z[best] {
                best = j;
            }
        }
        return Ok(SimplexVector::vertex(n, best));
    }
    project_simplex(&(z / (1.0 - nl)))
}

/// One hard-thresholded version of an estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCandidate {
    pub tau: f64,
    /// Entries below `tau` set to zero; not renormalized.
    pub estimate: DVector<f64>,
    pub support: Vec<usize>,
}

/// One candidate per distinct positive entry of `beta`, by descending support size.
pub fn threshold_candidates(beta: &SimplexVector) -> Vec<ThresholdCandidate> {
    let mut taus: Vec<f64> = beta.as_slice().iter().copied().filter(|&v| v > SUPPORT_TOL).collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    taus.into_iter()
        .map(|tau| {
            let estimate = beta.as_vector().map(|v| if v >= tau { v } else { 0.0 });
            let support = support_of(&estimate);
            ThresholdCandidate { tau, estimate, support }
        })
        .collect()
}

/// `R(b) + lambda <w, b>` with `w_j = 1 / pilot_j` on the pilot's support and
/// coordinates outside it fixed at zero.
pub fn weighted_l1(
    risk: &QuadraticRisk,
    lambda: f64,
    pilot: &SimplexVector,
    config: &SolverConfig,
) -> Result<Fit<SimplexVector>> {
    if pilot.len() != risk.dim() {
        return invalid("pilot estimate does not match the risk dimension");
    }
    let weights = pilot.as_vector().map(|b| if b > 1e-12 { 1.0 / b } else { f64::INFINITY });
    weighted_l1_with_weights(risk, lambda, &weights, config)
}

/// Weighted `l1` with explicit weights; infinite weights pin coordinates at zero.
pub fn weighted_l1_with_weights(
    risk: &QuadraticRisk,
    lambda: f64,
    weights: &DVector<f64>,
    config: &SolverConfig,
) -> Result<Fit<SimplexVector>> {
    config.validate()?;
    if !(lambda >= 0.0) {
        return invalid("lambda must be nonnegative");
    }
    if weights.len() != risk.dim() {
        return invalid("weights do not match the risk dimension");
    }
    let support: Vec<usize> = (0..weights.len()).filter(|&j| weights[j].is_finite()).collect();
    if support.is_empty() {
        return invalid("all weights are infinite");
    }
    let sub = risk.restrict(&support)?;
    let shift = DVector::from_fn(support.len(), |a, _| -0.5 * lambda * weights[support[a]]);
    let sub = sub.shifted(&shift)?;
    let fit = erm_with(&sub, SimplexVector::uniform(support.len()), ApgOptions::from_config(config))?;
    let p = risk.dim();
    Ok(fit.map(|b| {
        let mut full = DVector::zeros(p);
        for (a, &j) in support.iter().enumerate() {
            full[j] = b.as_vector()[a];
        }
        SimplexVector::from_projection(full)
    }))
}

/// Step-size rule for iterative hard thresholding.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StepRule {
    /// `1 / L` with `L` the gradient Lipschitz constant.
    #[default]
    Constant,
    /// Start at `1 / L` scaled up by 2 each iteration, halve until the risk decreases.
    Backtracking,
}

/// Projected gradient onto simplex vectors with at most `s` nonzeros.
pub fn iht(
    risk: &QuadraticRisk,
    s: SparsityBudget,
    config: &SolverConfig,
    init: Option<&SimplexVector>,
    rule: StepRule,
) -> Result<Fit<SimplexVector>> {
    config.validate()?;
    if s.get() > risk.dim() {
        return invalid(format!("sparsity {} exceeds dimension {}", s.get(), risk.dim()));
    }
    let start = check_init(risk, init)?;
    let base = 1.0 / risk.lipschitz().max(1e-12);
    let mut beta = project_sparse_simplex(start.as_vector(), s)?.into_inner();
    let mut value = risk.value(&beta);
    let mut alpha = base;
    for k in 1..=config.max_inner_iters {
        let grad = risk.gradient(&beta);
        let (next, next_value) = match rule {
            StepRule::Constant => {
                let next = project_sparse_simplex(&(&beta - &grad * base), s)?.into_inner();
                let v = risk.value(&next);
                (next, v)
            }
            StepRule::Backtracking => {
                alpha *= 2.0;
                loop {
                    let next = project_sparse_simplex(&(&beta - &grad * alpha), s)?.into_inner();
                    let v = risk.value(&next);
                    if v <= value || alpha <= base {
                        break (next, v);
                    }
                    alpha = (alpha * 0.5).max(base);
                }
            }
        };
        let step = (&next - &beta).norm();
        let change = (value - next_value).abs();
        beta = next;
        value = next_value;
        if step <= config.tol_iterate || change <= config.tol_obj * value.abs().max(1.0) * 1e-3 {
            return Ok(Fit {
                estimate: SimplexVector::from_projection(beta),
                objective: value,
                iterations: k,
                converged: true,
                history: Vec::new(),
            });
        }
    }
    Ok(Fit {
        estimate: SimplexVector::from_projection(beta),
        objective: value,
        iterations: config.max_inner_iters,
        converged: false,
        history: Vec::new(),
    })
}

/// Nonnegative `l1`-penalized least squares followed by division by the sum.
pub fn naive_l1_normalize(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    config: &SolverConfig,
) -> Result<Fit<SimplexVector>> {
    let risk = build_regression_risk(x, y)?;
    naive_l1_normalize_risk(&risk, lambda, config)
}

/// [`naive_l1_normalize`] for an arbitrary quadratic risk.
pub fn naive_l1_normalize_risk(risk: &QuadraticRisk, lambda: f64, config: &SolverConfig) -> Result<Fit<SimplexVector>> {
    config.validate()?;
    if !(lambda >= 0.0) {
        return invalid("lambda must be nonnegative");
    }
    // lambda 1'b enters as a shift of c by -lambda / 2.
    let penalized = risk.shifted(&DVector::from_element(risk.dim(), -0.5 * lambda))?;
    let res = apg(
        DVector::zeros(risk.dim()),
        |b| penalized.value(b),
        |b| penalized.gradient(b),
        |v: &DVector<f64>| Ok::<_, Error>(v.map(|x| x.max(0.0))),
        risk.lipschitz(),
        ApgOptions::from_config(config),
    )?;
    let total = res.point.sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateNormalization);
    }
    let beta = SimplexVector::from_projection(res.point / total);
    Ok(Fit {
        objective: risk.value(beta.as_vector()),
        estimate: beta,
        iterations: res.iterations,
        converged: res.converged,
        history: Vec::new(),
    })
}
