use nalgebra::{DMatrix, DVector};

use super::basic::erm_with;
use super::lp::{dantzig_violation, Polytope};
use crate::error::{invalid, Error, Result};
use crate::geometry::{project_simplex, SimplexVector};
use crate::optim::{apg, inner_step_tol, ApgOptions, Fit, SolverConfig};
use crate::risk::QuadraticRisk;

/// Success threshold for the feasibility residual `F`.
const FEASIBLE_RESIDUAL: f64 = 1e-12;
/// Constraint violation tolerated on iterates of the Dantzig-type solver.
const DANTZIG_VIOLATION: f64 = 1e-8;

/// `F(b) = sum_j (|grad_j R(b)| - lambda)_+^2`.
pub fn feasibility_residual(risk: &QuadraticRisk, beta: &DVector<f64>, lambda: f64) -> f64 {
    risk.gradient(beta)
        .iter()
        .map(|g| (g.abs() - lambda).max(0.0).powi(2))
        .sum()
}

fn residual_gradient(risk: &QuadraticRisk, beta: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let h = risk
        .gradient(beta)
        .map(|g| (g.abs() - lambda).max(0.0) * g.signum());
    risk.q() * h * 4.0
}

/// A point of `D(lambda) = {b in simplex : ||grad R(b)||_inf <= lambda}`.
///
/// Runs ERM first (its minimizers lie in `D(0)` whenever that set is
/// nonempty), then projected gradient on `F`. If `F` still exceeds `1e-12` a
/// linear-programming phase decides feasibility exactly.
pub fn find_feasible(
    risk: &QuadraticRisk,
    lambda: f64,
    config: &SolverConfig,
    init: Option<&SimplexVector>,
) -> Result<Fit<SimplexVector>> {
    config.validate()?;
    if !(lambda >= 0.0) {
        return invalid("lambda must be nonnegative");
    }
    let start = match init {
        Some(b) if b.len() == risk.dim() => b.clone(),
        Some(_) => return invalid("initial point does not match the risk dimension"),
        None => SimplexVector::uniform(risk.dim()),
    };
    let done = |b: SimplexVector, iterations: usize| {
        let objective = feasibility_residual(risk, b.as_vector(), lambda);
        Fit { estimate: b, objective, iterations, converged: true, history: Vec::new() }
    };
    if feasibility_residual(risk, start.as_vector(), lambda) <= FEASIBLE_RESIDUAL {
        return Ok(done(start, 0));
    }
    let opts = ApgOptions::from_config(config);
    let erm_fit = erm_with(risk, start, opts)?;
    let mut iterations = erm_fit.iterations;
    let mut beta = erm_fit.estimate;
    if feasibility_residual(risk, beta.as_vector(), lambda) <= FEASIBLE_RESIDUAL {
        return Ok(done(beta, iterations));
    }
    let lip = 2.0 * risk.lipschitz() * risk.lipschitz();
    let res = apg(
        beta.clone().into_inner(),
        |b| feasibility_residual(risk, b, lambda),
        |b| residual_gradient(risk, b, lambda),
        |v| project_simplex(v).map(SimplexVector::into_inner),
        lip,
        ApgOptions { step_tol: 0.0, obj_tol: 0.0, ..opts },
    )?;
    iterations += res.iterations;
    beta = SimplexVector::from_projection(res.point);
    if res.value <= FEASIBLE_RESIDUAL {
        return Ok(done(beta, iterations));
    }
    // Exact phase: any vertex of the polytope will do.
    let poly = Polytope::dantzig(risk, lambda)?;
    match poly.maximize(beta.as_vector())? {
        Some(b) if feasibility_residual(risk, &b, lambda) <= FEASIBLE_RESIDUAL => {
            Ok(done(SimplexVector::from_projection(b), iterations))
        }
        Some(b) => Err(Error::EmptyFeasibleSet { residual: feasibility_residual(risk, &b, lambda) }),
        None => Err(Error::EmptyFeasibleSet { residual: res.value }),
    }
}

/// Minimizes `R(b) - lambda ||b||^2` over the simplex by the convex-concave
/// procedure: each step solves `min R(b) - 2 lambda <b_k, b>` from `b_k`.
///
/// `history` holds the objective at the initial point and after every accepted
/// step; it strictly decreases. Stops once a step moves less than
/// `tol_iterate`. For `lambda >= lipschitz / 2` the objective is concave and
/// the best vertex is returned directly.
pub fn neg_l2_erm(
    risk: &QuadraticRisk,
    lambda: f64,
    init: &SimplexVector,
    config: &SolverConfig,
) -> Result<Fit<SimplexVector>> {
    config.validate()?;
    if !(lambda >= 0.0) {
        return invalid("lambda must be nonnegative");
    }
    if init.len() != risk.dim() {
        return invalid("initial point does not match the risk dimension");
    }
    let objective = |b: &DVector<f64>| risk.value(b) - lambda * b.norm_squared();
    if lambda > 0.0 && lambda >= 0.5 * risk.lipschitz() * (1.0 - 1e-12) {
        // Concave objective: the minimum over the simplex sits at a vertex.
        let f0 = objective(init.as_vector());
        let (best, value) = (0..risk.dim())
            .map(|j| (j, objective(SimplexVector::vertex(risk.dim(), j).as_vector())))
            .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
        if !(value < f0) {
            return Ok(Fit { estimate: init.clone(), objective: f0, iterations: 0, converged: true, history: vec![f0] });
        }
        let estimate = SimplexVector::vertex(risk.dim(), best);
        return Ok(Fit { estimate, objective: value, iterations: 1, converged: true, history: vec![f0, value] });
    }
    let mut opts = ApgOptions::from_config(config);
    let mut beta = init.clone();
    let mut f = objective(beta.as_vector());
    let mut history = vec![f];
    let mut inner_ok = true;
    let mut last_step = f64::INFINITY;
    for k in 1..=config.max_outer_iters {
        opts.step_tol = inner_step_tol(config, last_step);
        let sub = risk.shifted(&(beta.as_vector() * lambda))?;
        let fit = erm_with(&sub, beta.clone(), opts)?;
        inner_ok &= fit.converged;
        let f_next = objective(fit.estimate.as_vector());
        if !(f_next < f) {
            if opts.step_tol > config.tol_iterate {
                // No progress under a loose inner solve: tighten and retry.
                last_step = 0.0;
                continue;
            }
            return Ok(Fit { estimate: beta, objective: f, iterations: k, converged: inner_ok, history });
        }
        let step = (fit.estimate.as_vector() - beta.as_vector()).norm();
        last_step = step;
        beta = fit.estimate;
        f = f_next;
        history.push(f);
        if step <= config.tol_iterate && opts.step_tol <= config.tol_iterate {
            return Ok(Fit { estimate: beta, objective: f, iterations: k, converged: inner_ok, history });
        }
    }
    Ok(Fit {
        estimate: beta,
        objective: f,
        iterations: config.max_outer_iters,
        converged: false,
        history,
    })
}

/// Minimizes `-||b||^2` over `D(lambda)` by the convex-concave procedure:
/// each step maximizes `<b_k, b>` over `D(lambda)`, a linear program.
///
/// An infeasible `init` is replaced by the point of `D(lambda)` maximizing `<init, b>`. Every iterate lies
/// in `D(lambda)` within `1e-8`, and `||b_k||` never decreases.
pub fn neg_l2_dantzig(
    risk: &QuadraticRisk,
    lambda: f64,
    init: &SimplexVector,
    config: &SolverConfig,
) -> Result<Fit<SimplexVector>> {
    config.validate()?;
    if !(lambda >= 0.0) {
        return invalid("lambda must be nonnegative");
    }
    if init.len() != risk.dim() {
        return invalid("initial point does not match the risk dimension");
    }
    let poly = Polytope::dantzig(risk, lambda)?;
    let feasible = |b: &DVector<f64>| dantzig_violation(risk, b, lambda) <= DANTZIG_VIOLATION;
    let start = if feasible(init.as_vector()) {
        init.clone()
    } else {
        match poly.maximize(init.as_vector())? {
            Some(b) if feasible(&b) => SimplexVector::from_projection(b),
            _ => {
                return Err(Error::EmptyFeasibleSet {
                    residual: feasibility_residual(risk, init.as_vector(), lambda),
                })
            }
        }
    };
    dantzig_ascent(&poly, start, config, feasible)
}

/// CCCP ascent of `||b||^2` over a polytope, accepting only iterates that
/// pass `accept`.
fn dantzig_ascent(
    poly: &Polytope,
    start: SimplexVector,
    config: &SolverConfig,
    accept: impl Fn(&DVector<f64>) -> bool,
) -> Result<Fit<SimplexVector>> {
    let mut beta = start;
    let mut f = -beta.norm_squared();
    let mut history = vec![f];
    for k in 1..=config.max_outer_iters {
        let next = match poly.maximize(beta.as_vector())? {
            Some(b) if accept(&b) => b,
            _ => {
                return Ok(Fit { estimate: beta, objective: f, iterations: k, converged: false, history });
            }
        };
        let f_next = -next.norm_squared();
        if f_next > f {
            return Ok(Fit { estimate: beta, objective: f, iterations: k, converged: true, history });
        }
        let step = (&next - beta.as_vector()).norm();
        let decrease = f - f_next;
        beta = SimplexVector::from_projection(next);
        f = f_next;
        history.push(f);
        if step <= config.tol_iterate || decrease <= config.tol_obj * f.abs().max(1.0) * 1e-3 {
            return Ok(Fit { estimate: beta, objective: f, iterations: k, converged: true, history });
        }
    }
    Ok(Fit { estimate: beta, objective: f, iterations: config.max_outer_iters, converged: false, history })
}

/// Noiseless baseline: for each `j` maximize `b_j` over
/// `{b in simplex : X b = Y}` and keep the candidate whose maximized
/// coordinate is largest (lowest `j` on ties).
pub fn linf_max_noiseless(x: &DMatrix<f64>, y: &DVector<f64>, config: &SolverConfig) -> Result<Fit<SimplexVector>> {
    config.validate()?;
    let (n, p) = x.shape();
    if n == 0 || p == 0 || y.len() != n {
        return invalid("design and response shapes do not match");
    }
    let poly = Polytope::equalities(x, y);
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut worst_residual = f64::INFINITY;
    for j in 0..p {
        let mut w = DVector::zeros(p);
        w[j] = 1.0;
        let Some(b) = poly.maximize(&w)? else { continue };
        let residual = (x * &b - y).norm();
        if residual > 1e-6 {
            worst_residual = worst_residual.min(residual);
            continue;
        }
        if best.as_ref().is_none_or(|(v, _)| b[j] > *v) {
            best = Some((b[j], b));
        }
    }
    match best {
        Some((value, b)) => Ok(Fit {
            estimate: SimplexVector::from_projection(b),
            objective: value,
            iterations: p,
            converged: true,
            history: Vec::new(),
        }),
        None => Err(Error::EmptyFeasibleSet { residual: worst_residual }),
    }
}

/// Weighted l1 over the noiseless feasible set: minimizes `sum_j b_j / pilot_j`
/// over `{b in simplex : X b = Y}`, with coordinates outside the pilot's
/// support fixed to zero.
pub fn weighted_l1_noiseless(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    pilot: &SimplexVector,
    config: &SolverConfig,
) -> Result<Fit<SimplexVector>> {
    config.validate()?;
    let (n, p) = x.shape();
    if n == 0 || y.len() != n || pilot.len() != p {
        return invalid("design, response and pilot shapes do not match");
    }
    let support = pilot.support();
    let weights = DVector::from_iterator(support.len(), support.iter().map(|&j| -1.0 / pilot.as_slice()[j]));
    let poly = Polytope::equalities(&x.select_columns(&support), y);
    let Some(sub) = poly.maximize(&weights)? else {
        return Err(Error::EmptyFeasibleSet { residual: (x * pilot.as_vector() - y).norm() });
    };
    let mut b = DVector::zeros(p);
    for (k, &j) in support.iter().enumerate() {
        b[j] = sub[k];
    }
    Ok(Fit {
        objective: -weights.dot(&sub),
        estimate: SimplexVector::from_projection(b),
        iterations: 1,
        converged: true,
        history: Vec::new(),
    })
}
