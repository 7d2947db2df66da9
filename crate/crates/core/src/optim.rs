//! Solver configuration and the accelerated projected-gradient engine shared
//! by the vector and matrix estimators.

use nalgebra::DVector;

use crate::hermitian::HermitianMatrix;

/// Iteration budgets and tolerances shared by every iterative estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Outer iterations: DC (CCCP) steps, augmented-Lagrangian rounds.
    pub max_outer_iters: usize,
    /// Inner projected-gradient iterations per subproblem.
    pub max_inner_iters: usize,
    /// Relative objective change below which an iterative method counts as stalled.
    pub tol_obj: f64,
    /// l2 iterate change (gradient-mapping step) that ends an inner loop.
    pub tol_iterate: f64,
    /// Penalty multiplier used by feasibility continuation.
    pub penalty_growth: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 500,
            max_inner_iters: 5000,
            tol_obj: 1e-10,
            tol_iterate: 1e-9,
            penalty_growth: 10.0,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.tol_obj > 0.0 && self.tol_iterate > 0.0) {
            return crate::error::invalid("solver tolerances must be positive");
        }
        if !(self.penalty_growth > 1.0) {
            return crate::error::invalid("penalty growth must exceed one");
        }
        Ok(())
    }
}

/// Result of an iterative estimator.
#[derive(Debug, Clone)]
pub struct Fit<T> {
    pub estimate: T,
    /// Objective of the problem the estimator solves, at `estimate`.
    pub objective: f64,
    pub iterations: usize,
    /// False when a budget ran out before the stopping rule was met.
    pub converged: bool,
    /// Objective after each outer iteration, starting with the initial point
    /// (DC solvers only; empty otherwise).
    pub history: Vec<f64>,
}

impl<T> Fit<T> {
    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Fit<U> {
        Fit {
            estimate: f(self.estimate),
            objective: self.objective,
            iterations: self.iterations,
            converged: self.converged,
            history: self.history,
        }
    }
}

/// Linear-space operations needed by the gradient engine.
pub trait Iterate: Clone {
    /// `a * x + b * y`
    fn lincomb(a: f64, x: &Self, b: f64, y: &Self) -> Self;
    fn dot(&self, other: &Self) -> f64;

    fn dist(&self, other: &Self) -> f64 {
        let d = Self::lincomb(1.0, self, -1.0, other);
        d.dot(&d).sqrt()
    }
}

impl Iterate for DVector<f64> {
    fn lincomb(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        x * a + y * b
    }

    fn dot(&self, other: &Self) -> f64 {
        nalgebra::Matrix::dot(self, other)
    }
}

impl Iterate for HermitianMatrix {
    fn lincomb(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        HermitianMatrix::lincomb(a, x, b, y)
    }

    fn dot(&self, other: &Self) -> f64 {
        self.inner(other)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ApgOptions {
    pub max_iters: usize,
    /// Stop once `||x_{k+1} - y_k|| <= step_tol`.
    pub step_tol: f64,
    /// Secondary stop: relative objective change over `window` accepted iterations.
    pub obj_tol: f64,
    pub window: usize,
    pub accelerate: bool,
}

impl ApgOptions {
    pub fn from_config(config: &SolverConfig) -> Self {
        Self {
            max_iters: config.max_inner_iters,
            step_tol: config.tol_iterate,
            obj_tol: config.tol_obj * 1e-3,
            window: 50,
            accelerate: true,
        }
    }
}

/// Inner tolerance for convex-concave steps: a tenth of the previous outer
/// step, never looser than `1e-3` nor tighter than `tol_iterate`. Any warm
/// started monotone inner solve keeps the outer descent property.
pub(crate) fn inner_step_tol(config: &SolverConfig, last_outer_step: f64) -> f64 {
    (0.1 * last_outer_step).min(1e-3).max(config.tol_iterate)
}

pub(crate) struct ApgResult<T> {
    pub point: T,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Monotone accelerated projected gradient with function-value restart.
///
/// `x0` must already be feasible. The returned objective never exceeds the
/// objective at `x0`. Projection errors abort the run.
pub(crate) fn apg<T, F, G, P, E>(
    x0: T,
    value: F,
    grad: G,
    mut project: P,
    lipschitz: f64,
    opts: ApgOptions,
) -> Result<ApgResult<T>, E>
where
    T: Iterate,
    F: Fn(&T) -> f64,
    G: Fn(&T) -> T,
    P: FnMut(&T) -> Result<T, E>,
{
    let step = 1.0 / lipschitz.max(1e-300);
    let mut x = x0;
    let mut fx = value(&x);
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut recent: std::collections::VecDeque<f64> = std::collections::VecDeque::new();
    recent.push_back(fx);

    for k in 1..=opts.max_iters {
        let g = grad(&y);
        let z = project(&T::lincomb(1.0, &y, -step, &g))?;
        let fz = value(&z);
        let gm_step = z.dist(&y);

        if fz <= fx {
            // Gradient restart: momentum pointing against the last step.
            let restart = opts.accelerate
                && T::lincomb(1.0, &y, -1.0, &z).dot(&T::lincomb(1.0, &z, -1.0, &x)) > 0.0;
            let x_prev = x;
            x = z;
            if restart {
                t = 1.0;
                y = x.clone();
            } else if opts.accelerate {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let beta = (t - 1.0) / t_next;
                y = T::lincomb(1.0 + beta, &x, -beta, &x_prev);
                t = t_next;
            } else {
                y = x.clone();
            }
            let improvement = fx - fz;
            fx = fz;
            recent.push_back(fx);
            if recent.len() > opts.window + 1 {
                recent.pop_front();
            }
            if gm_step <= opts.step_tol {
                return Ok(ApgResult { point: x, value: fx, iterations: k, converged: true });
            }
            if recent.len() == opts.window + 1 {
                let drop = recent.front().unwrap() - fx;
                if drop <= opts.obj_tol * fx.abs().max(1.0) && improvement >= 0.0 {
                    return Ok(ApgResult { point: x, value: fx, iterations: k, converged: true });
                }
            }
        } else {
            // Objective went up: restart momentum from the last accepted point.
            if !opts.accelerate || (t == 1.0 && gm_step <= opts.step_tol) {
                return Ok(ApgResult { point: x, value: fx, iterations: k, converged: true });
            }
            t = 1.0;
            y = x.clone();
        }
    }
    Ok(ApgResult { point: x, value: fx, iterations: opts.max_iters, converged: false })
}

/// Largest eigenvalue of a self-adjoint PSD operator by power iteration
/// (relative tolerance 1e-8, at most 10 000 iterations).
pub(crate) fn power_iteration<T: Iterate>(start: T, apply: impl Fn(&T) -> T) -> f64 {
    let norm = start.dot(&start).sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    let mut v = T::lincomb(1.0 / norm, &start, 0.0, &start);
    let mut estimate = 0.0;
    for _ in 0..10_000 {
        let w = apply(&v);
        let rayleigh = v.dot(&w);
        let wn = w.dot(&w).sqrt();
        if wn == 0.0 {
            return 0.0;
        }
        v = T::lincomb(1.0 / wn, &w, 0.0, &w);
        if (rayleigh - estimate).abs() <= 1e-8 * rayleigh.abs() {
            return rayleigh;
        }
        estimate = rayleigh;
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn power_iteration_finds_top_eigenvalue() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.0, 0.0, 0.0, 1.0]);
        let top = a.clone().symmetric_eigen().eigenvalues.max();
        let est = power_iteration(DVector::from_vec(vec![1.0, 0.3, 0.2]), |v| &a * v);
        assert!((est - top).abs() < 1e-6 * top);
    }

    #[test]
    fn apg_solves_box_quadratic() {
        // min ||x - (2, -1)||^2 over x >= 0 -> (2, 0)
        let target = DVector::from_vec(vec![2.0, -1.0]);
        let res = apg(
            DVector::from_vec(vec![0.0, 0.0]),
            |x: &DVector<f64>| (x - &target).norm_squared(),
            |x: &DVector<f64>| (x - &target) * 2.0,
            |x: &DVector<f64>| Ok::<_, ()>(x.map(|v| v.max(0.0))),
            2.0,
            ApgOptions::from_config(&SolverConfig::default()),
        )
        .unwrap();
        assert!(res.converged);
        assert!((res.point[0] - 2.0).abs() < 1e-9 && res.point[1].abs() < 1e-12);
    }
}
