//! Linear programs over the simplex intersected with linear constraints.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::risk::QuadraticRisk;

/// `{b in simplex : lower <= A b <= upper}`.
#[derive(Debug, Clone)]
pub(crate) struct Polytope {
    rows: DMatrix<f64>,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl Polytope {
    /// `D(lambda) = {b in simplex : ||2(Qb - c)||_inf <= lambda}`.
    ///
    /// At `lambda = 0` the equalities `Qb = c` are rank deficient whenever
    /// `n < p`; they are replaced by the equivalent well-conditioned system
    /// `v_k' b = v_k' c / e_k` over the eigenpairs of `Q` with `e_k > 0`.
    /// (Equivalent when `c` lies in the range of `Q`, as for every
    /// least-squares risk; the caller verifies the gradient certificate.)
    pub fn dantzig(risk: &QuadraticRisk, lambda: f64) -> Result<Self> {
        if lambda > 0.0 {
            let rows = risk.q() * 2.0;
            let g0 = risk.c() * 2.0;
            return Ok(Self {
                rows,
                lower: g0.map(|v| v - lambda),
                upper: g0.map(|v| v + lambda),
            });
        }
        let eig = risk.q().clone().symmetric_eigen();
        let top = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b));
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&k| eig.eigenvalues[k] > 1e-10 * top.max(f64::MIN_POSITIVE))
            .collect();
        let p = risk.dim();
        let rows = DMatrix::from_fn(keep.len(), p, |r, j| eig.eigenvectors[(j, keep[r])]);
        let rhs = DVector::from_fn(keep.len(), |r, _| {
            let k = keep[r];
            eig.eigenvectors.column(k).dot(risk.c()) / eig.eigenvalues[k]
        });
        Ok(Self { rows, lower: rhs.clone(), upper: rhs })
    }

    /// `{b in simplex : A b = y}`.
    pub fn equalities(a: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        Self { rows: a.clone(), lower: y.clone(), upper: y.clone() }
    }

    /// Maximizes `w' b` over the polytope. `Ok(None)` when it is empty.
    pub fn maximize(&self, w: &DVector<f64>) -> Result<Option<DVector<f64>>> {
        let p = self.rows.ncols();
        let mut problem = Problem::new(OptimizationDirection::Maximize);
        let vars: Vec<_> = (0..p).map(|j| problem.add_var(w[j], (0.0, 1.0))).collect();
        let all: Vec<_> = vars.iter().map(|&v| (v, 1.0)).collect();
        problem.add_constraint(&all, ComparisonOp::Eq, 1.0);
        for r in 0..self.rows.nrows() {
            let terms: Vec<_> = (0..p)
                .filter(|&j| self.rows[(r, j)] != 0.0)
                .map(|j| (vars[j], self.rows[(r, j)]))
                .collect();
            if self.lower[r] == self.upper[r] {
                problem.add_constraint(&terms, ComparisonOp::Eq, self.lower[r]);
            } else {
                problem.add_constraint(&terms, ComparisonOp::Ge, self.lower[r]);
                problem.add_constraint(&terms, ComparisonOp::Le, self.upper[r]);
            }
        }
        match problem.solve() {
            Ok(sol) => {
                let mut b = DVector::from_fn(p, |j, _| sol[vars[j]].max(0.0));
                let total = b.sum();
                if total > 0.0 {
                    b /= total;
                }
                Ok(Some(b))
            }
            Err(microlp::Error::Infeasible) => Ok(None),
            Err(e) => Err(Error::Numerical(format!("linear program failed: {e}"))),
        }
    }
}

/// `max_j (|grad_j R(b)| - lambda)_+`: how far `b` is from `D(lambda)` in gradient units.
pub fn dantzig_violation(risk: &QuadraticRisk, beta: &DVector<f64>, lambda: f64) -> f64 {
    risk.gradient(beta)
        .iter()
        .fold(0.0_f64, |acc, g| acc.max(g.abs() - lambda))
}
