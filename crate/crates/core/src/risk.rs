//! Quadratic risks over the simplex and the trace-regression risk over
//! unit-trace PSD matrices.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::hermitian::{HermitianMatrix, MeasurementOperator};
use crate::optim::power_iteration;
use crate::C64;

const POWER_SEED: u64 = 0x5eed_1a2b;

fn power_start(p: usize) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    DVector::from_fn(p, |_, _| rng.random_range(0.5..1.5))
}

/// `R(b) = b'Qb - 2c'b + d` with `Q` symmetric PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticRisk {
    q: DMatrix<f64>,
    c: DVector<f64>,
    d: f64,
    lipschitz: f64,
}

impl QuadraticRisk {
    /// Validates shapes and symmetry (within `1e-10`), symmetrizes `Q`, and
    /// estimates the gradient Lipschitz constant `lambda_max(2Q)`.
    pub fn new(q: DMatrix<f64>, c: DVector<f64>, d: f64) -> Result<Self> {
        let p = c.len();
        if p == 0 {
            return invalid("risk dimension must be positive");
        }
        if q.nrows() != p || q.ncols() != p {
            return invalid(format!("Q is {}x{} but c has length {p}", q.nrows(), q.ncols()));
        }
        if q.iter().chain(c.iter()).any(|x| !x.is_finite()) || !d.is_finite() {
            return invalid("risk has non-finite coefficients");
        }
        let asym = (&q - q.transpose()).norm();
        if asym > 1e-10 * q.norm().max(1.0) {
            return invalid(format!("Q is not symmetric (||Q - Q'||_F = {asym:.3e})"));
        }
        let q = (&q + q.transpose()) * 0.5;
        let lipschitz = 2.0 * power_iteration(power_start(p), |v| &q * v).max(0.0);
        Ok(Self { q, c, d, lipschitz })
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// Largest eigenvalue of `2Q`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn value(&self, beta: &DVector<f64>) -> f64 {
        let qb = &self.q * beta;
        beta.dot(&qb) - 2.0 * self.c.dot(beta) + self.d
    }

    pub fn gradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        (&self.q * beta - &self.c) * 2.0
    }

    fn check_dim(&self, beta: &DVector<f64>) -> Result<()> {
        if beta.len() != self.dim() {
            return invalid(format!("vector has length {}, risk has dimension {}", beta.len(), self.dim()));
        }
        Ok(())
    }

    /// Same `Q`, `c` replaced by `c + delta`.
    pub fn shifted(&self, delta: &DVector<f64>) -> Result<Self> {
        self.check_dim(delta)?;
        Ok(Self {
            q: self.q.clone(),
            c: &self.c + delta,
            d: self.d,
            lipschitz: self.lipschitz,
        })
    }

    /// The risk as a function of the coordinates in `support` only, the
    /// others held at zero.
    pub fn restrict(&self, support: &[usize]) -> Result<Self> {
        if support.is_empty() {
            return invalid("empty support");
        }
        if support.iter().any(|&j| j >= self.dim()) {
            return invalid("support index out of range");
        }
        let k = support.len();
        let q = DMatrix::from_fn(k, k, |a, b| self.q[(support[a], support[b])]);
        let c = DVector::from_fn(k, |a, _| self.c[support[a]]);
        Self::new(q, c, self.d)
    }
}

/// Value and gradient of a quadratic risk.
pub fn risk_eval(risk: &QuadraticRisk, beta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    risk.check_dim(beta)?;
    Ok((risk.value(beta), risk.gradient(beta)))
}

/// Squared-loss risk `||Y - X b||^2 / n`.
pub fn build_regression_risk(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<QuadraticRisk> {
    let n = x.nrows();
    if n == 0 || x.ncols() == 0 {
        return invalid("empty design");
    }
    if y.len() != n {
        return invalid(format!("design has {n} rows but response has length {}", y.len()));
    }
    let nf = n as f64;
    let xt = x.transpose();
    QuadraticRisk::new(&xt * x / nf, &xt * y / nf, y.norm_squared() / nf)
}

/// `L2` inner product of two Gaussian densities `(mu, sigma)`.
pub fn gaussian_overlap(theta_j: (f64, f64), theta_k: (f64, f64)) -> f64 {
    let var = theta_j.1 * theta_j.1 + theta_k.1 * theta_k.1;
    let diff = theta_j.0 - theta_k.0;
    (-diff * diff / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// A dictionary of univariate Gaussian densities.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDictionary {
    locations: Vec<f64>,
    bandwidths: Vec<f64>,
}

impl GaussianDictionary {
    pub fn new(locations: Vec<f64>, bandwidths: Vec<f64>) -> Result<Self> {
        if locations.len() != bandwidths.len() {
            return invalid("locations and bandwidths differ in length");
        }
        if locations.is_empty() {
            return invalid("empty dictionary");
        }
        if bandwidths.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return invalid("bandwidths must be positive");
        }
        if locations.iter().any(|m| !m.is_finite()) {
            return invalid("locations must be finite");
        }
        Ok(Self { locations, bandwidths })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn theta(&self, j: usize) -> (f64, f64) {
        (self.locations[j], self.bandwidths[j])
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    /// Density of element `j` at `x`.
    pub fn density(&self, j: usize, x: f64) -> f64 {
        let (mu, s) = self.theta(j);
        let z = (x - mu) / s;
        (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    }

    /// Mixture density `sum_j beta_j phi_j(x)`.
    pub fn mixture_density(&self, beta: &[f64], x: f64) -> f64 {
        beta.iter().enumerate().map(|(j, &b)| b * self.density(j, x)).sum()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let p = self.len();
        DMatrix::from_fn(p, p, |j, k| gaussian_overlap(self.theta(j), self.theta(k)))
    }
}

/// `||f_beta||^2 - 2 <beta, c>` with `c_j` the sample mean of `phi_j`.
pub fn build_density_risk(dict: &GaussianDictionary, samples: &[f64]) -> Result<QuadraticRisk> {
    if samples.is_empty() {
        return invalid("no samples");
    }
    let n = samples.len() as f64;
    let c = DVector::from_fn(dict.len(), |j, _| {
        samples.iter().map(|&x| dict.density(j, x)).sum::<f64>() / n
    });
    QuadraticRisk::new(dict.gram(), c, 0.0)
}

/// `b' Sigma b - tau mu' b`.
pub fn build_portfolio_risk(sigma: &DMatrix<f64>, mu: &DVector<f64>, tau: f64) -> Result<QuadraticRisk> {
    if !(tau >= 0.0) {
        return invalid("tau must be nonnegative");
    }
    QuadraticRisk::new(sigma.clone(), mu * (tau / 2.0), 0.0)
}

/// `Y_i = <X_i, B*> + eps_i`.
#[derive(Debug, Clone)]
pub struct TraceRegressionProblem {
    operators: Vec<MeasurementOperator>,
    responses: DVector<f64>,
    noise_sigma: f64,
    lipschitz: f64,
    real: bool,
}

impl TraceRegressionProblem {
    pub fn new(operators: Vec<MeasurementOperator>, responses: DVector<f64>, noise_sigma: f64) -> Result<Self> {
        if operators.is_empty() {
            return invalid("no measurements");
        }
        if operators.len() != responses.len() {
            return invalid(format!(
                "{} operators but {} responses",
                operators.len(),
                responses.len()
            ));
        }
        let m = operators[0].dim();
        if m == 0 || operators.iter().any(|x| x.dim() != m) {
            return invalid("operators must share a positive dimension");
        }
        if !(noise_sigma >= 0.0) || responses.iter().any(|y| !y.is_finite()) {
            return invalid("invalid responses or noise level");
        }
        let real = operators.iter().all(MeasurementOperator::is_real);
        let mut prob = Self { operators, responses, noise_sigma, lipschitz: 0.0, real };
        let start = prob.power_start();
        let n = prob.len() as f64;
        let top = power_iteration(start, |b| prob.adjoint_unchecked(&prob.apply(b)).scaled(2.0 / n));
        prob.lipschitz = top.max(0.0);
        Ok(prob)
    }

    fn power_start(&self) -> HermitianMatrix {
        let m = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
        let mut a = DMatrix::<C64>::zeros(m, m);
        for c in 0..m {
            for r in 0..m {
                let im = if self.real { 0.0 } else { rng.random_range(-1.0..1.0) };
                a[(r, c)] = C64::new(rng.random_range(-1.0..1.0), im);
            }
        }
        HermitianMatrix::symmetrized(a)
    }

    pub fn dim(&self) -> usize {
        self.operators[0].dim()
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn operators(&self) -> &[MeasurementOperator] {
        &self.operators
    }

    pub fn responses(&self) -> &DVector<f64> {
        &self.responses
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    /// Largest eigenvalue of `B -> (2/n) X*(X(B))`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// True when every operator is real symmetric. The map then ignores the
    /// imaginary part of its argument and estimators work over real matrices.
    pub fn is_real(&self) -> bool {
        self.real
    }

    /// `X(B)_i = Re tr(X_i B)`.
    pub fn apply(&self, b: &HermitianMatrix) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.operators.iter().map(|x| x.apply(b)))
    }

    /// `X*(v) = sum_i v_i X_i`.
    pub fn adjoint(&self, v: &DVector<f64>) -> Result<HermitianMatrix> {
        if v.len() != self.len() {
            return invalid(format!("vector has length {}, expected {}", v.len(), self.len()));
        }
        Ok(self.adjoint_unchecked(v))
    }

    fn adjoint_unchecked(&self, v: &DVector<f64>) -> HermitianMatrix {
        let m = self.dim();
        let mut acc = DMatrix::<C64>::zeros(m, m);
        for (x, &w) in self.operators.iter().zip(v.iter()) {
            if w != 0.0 {
                x.accumulate(w, &mut acc);
            }
        }
        HermitianMatrix::symmetrized(acc)
    }

    fn check_dim(&self, b: &HermitianMatrix) -> Result<()> {
        if b.dim() != self.dim() {
            return invalid(format!("matrix is {}x{}, operators are {}x{}", b.dim(), b.dim(), self.dim(), self.dim()));
        }
        Ok(())
    }

    /// `||Y - X(B)||^2 / n`.
    pub fn value(&self, b: &HermitianMatrix) -> f64 {
        (&self.responses - self.apply(b)).norm_squared() / self.len() as f64
    }

    /// `(2/n) X*(X(B) - Y)`.
    pub fn gradient(&self, b: &HermitianMatrix) -> HermitianMatrix {
        let resid = self.apply(b) - &self.responses;
        self.adjoint_unchecked(&resid).scaled(2.0 / self.len() as f64)
    }

    pub(crate) fn value_and_gradient(&self, b: &HermitianMatrix) -> (f64, HermitianMatrix) {
        let resid = self.apply(b) - &self.responses;
        let n = self.len() as f64;
        (resid.norm_squared() / n, self.adjoint_unchecked(&resid).scaled(2.0 / n))
    }
}

/// Value and gradient of the trace-regression risk.
pub fn trace_risk_eval(prob: &TraceRegressionProblem, b: &HermitianMatrix) -> Result<(f64, HermitianMatrix)> {
    prob.check_dim(b)?;
    Ok(prob.value_and_gradient(b))
}
