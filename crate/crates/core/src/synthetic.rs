//! Seeded generators for every experimental ingredient, plus CSV ingestion of
//! weekly returns.
//!
//! All randomness comes from ChaCha8 streams keyed by a 64-bit seed, so every
//! generator is a pure function of its arguments on every platform.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::geometry::{project_lower_bounded_simplex, SimplexVector};
use crate::hermitian::{HermitianMatrix, MeasurementOperator};
use crate::risk::{gaussian_overlap, GaussianDictionary, TraceRegressionProblem};
use crate::C64;

/// One step of the SplitMix64 sequence.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for `(grid point, trial)` under a base seed.
pub fn stream_seed(seed: u64, grid_index: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ grid_index) ^ trial)
}

/// Derives an independent seed for a named sub-stream (design, noise, ...).
pub fn substream(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `n x p` matrix of independent standard normals.
pub fn gaussian_design(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    // Row-major fill so the i-th row depends only on the seed and i.
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            x[(i, j)] = normal(&mut r);
        }
    }
    x
}

/// `n` independent `N(0, sigma^2)` draws.
pub fn gaussian_noise(n: usize, sigma: f64, seed: u64) -> DVector<f64> {
    let mut r = rng(seed);
    DVector::from_fn(n, |_, _| sigma * normal(&mut r))
}

/// Uniformly random support of size `s`, uniform magnitudes, normalized;
/// with `b_min > 0` the support entries are projected onto
/// `{b >= b_min, sum b = 1}`.
pub fn sparse_simplex_target(p: usize, s: usize, b_min: f64, seed: u64) -> Result<SimplexVector> {
    if s == 0 || s > p {
        return invalid(format!("sparsity {s} outside 1..={p}"));
    }
    if !(b_min >= 0.0) {
        return invalid("b_min must be nonnegative");
    }
    if s as f64 * b_min > 1.0 + crate::FEASIBILITY_TOL {
        return Err(Error::InfeasibleConstraint(format!("{s} entries of at least {b_min} exceed unit mass")));
    }
    let mut r = rng(seed);
    let mut support = sample(&mut r, p, s).into_vec();
    support.sort_unstable();
    let values = DVector::from_fn(s, |_, _| r.random::<f64>());
    placed(p, &support, values, b_min)
}

fn placed(p: usize, support: &[usize], values: DVector<f64>, b_min: f64) -> Result<SimplexVector> {
    let total = values.sum();
    let sub = if total > 0.0 { values / total } else { DVector::from_element(support.len(), 1.0 / support.len() as f64) };
    let sub = if b_min > 0.0 { project_lower_bounded_simplex(&sub, b_min)?.into_inner() } else { sub };
    let mut full = DVector::zeros(p);
    for (a, &j) in support.iter().enumerate() {
        full[j] = sub[a];
    }
    SimplexVector::new(full)
}

/// Largest normalized overlap between two Gaussians of bandwidths from
/// `bandwidths` whose locations are `spacing` apart.
fn worst_overlap(bandwidths: &[f64], spacing: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for &a in bandwidths {
        for &b in bandwidths {
            let corr = gaussian_overlap((0.0, a), (spacing, b))
                / (gaussian_overlap((0.0, a), (0.0, a)) * gaussian_overlap((0.0, b), (0.0, b))).sqrt();
            worst = worst.max(corr);
        }
    }
    worst
}

/// Smallest location spacing at which every normalized overlap between
/// dictionary elements at different locations is at most `0.5`, for
/// bandwidths `1, .., k` (bisection, tolerance `1e-8`).
pub fn dictionary_spacing(k: usize) -> f64 {
    let bandwidths: Vec<f64> = (1..=k.max(1)).map(|v| v as f64).collect();
    let (mut lo, mut hi) = (0.0, 1.0);
    while worst_overlap(&bandwidths, hi) > 0.5 {
        hi *= 2.0;
    }
    while hi - lo > 1e-8 {
        let mid = 0.5 * (lo + hi);
        if worst_overlap(&bandwidths, mid) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// `p0` locations times `k` bandwidths `1, .., k`; element `(k-1) p0 + l`
/// sits at location `l` with bandwidth `k`. Locations are drawn
/// sequentially: `mu_1 ~ U[0, delta]`, `mu_{l+1} ~ U[mu_l + delta, mu_l + 2 delta]`.
pub fn gaussian_dictionary(p0: usize, k: usize, seed: u64) -> Result<GaussianDictionary> {
    if p0 == 0 || k == 0 {
        return invalid("dictionary needs at least one location and bandwidth");
    }
    let delta = dictionary_spacing(k);
    let mut r = rng(seed);
    let mut locs = Vec::with_capacity(p0);
    let mut mu = r.random_range(0.0..=delta);
    locs.push(mu);
    for _ in 1..p0 {
        mu = r.random_range(mu + delta..=mu + 2.0 * delta);
        locs.push(mu);
    }
    let mut locations = Vec::with_capacity(p0 * k);
    let mut bandwidths = Vec::with_capacity(p0 * k);
    for kk in 1..=k {
        for &l in &locs {
            locations.push(l);
            bandwidths.push(kk as f64);
        }
    }
    GaussianDictionary::new(locations, bandwidths)
}

/// Mixture weights over a `p0 x k` dictionary: `s` distinct locations, each
/// with a uniformly chosen bandwidth, uniform magnitudes, normalized, then
/// bounded below by `b_min`.
pub fn density_target(p0: usize, k: usize, s: usize, b_min: f64, seed: u64) -> Result<SimplexVector> {
    if s == 0 || s > p0 {
        return invalid(format!("sparsity {s} outside 1..={p0}"));
    }
    if s as f64 * b_min > 1.0 + crate::FEASIBILITY_TOL {
        return Err(Error::InfeasibleConstraint(format!("{s} entries of at least {b_min} exceed unit mass")));
    }
    let mut r = rng(seed);
    let locations = sample(&mut r, p0, s).into_vec();
    let mut support: Vec<usize> = locations.iter().map(|&l| r.random_range(0..k) * p0 + l).collect();
    support.sort_unstable();
    let values = DVector::from_fn(s, |_, _| r.random::<f64>());
    placed(p0 * k, &support, values, b_min)
}

/// `n` draws from the mixture `sum_j beta_j phi_j`.
pub fn sample_mixture(dict: &GaussianDictionary, beta: &SimplexVector, n: usize, seed: u64) -> Result<Vec<f64>> {
    if beta.len() != dict.len() {
        return invalid("weights do not match the dictionary");
    }
    let weights: Vec<f64> = beta.as_slice().iter().map(|w| w.max(0.0)).collect();
    let component = rand_distr::weighted::WeightedIndex::new(&weights).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut r = rng(seed);
    Ok((0..n)
        .map(|_| {
            let j = component.sample(&mut r);
            let (mu, s) = dict.theta(j);
            mu + s * normal(&mut r)
        })
        .collect())
}

const MAX_PAULI_QUBITS: u32 = 7;

/// Pauli operator number `index` (0-based, lexicographic over the factors
/// `I, Y, Z, X`, first factor most significant) on `q` qubits.
pub fn pauli_operator(q: u32, index: usize) -> Result<MeasurementOperator> {
    if q == 0 || q > MAX_PAULI_QUBITS {
        return invalid(format!("q must lie in 1..={MAX_PAULI_QUBITS}, got {q}"));
    }
    let m = 1usize << q;
    if index >= m * m {
        return invalid(format!("Pauli index {index} out of range"));
    }
    let digits: Vec<usize> = (0..q).map(|k| (index >> (2 * (q - 1 - k))) & 3).collect();
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let entries = (0..m)
        .map(|row| {
            let mut col = 0;
            let mut value = one;
            for (k, &d) in digits.iter().enumerate() {
                let bit = (row >> (q as usize - 1 - k)) & 1;
                let (flip, v) = match (d, bit) {
                    (0, _) => (0, one),
                    (1, 0) => (1, -i),
                    (1, _) => (1, i),
                    (2, 0) => (0, one),
                    (2, _) => (0, -one),
                    _ => (1, one),
                };
                col = (col << 1) | (bit ^ flip);
                value *= v;
            }
            (row, col, value)
        })
        .collect();
    Ok(MeasurementOperator::from_entries_unchecked(m, entries))
}

/// All `4^q` Pauli operators in lexicographic order.
pub fn pauli_basis(q: u32) -> Result<Vec<MeasurementOperator>> {
    if q == 0 || q > MAX_PAULI_QUBITS {
        return invalid(format!("q must lie in 1..={MAX_PAULI_QUBITS}, got {q}"));
    }
    let m = 1usize << q;
    (0..m * m).map(|i| pauli_operator(q, i)).collect()
}

/// `n` Pauli operators drawn uniformly without replacement, in draw order.
pub fn sample_pauli_measurements(q: u32, n: usize, seed: u64) -> Result<Vec<MeasurementOperator>> {
    if q == 0 || q > MAX_PAULI_QUBITS {
        return invalid(format!("q must lie in 1..={MAX_PAULI_QUBITS}, got {q}"));
    }
    let total = 1usize << (2 * q);
    if n > total {
        return invalid(format!("cannot draw {n} distinct operators from {total}"));
    }
    let mut r = rng(seed);
    sample(&mut r, total, n).into_iter().map(|i| pauli_operator(q, i)).collect()
}

/// Symmetric vectorization: for each row `i`, `e_i e_i'` followed by
/// `(e_i e_j' + e_j e_i') / sqrt(2)` for `j > i`.
pub fn svec_operator(m: usize) -> Vec<MeasurementOperator> {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut ops = Vec::with_capacity(m * (m + 1) / 2);
    for i in 0..m {
        ops.push(MeasurementOperator::from_entries_unchecked(m, vec![(i, i, C64::new(1.0, 0.0))]));
        for j in i + 1..m {
            ops.push(MeasurementOperator::from_entries_unchecked(m, vec![(i, j, h), (j, i, h)]));
        }
    }
    ops
}

/// `A A' / tr(A A')` with `A` an `m x r` standard normal matrix.
pub fn low_rank_target(m: usize, r: usize, seed: u64) -> Result<HermitianMatrix> {
    if r == 0 || r > m {
        return invalid(format!("rank {r} outside 1..={m}"));
    }
    let a = gaussian_design(m, r, seed);
    let b = &a * a.transpose();
    let tr = b.trace();
    HermitianMatrix::from_real(&(b / tr))
}

/// A symmetric-vectorization denoising problem.
#[derive(Debug, Clone)]
pub struct GoeInstance {
    pub target: HermitianMatrix,
    /// `B* + X*(eps)`.
    pub upsilon: HermitianMatrix,
    pub problem: TraceRegressionProblem,
}

/// `Y = svec(B*) + eps` with `eps_i ~ N(0, sigma^2 / m)` over the
/// `m(m+1)/2` coordinates; `X*(eps)` then has `N(0, sigma^2/m)` diagonal and
/// `N(0, sigma^2/(2m))` off-diagonal entries.
pub fn goe_denoise_instance(m: usize, r: usize, sigma: f64, seed: u64) -> Result<GoeInstance> {
    let target = low_rank_target(m, r, substream(seed, 1))?;
    goe_instance_for(target, sigma, substream(seed, 2))
}

/// [`goe_denoise_instance`] with a given target.
pub fn goe_instance_for(target: HermitianMatrix, sigma: f64, noise_seed: u64) -> Result<GoeInstance> {
    if !(sigma >= 0.0) {
        return invalid("sigma must be nonnegative");
    }
    let m = target.dim();
    let ops = svec_operator(m);
    let n = ops.len();
    let clean = DVector::from_iterator(n, ops.iter().map(|x| x.apply(&target)));
    let eps = gaussian_noise(n, sigma / (m as f64).sqrt(), noise_seed);
    let problem = TraceRegressionProblem::new(ops, clean + &eps, sigma)?;
    let upsilon = HermitianMatrix::lincomb(1.0, &target, 1.0, &problem.adjoint(&eps)?);
    Ok(GoeInstance { target, upsilon, problem })
}

/// Weekly returns: one column per ticker, one row per week.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsData {
    pub tickers: Vec<String>,
    pub returns: DMatrix<f64>,
}

impl ReturnsData {
    /// First `k` weeks and the remainder.
    pub fn split(&self, k: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let weeks = self.returns.nrows();
        if k > weeks {
            return invalid(format!("cannot take {k} of {weeks} weeks"));
        }
        Ok((self.returns.rows(0, k).into_owned(), self.returns.rows(k, weeks - k).into_owned()))
    }
}

/// Reads a header row of tickers followed by one row of decimal returns per week.
pub fn load_returns_csv(path: impl AsRef<Path>) -> Result<ReturnsData> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_returns(file)
}

/// [`load_returns_csv`] from any reader.
pub fn parse_returns(reader: impl std::io::Read) -> Result<ReturnsData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(Error::Parse { row: 1, column: 0, message: e.to_string() }),
        None => return Err(Error::Parse { row: 1, column: 0, message: "missing header row".into() }),
    };
    let tickers: Vec<String> = header.iter().map(|t| t.trim().to_string()).collect();
    if tickers.is_empty() || tickers.iter().any(|t| t.is_empty()) {
        return Err(Error::Parse { row: 1, column: 0, message: "header must name every column".into() });
    }
    if tickers.iter().all(|t| t.parse::<f64>().is_ok()) {
        return Err(Error::Parse { row: 1, column: 1, message: "missing header row".into() });
    }
    let p = tickers.len();
    let mut values = Vec::new();
    let mut weeks = 0;
    for (i, rec) in records.enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse { row, column: 0, message: e.to_string() })?;
        if rec.len() != p {
            return Err(Error::Parse { row, column: rec.len().min(p) + 1, message: format!("expected {p} cells, found {}", rec.len()) });
        }
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                column: j + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { row, column: j + 1, message: "non-finite value".into() });
            }
            values.push(v);
        }
        weeks += 1;
    }
    Ok(ReturnsData { tickers, returns: DMatrix::from_row_slice(weeks, p, &values) })
}

/// Column means and sample covariance (divisor `weeks - 1`).
pub fn mean_and_covariance(returns: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let weeks = returns.nrows();
    if weeks < 2 {
        return invalid("need at least two weeks");
    }
    let mu = DVector::from_fn(returns.ncols(), |j, _| returns.column(j).mean());
    let mut centered = returns.clone();
    for j in 0..returns.ncols() {
        let m = mu[j];
        centered.column_mut(j).iter_mut().for_each(|v| *v -= m);
    }
    let cov = centered.transpose() * &centered / (weeks - 1) as f64;
    Ok((mu, cov))
}
