//! Complex Hermitian matrices and sparse measurement operators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::C64;

/// A complex Hermitian `m x m` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(DMatrix<C64>);

impl HermitianMatrix {
    /// Accepts `M` when `||M - M^H||_F <= 1e-10 * max(1, ||M||_F)` and stores
    /// the symmetrized `(M + M^H) / 2`.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if !m.is_square() {
            return invalid(format!("matrix is {}x{}, not square", m.nrows(), m.ncols()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("matrix has non-finite entries");
        }
        let adj = m.adjoint();
        let skew = (&m - &adj).norm();
        if skew > 1e-10 * m.norm().max(1.0) {
            return invalid(format!("matrix is not Hermitian (||M - M^H||_F = {skew:.3e})"));
        }
        Ok(Self::symmetrized(m))
    }

    /// `(M + M^H) / 2` without checking how far `M` was from Hermitian.
    pub fn symmetrized(m: DMatrix<C64>) -> Self {
        let adj = m.adjoint();
        Self((m + adj) * C64::new(0.5, 0.0))
    }

    pub fn from_real(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|x| C64::new(x, 0.0)))
    }

    pub fn zeros(m: usize) -> Self {
        Self(DMatrix::zeros(m, m))
    }

    pub fn identity(m: usize) -> Self {
        Self(DMatrix::identity(m, m))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let m = d.len();
        let mut out = DMatrix::zeros(m, m);
        for (i, &x) in d.iter().enumerate() {
            out[(i, i)] = C64::new(x, 0.0);
        }
        Self(out)
    }

    /// `u u^H` for a vector `u`.
    pub fn outer(u: &DVector<C64>) -> Self {
        Self::symmetrized(u * u.adjoint())
    }

    /// `U diag(values) U^H`.
    pub fn from_spectrum(values: &[f64], vectors: &DMatrix<C64>) -> Self {
        let m = vectors.nrows();
        let mut out = DMatrix::<C64>::zeros(m, m);
        for (j, &v) in values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let u = vectors.column(j);
            out += (u * u.adjoint()) * C64::new(v, 0.0);
        }
        Self::symmetrized(out)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    /// Real part of the trace.
    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    /// Trace inner product `Re tr(A B)`, which is real for Hermitian pairs.
    pub fn inner(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// `a * self + b * other`.
    pub fn lincomb(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        Self(x.0.map(|z| z * a) + y.0.map(|z| z * b))
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self(self.0.map(|z| z * a))
    }

    /// Drops imaginary parts; the real part of a Hermitian matrix is real symmetric.
    pub fn real_part(&self) -> Self {
        Self(self.0.map(|z| C64::new(z.re, 0.0)))
    }

    pub fn is_real(&self) -> bool {
        self.0.iter().all(|z| z.im == 0.0)
    }

    /// Eigenvalues in descending order with matching unit eigenvectors as columns.
    pub fn eigh(&self) -> Result<(Vec<f64>, DMatrix<C64>)> {
        let m = self.dim();
        if m == 0 {
            return invalid("empty matrix");
        }
        let eig = SymmetricEigen::try_new(self.0.clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Numerical("Hermitian eigensolver did not converge".into()))?;
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok((values, vectors))
    }
}

/// A Hermitian measurement matrix stored by its nonzero entries.
///
/// Pauli operators have one nonzero per row and symmetric-vectorization
/// operators at most two, so applying them costs far less than a dense trace.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOperator {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl MeasurementOperator {
    /// Builds from `(row, col, value)` triplets; the caller supplies both triangles.
    pub fn from_entries(dim: usize, entries: Vec<(usize, usize, C64)>) -> Result<Self> {
        if entries.iter().any(|&(r, c, _)| r >= dim || c >= dim) {
            return invalid("operator entry out of range");
        }
        let op = Self { dim, entries };
        // Hermitian check via the dense form; operators are built once per problem.
        HermitianMatrix::new(op.dense_raw())?;
        Ok(op)
    }

    /// Trusted constructor for generators whose output is Hermitian by construction.
    pub(crate) fn from_entries_unchecked(dim: usize, entries: Vec<(usize, usize, C64)>) -> Self {
        Self { dim, entries }
    }

    pub fn from_dense(m: &HermitianMatrix) -> Self {
        let dim = m.dim();
        let mut entries = Vec::new();
        for c in 0..dim {
            for r in 0..dim {
                let z = m.as_matrix()[(r, c)];
                if z != C64::new(0.0, 0.0) {
                    entries.push((r, c, z));
                }
            }
        }
        Self { dim, entries }
    }

    fn dense_raw(&self) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for &(r, c, z) in &self.entries {
            out[(r, c)] += z;
        }
        out
    }

    pub fn to_dense(&self) -> HermitianMatrix {
        HermitianMatrix::symmetrized(self.dense_raw())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, C64)] {
        &self.entries
    }

    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|(_, _, z)| z.im == 0.0)
    }

    /// `<X, B> = Re tr(X B)`.
    pub fn apply(&self, b: &HermitianMatrix) -> f64 {
        let bm = b.as_matrix();
        self.entries
            .iter()
            .map(|&(r, c, z)| (z * bm[(c, r)]).re)
            .sum()
    }

    /// `acc += w * X`.
    pub(crate) fn accumulate(&self, w: f64, acc: &mut DMatrix<C64>) {
        for &(r, c, z) in &self.entries {
            acc[(r, c)] += z * w;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(1.0, 0.0)]);
        assert!(HermitianMatrix::new(m).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(1.0, 0.0)]);
        assert!(HermitianMatrix::new(m).is_ok());
    }

    #[test]
    fn eigh_sorted_descending_and_reconstructs() {
        let h = HermitianMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)],
        ))
        .unwrap();
        let (vals, vecs) = h.eigh().unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] + 1.0).abs() < 1e-12);
        let back = HermitianMatrix::from_spectrum(&vals, &vecs);
        assert!((back.as_matrix() - h.as_matrix()).norm() < 1e-12);
    }

    #[test]
    fn operator_apply_matches_dense_trace() {
        let x = HermitianMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(2.0, -1.0), c(2.0, 1.0), c(-3.0, 0.0)],
        ))
        .unwrap();
        let b = HermitianMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[c(0.3, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.7, 0.0)],
        ))
        .unwrap();
        let op = MeasurementOperator::from_dense(&x);
        let dense = (x.as_matrix() * b.as_matrix()).trace().re;
        assert!((op.apply(&b) - dense).abs() < 1e-14);
        assert!((x.inner(&b) - dense).abs() < 1e-14);
    }
}
