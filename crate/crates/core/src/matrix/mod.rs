//! Estimators over unit-trace positive semidefinite Hermitian matrices.

mod estimators;

pub use estimators::{
    denoise_matrix_closed_form, erm_matrix, iht_matrix, max_frobenius_noiseless, neg_l2_erm_matrix, neg_l2_matrix_path, nuclear_normalize,
    reduced_eigen_risk, spectral_threshold_candidates, weighted_l1_eigen, SpectralCandidate,
};

use nalgebra::DMatrix;

use crate::error::Result;
use crate::hermitian::HermitianMatrix;
use crate::{C64, SUPPORT_TOL};

/// `U diag(phi) U^H` with `phi` sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<C64>,
}

impl SpectralEstimate {
    pub(crate) fn from_parts(eigenvalues: Vec<f64>, eigenvectors: DMatrix<C64>) -> Self {
        debug_assert_eq!(eigenvalues.len(), eigenvectors.ncols());
        debug_assert!(eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        Self { eigenvalues, eigenvectors }
    }

    /// Eigen-decomposes a matrix; fails only if the eigensolver does.
    pub fn from_matrix(b: &HermitianMatrix) -> Result<Self> {
        let (values, vectors) = b.eigh()?;
        Ok(Self::from_parts(values, vectors))
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Descending eigenvalues.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Unit eigenvectors as columns, matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigenvectors
    }

    /// Number of eigenvalues above `1e-8`.
    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|&&v| v > SUPPORT_TOL).count()
    }

    pub fn to_matrix(&self) -> HermitianMatrix {
        HermitianMatrix::from_spectrum(&self.eigenvalues, &self.eigenvectors)
    }

    /// PSD, unit trace and unitary eigenvectors, each within `tol`.
    pub fn is_feasible(&self, tol: f64) -> bool {
        let psd = self.eigenvalues.iter().all(|&v| v >= -tol);
        let trace = (self.eigenvalues.iter().sum::<f64>() - 1.0).abs() <= tol;
        let m = self.dim();
        let gram = self.eigenvectors.adjoint() * &self.eigenvectors;
        let unitary = (gram - DMatrix::<C64>::identity(m, m)).norm() <= tol.max(1e-8);
        psd && trace && unitary
    }
}
