use nalgebra::DVector;

use super::simplex::{project_simplex, project_sparse_simplex, SparsityBudget};
use crate::error::{invalid, Result};
use crate::hermitian::HermitianMatrix;
use crate::matrix::SpectralEstimate;

/// Projection onto unit-trace PSD matrices: project the spectrum onto the simplex.
pub fn project_spectral_simplex(m: &HermitianMatrix) -> Result<HermitianMatrix> {
    Ok(spectral_simplex(m, None)?.to_matrix())
}

/// Projection onto unit-trace PSD matrices of rank at most `r`.
pub fn project_spectral_sparse_simplex(
    m: &HermitianMatrix,
    r: SparsityBudget,
) -> Result<HermitianMatrix> {
    Ok(spectral_simplex(m, Some(r))?.to_matrix())
}

/// Spectral form of the (sparse) spectral-simplex projection.
pub(crate) fn spectral_simplex(
    m: &HermitianMatrix,
    rank: Option<SparsityBudget>,
) -> Result<SpectralEstimate> {
    if let Some(r) = rank {
        if r.get() > m.dim() {
            return invalid(format!("rank budget {} exceeds dimension {}", r.get(), m.dim()));
        }
    }
    let (values, vectors) = m.eigh()?;
    let values = DVector::from_vec(values);
    let projected = match rank {
        None => project_simplex(&values)?,
        Some(r) => project_sparse_simplex(&values, r)?,
    };
    // Eigenvalues arrive sorted descending and the projection preserves order.
    Ok(SpectralEstimate::from_parts(
        projected.into_inner().as_slice().to_vec(),
        vectors,
    ))
}

/// Projection onto the PSD cone by clipping negative eigenvalues.
pub fn project_psd_cone(m: &HermitianMatrix) -> Result<HermitianMatrix> {
    let (values, vectors) = m.eigh()?;
    let clipped: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
    Ok(HermitianMatrix::from_spectrum(&clipped, &vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;
    use nalgebra::DMatrix;

    fn diag_close(h: &HermitianMatrix, d: &[f64], tol: f64) {
        let expected = HermitianMatrix::from_diagonal(d);
        let err = (h.as_matrix() - expected.as_matrix()).norm();
        assert!(err < tol, "error {err}");
    }

    #[test]
    fn diagonal_projection() {
        let m = HermitianMatrix::from_diagonal(&[0.5, 0.3, -0.2]);
        diag_close(&project_spectral_simplex(&m).unwrap(), &[0.6, 0.4, 0.0], 1e-12);
    }

    #[test]
    fn rank_one_rescaling() {
        let u = DVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let p = HermitianMatrix::outer(&u);
        let got = project_spectral_simplex(&p.scaled(2.0)).unwrap();
        assert!((got.as_matrix() - p.as_matrix()).norm() < 1e-12);
        let got = project_spectral_sparse_simplex(&p, SparsityBudget::new(1, 2).unwrap()).unwrap();
        assert!((got.as_matrix() - p.as_matrix()).norm() < 1e-12);
    }

    #[test]
    fn sparse_spectral_projection() {
        let m = HermitianMatrix::from_diagonal(&[0.6, 0.3, 0.1]);
        let got = project_spectral_sparse_simplex(&m, SparsityBudget::new(1, 3).unwrap()).unwrap();
        diag_close(&got, &[1.0, 0.0, 0.0], 1e-12);
        let m = HermitianMatrix::from_diagonal(&[0.9, -0.3, 0.4]);
        let a = project_spectral_sparse_simplex(&m, SparsityBudget::new(3, 3).unwrap()).unwrap();
        let b = project_spectral_simplex(&m).unwrap();
        assert!((a.as_matrix() - b.as_matrix()).norm() < 1e-12);
        assert!(project_spectral_sparse_simplex(&m, SparsityBudget::new(4, 10).unwrap()).is_err());
    }

    #[test]
    fn feasible_input_is_fixed() {
        let m = HermitianMatrix::from_real(&DMatrix::from_row_slice(
            2,
            2,
            &[0.7, 0.2, 0.2, 0.3],
        ))
        .unwrap();
        let got = project_spectral_simplex(&m).unwrap();
        assert!((got.as_matrix() - m.as_matrix()).norm() < 1e-12);
    }

    #[test]
    fn psd_clipping() {
        let m = HermitianMatrix::from_diagonal(&[0.5, -0.25]);
        diag_close(&project_psd_cone(&m).unwrap(), &[0.5, 0.0], 1e-15);
    }
}
