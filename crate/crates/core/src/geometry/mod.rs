//! Euclidean projections onto the simplex family and its spectral analogues.

mod simplex;
mod spectral;

pub use simplex::{
    project_lower_bounded_simplex, project_simplex, project_simplex_on_support,
    project_sparse_simplex, support_of, SimplexVector, SparsityBudget,
};
pub use spectral::{project_psd_cone, project_spectral_simplex, project_spectral_sparse_simplex};
pub(crate) use spectral::spectral_simplex;
