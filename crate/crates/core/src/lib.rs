//! Sparse estimation on the probability simplex and low-rank estimation on
//! unit-trace Hermitian positive semidefinite matrices.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: exact Euclidean projections onto the simplex, the sparse
//!   simplex, the lower-bounded simplex and their spectral analogues.
//! * [`risk`]: quadratic empirical risks (regression, mixture density,
//!   portfolio) and the trace-regression risk.
//! * [`vector`] and [`matrix`]: ERM, Dantzig-type feasible points,
//!   negative-ℓ2 regularization via DC programming, thresholding, weighted
//!   ℓ1, iterative hard thresholding and normalized-ℓ1 baselines.
//! * [`selection`]: RIC, the matrix rank criterion, MCC, Sharpe ratio and
//!   hold-out selection.
//! * [`synthetic`]: seeded generators for every experimental ingredient.
//! * [`parallel`]: the trial-level map used by batch evaluations; rayon when
//!   the `parallel` feature is on, a plain iterator otherwise.

pub mod error;
pub mod geometry;
pub mod hermitian;
pub mod matrix;
pub mod optim;
pub mod parallel;
pub mod risk;
pub mod selection;
pub mod synthetic;
pub mod vector;

pub use error::{Error, Result};
pub use geometry::{SimplexVector, SparsityBudget};
pub use hermitian::{HermitianMatrix, MeasurementOperator};
pub use matrix::SpectralEstimate;
pub use optim::{Fit, SolverConfig};
pub use risk::{GaussianDictionary, QuadraticRisk, TraceRegressionProblem};

/// Complex scalar used for Hermitian matrices.
pub type C64 = num_complex::Complex64;

/// Entries at or below this magnitude are reported as zero in supports and ranks.
pub const SUPPORT_TOL: f64 = 1e-8;

/// Feasibility tolerance for simplex membership.
pub const FEASIBILITY_TOL: f64 = 1e-10;
