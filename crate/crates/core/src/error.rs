use thiserror::Error;

/// Errors produced by projections, estimators and data loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("infeasible constraint: {0}")]
    InfeasibleConstraint(String),

    /// The feasibility residual could not be driven below its certificate threshold.
    #[error("feasible set appears empty (residual {residual:.3e})")]
    EmptyFeasibleSet { residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate normalization: stage-one solution has zero mass")]
    DegenerateNormalization,

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
