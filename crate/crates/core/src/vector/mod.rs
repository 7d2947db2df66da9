//! Estimators over the probability simplex.

mod basic;
mod dc;
mod lp;
mod path;

pub use basic::{
    denoise_closed_form, erm, iht, naive_l1_normalize, naive_l1_normalize_risk, threshold_candidates,
    weighted_l1, weighted_l1_with_weights, StepRule, ThresholdCandidate,
};
pub use dc::{feasibility_residual, find_feasible, linf_max_noiseless, neg_l2_dantzig, neg_l2_erm, weighted_l1_noiseless};
pub use path::{lambda_path, log_grid, EstimatePath, PathMethod};

pub use lp::dantzig_violation;
