use serde::{Deserialize, Serialize};

/// Largest `linf_error` that still counts as exact recovery.
pub const RECOVERY_TOL: f64 = 1e-3;

/// One estimator run on one instance; a line of `results.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub experiment: String,
    pub method: String,
    /// Index of the instance grid point.
    pub grid: usize,
    pub n: usize,
    pub p_or_m: usize,
    pub s_or_r: usize,
    pub trial: usize,
    pub seed: u64,
    /// Absent when the estimator failed or there is no ground truth.
    pub l2_error: Option<f64>,
    pub linf_error: Option<f64>,
    pub mcc: Option<f64>,
    pub rank_or_support_size: usize,
    pub recovered: bool,
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
    pub converged: bool,
    pub hyperparameter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sharpe: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_l2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Instance-level fields shared by every method on one trial.
#[derive(Debug, Clone)]
pub struct TrialKey {
    pub experiment: &'static str,
    pub grid: usize,
    pub n: usize,
    pub p_or_m: usize,
    pub s_or_r: usize,
    pub trial: usize,
    pub seed: u64,
}

impl TrialKey {
    /// A record with no results yet, marked failed until filled in.
    pub fn record(&self, method: &str) -> TrialRecord {
        TrialRecord {
            experiment: self.experiment.to_string(),
            method: method.to_string(),
            grid: self.grid,
            n: self.n,
            p_or_m: self.p_or_m,
            s_or_r: self.s_or_r,
            trial: self.trial,
            seed: self.seed,
            l2_error: None,
            linf_error: None,
            mcc: None,
            rank_or_support_size: 0,
            recovered: false,
            objective: None,
            runtime_ms: None,
            converged: false,
            hyperparameter: None,
            tau: None,
            sharpe: None,
            norm_l2: None,
            error: None,
        }
    }
}

impl TrialRecord {
    /// Sets the errors and the recovery flag together so they stay consistent.
    pub fn set_errors(&mut self, l2: f64, linf: f64) {
        self.l2_error = finite(l2);
        self.linf_error = finite(linf);
        self.recovered = matches!(self.linf_error, Some(e) if e <= RECOVERY_TOL);
    }

    pub fn set_objective(&mut self, value: f64) {
        self.objective = finite(value);
    }

    pub fn fail(&mut self, message: impl ToString) {
        self.converged = false;
        self.recovered = false;
        self.error = Some(message.to_string());
    }
}

/// JSON has no NaN or infinity.
pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}
