//! Instance generation and estimator pipelines, one function per experiment.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use simplex_core::matrix::{
    denoise_matrix_closed_form, erm_matrix, iht_matrix, max_frobenius_noiseless, neg_l2_erm_matrix, neg_l2_matrix_path,
    nuclear_normalize, spectral_threshold_candidates, weighted_l1_eigen,
};
use simplex_core::parallel::{par_map, with_workers};
use simplex_core::risk::{build_density_risk, build_portfolio_risk, build_regression_risk};
use simplex_core::selection::{holdout_select, matrix_rank_criterion, mcc, select_by_ric, sharpe_ratio, SelectionResult};
use simplex_core::synthetic::{
    density_target, gaussian_design, gaussian_dictionary, gaussian_noise, goe_denoise_instance, load_returns_csv,
    low_rank_target, mean_and_covariance, rng, sample_mixture, sample_pauli_measurements, sparse_simplex_target, stream_seed,
    substream,
};
use simplex_core::vector::{
    denoise_closed_form, erm, find_feasible, iht, lambda_path, linf_max_noiseless, log_grid, naive_l1_normalize,
    naive_l1_normalize_risk, neg_l2_dantzig, neg_l2_erm, threshold_candidates, weighted_l1_noiseless,
    weighted_l1_with_weights, EstimatePath, PathMethod, StepRule,
};
use simplex_core::{
    Error, Fit, HermitianMatrix, QuadraticRisk, SimplexVector, SolverConfig, SparsityBudget, SpectralEstimate,
    TraceRegressionProblem,
};

use crate::config::{
    CsParams, DenoiseMode, DenoiseParams, DensityParams, ExperimentConfig, Method, Params, PortfolioParams, QstParams,
    RegressParams, SparseParams,
};
use crate::record::{TrialKey, TrialRecord};
use crate::HarnessError;

type CoreResult<T> = simplex_core::Result<T>;

/// One instance setting.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub n: usize,
    pub p_or_m: usize,
    pub s_or_r: usize,
    /// `c` for cs, `tau` for portfolio, the sample-size factor for qst.
    pub value: f64,
}

/// Instance grid of a configuration, in output order.
pub fn grid(cfg: &ExperimentConfig) -> Vec<GridPoint> {
    let mut out = Vec::new();
    match &cfg.params {
        Params::Cs(cs) => {
            for &s in &cs.s_grid {
                for &c in &cs.c_grid {
                    let n = (c * s as f64 * (cs.p as f64 / s as f64).ln()).ceil().max(1.0) as usize;
                    out.push(GridPoint { n, p_or_m: cs.p, s_or_r: s, value: c });
                }
            }
        }
        Params::Regress(RegressParams { p, sparse }) => sparse_grid(*p, sparse, &mut out),
        Params::Density(d) => sparse_grid(d.p0 * d.k, &d.sparse, &mut out),
        Params::Portfolio(pf) => {
            for &tau in &pf.tau {
                out.push(GridPoint { n: pf.estimation_weeks, p_or_m: 0, s_or_r: 0, value: tau });
            }
        }
        Params::Qst(q) => {
            let m = q.m();
            for &r in &q.r_grid {
                let d = m * r - r * (r - 1) / 2;
                match &q.n_grid {
                    Some(ns) => {
                        for &n in ns {
                            out.push(GridPoint { n: n.min(m * m), p_or_m: m, s_or_r: r, value: n as f64 / d as f64 });
                        }
                    }
                    None => {
                        let scale = if q.noiseless() { 1.0 } else { (m as f64 / r as f64).ln().max(1.0) };
                        for &f in &q.n_factors {
                            let n = ((f * d as f64 * scale).round() as usize).clamp(1, m * m);
                            out.push(GridPoint { n, p_or_m: m, s_or_r: r, value: f });
                        }
                    }
                }
            }
        }
        Params::Denoise(d) => {
            for &n in &d.n_grid {
                let n_obs = match d.mode {
                    DenoiseMode::Vec => n,
                    DenoiseMode::Mat => n * (n + 1) / 2,
                };
                out.push(GridPoint { n: n_obs, p_or_m: n, s_or_r: d.s, value: d.lambda_factor });
            }
        }
    }
    out
}

fn sparse_grid(p: usize, sparse: &SparseParams, out: &mut Vec<GridPoint>) {
    for &s in &sparse.s_grid {
        for &n in &sparse.n_grid {
            out.push(GridPoint { n, p_or_m: p, s_or_r: s, value: n as f64 });
        }
    }
}

/// Runs every (grid point, trial, method) and returns the records sorted by
/// (grid point, trial, method position in the config).
pub fn collect_records(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>, HarnessError> {
    let points = grid(cfg);
    // Real data is loaded once; a bad file stops the run before any work.
    let portfolio = match &cfg.params {
        Params::Portfolio(pf) => Some(PortfolioData::load(pf)?),
        _ => None,
    };
    let trials = if portfolio.is_some() { cfg.trials.min(1) } else { cfg.trials };
    let tasks: Vec<(usize, usize)> = (0..points.len()).flat_map(|g| (0..trials).map(move |t| (g, t))).collect();
    let run = |&(g, t): &(usize, usize)| {
        let key = TrialKey {
            experiment: cfg.experiment.name(),
            grid: g,
            n: points[g].n,
            p_or_m: points[g].p_or_m,
            s_or_r: points[g].s_or_r,
            trial: t,
            seed: stream_seed(cfg.seed, g as u64, t as u64),
        };
        let runner = Runner { cfg, key };
        match &cfg.params {
            Params::Cs(p) => runner.cs(p, &points[g]),
            Params::Regress(p) => runner.regress(p),
            Params::Density(p) => runner.density(p),
            Params::Portfolio(_) => runner.portfolio(portfolio.as_ref().expect("loaded above"), &points[g]),
            Params::Qst(p) => runner.qst(p),
            Params::Denoise(p) => runner.denoise(p),
        }
    };
    let mut records: Vec<TrialRecord> = with_workers(cfg.workers, || par_map(&tasks, run)).into_iter().flatten().collect();
    let order = |name: &str| cfg.methods.iter().position(|m| m.name() == name).unwrap_or(usize::MAX);
    // Stable, so path points of one method keep their grid order.
    records.sort_by_key(|r| (r.grid, r.trial, order(&r.method)));
    Ok(records)
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    key: TrialKey,
}

fn vector_errors(rec: &mut TrialRecord, est: &SimplexVector, truth: &SimplexVector) {
    let diff = est.as_vector() - truth.as_vector();
    rec.set_errors(diff.norm(), diff.amax());
    let support = est.support();
    rec.rank_or_support_size = support.len();
    rec.mcc = Some(mcc(&support, &truth.support(), truth.len()));
}

fn matrix_errors(rec: &mut TrialRecord, est: &SpectralEstimate, truth: &HermitianMatrix) {
    let diff = HermitianMatrix::lincomb(1.0, &est.to_matrix(), -1.0, truth);
    let linf = diff.as_matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
    rec.set_errors(diff.frobenius_norm(), linf);
    rec.rank_or_support_size = est.rank();
}

fn shared_failure<T: Clone>(r: &Result<T, String>) -> CoreResult<T> {
    r.clone().map_err(Error::Numerical)
}

/// Index of the first path point whose support equals `support`.
fn lambda_of(path: &EstimatePath, support: &[usize]) -> Option<f64> {
    path.supports.iter().position(|s| s == support).map(|i| path.lambdas[i])
}

impl Runner<'_> {
    fn solver(&self) -> &SolverConfig {
        &self.cfg.solver
    }

    /// Runs `body` for every configured method, timing each call.
    fn each_method(&self, mut body: impl FnMut(Method, &mut TrialRecord) -> CoreResult<()>) -> Vec<TrialRecord> {
        self.cfg
            .methods
            .iter()
            .map(|&method| {
                let mut rec = self.key.record(method.name());
                let start = Instant::now();
                if let Err(e) = body(method, &mut rec) {
                    rec.fail(e);
                }
                if self.cfg.record_runtime {
                    rec.runtime_ms = Some(start.elapsed().as_secs_f64() * 1e3);
                }
                rec
            })
            .collect()
    }

    /// Every method recorded as failed, for instances that could not be built.
    fn all_failed(&self, e: &Error) -> Vec<TrialRecord> {
        self.each_method(|_, _| Err(Error::InvalidInput(format!("instance generation failed: {e}"))))
    }

    fn cs(&self, params: &CsParams, point: &GridPoint) -> Vec<TrialRecord> {
        let seed = self.key.seed;
        let (n, p, s) = (point.n, params.p, point.s_or_r);
        let x = gaussian_design(n, p, substream(seed, 1));
        let truth = match sparse_simplex_target(p, s, 0.0, substream(seed, 2)) {
            Ok(t) => t,
            Err(e) => return self.all_failed(&e),
        };
        let y = &x * truth.as_vector();
        let risk = match build_regression_risk(&x, &y) {
            Ok(r) => r,
            Err(e) => return self.all_failed(&e),
        };
        let needs_feasible = self.cfg.methods.iter().any(|m| *m != Method::Pilanci);
        let feasible: Result<Fit<SimplexVector>, String> = if needs_feasible {
            find_feasible(&risk, 0.0, self.solver(), None).map_err(|e| e.to_string())
        } else {
            Err("unused".into())
        };
        let rule = if params.iht_backtracking { StepRule::Backtracking } else { StepRule::Constant };
        self.each_method(|method, rec| {
            let fit = match method {
                Method::Feasible => shared_failure(&feasible)?,
                Method::L2 => neg_l2_dantzig(&risk, 0.0, &shared_failure(&feasible)?.estimate, self.solver())?,
                Method::Pilanci => linf_max_noiseless(&x, &y, self.solver())?,
                Method::WeightedL1 => weighted_l1_noiseless(&x, &y, &shared_failure(&feasible)?.estimate, self.solver())?,
                Method::Iht => iht(
                    &risk,
                    SparsityBudget::new(s, p)?,
                    self.solver(),
                    Some(&shared_failure(&feasible)?.estimate),
                    rule,
                )?,
                other => unreachable!("{other} rejected at parse time"),
            };
            vector_errors(rec, &fit.estimate, &truth);
            rec.set_objective(fit.objective);
            rec.converged = fit.converged;
            Ok(())
        })
    }

    fn regress(&self, params: &RegressParams) -> Vec<TrialRecord> {
        let seed = self.key.seed;
        let (n, p, s) = (self.key.n, params.p, self.key.s_or_r);
        let sp = &params.sparse;
        let sigma = sp.sigma.unwrap_or(1.0 / s as f64);
        let lambda0 = sigma * (2.0 * (p as f64).ln() / n as f64).sqrt();
        let x = gaussian_design(n, p, substream(seed, 1));
        let truth = match sparse_simplex_target(p, s, sp.rho * lambda0, substream(seed, 2)) {
            Ok(t) => t,
            Err(e) => return self.all_failed(&e),
        };
        let y = &x * truth.as_vector() + gaussian_noise(n, sigma, substream(seed, 3));
        let risk = match build_regression_risk(&x, &y) {
            Ok(r) => r,
            Err(e) => return self.all_failed(&e),
        };
        let select = |supports: &[Vec<usize>]| select_by_ric(supports, &x, &y, sigma, self.solver());
        let l1 = || naive_l1_normalize(&x, &y, lambda0, self.solver());
        self.sparse_methods(&risk, &truth, sp, s, lambda0, &select, &l1)
    }

    fn density(&self, params: &DensityParams) -> Vec<TrialRecord> {
        let seed = self.key.seed;
        let (n, s) = (self.key.n, self.key.s_or_r);
        let p = params.p0 * params.k;
        let sp = &params.sparse;
        let sigma = sp.sigma.unwrap_or(1.0 / s as f64);
        let lambda0 = sigma * (2.0 * (p as f64).ln() / n as f64).sqrt();
        let built = (|| -> CoreResult<_> {
            let dict = gaussian_dictionary(params.p0, params.k, substream(seed, 1))?;
            let truth = density_target(params.p0, params.k, s, sp.rho * lambda0, substream(seed, 2))?;
            let train = sample_mixture(&dict, &truth, n, substream(seed, 3))?;
            let validation = sample_mixture(&dict, &truth, n, substream(seed, 4))?;
            Ok((truth, build_density_risk(&dict, &train)?, build_density_risk(&dict, &validation)?))
        })();
        let (truth, risk, validation) = match built {
            Ok(b) => b,
            Err(e) => return self.all_failed(&e),
        };
        // Hold-out selection over least-squares refits on each candidate support.
        let select = |supports: &[Vec<usize>]| -> CoreResult<SelectionResult<SimplexVector>> {
            let refits: Vec<SimplexVector> =
                supports.iter().map(|sup| refit_on_support(&risk, sup, self.solver())).collect::<CoreResult<_>>()?;
            holdout_select(&refits, &validation)
        };
        let l1 = || naive_l1_normalize_risk(&risk, lambda0, self.solver());
        self.sparse_methods(&risk, &truth, sp, s, lambda0, &select, &l1)
    }

    /// The regression and density method suite. `select` picks among
    /// candidate supports and returns a refit estimate.
    fn sparse_methods(
        &self,
        risk: &QuadraticRisk,
        truth: &SimplexVector,
        sp: &SparseParams,
        s: usize,
        lambda0: f64,
        select: &dyn Fn(&[Vec<usize>]) -> CoreResult<SelectionResult<SimplexVector>>,
        l1: &dyn Fn() -> CoreResult<Fit<SimplexVector>>,
    ) -> Vec<TrialRecord> {
        let p = risk.dim();
        let pilot: Result<Fit<SimplexVector>, String> = erm(risk, self.solver(), None).map_err(|e| e.to_string());
        let by_path = |method: PathMethod, grid: Vec<f64>, rec: &mut TrialRecord| -> CoreResult<SimplexVector> {
            let path = lambda_path(&method, risk, &grid, self.solver())?;
            let supports = path.distinct_supports();
            let sel = select(&supports)?;
            rec.hyperparameter = lambda_of(&path, &supports[sel.chosen_index]);
            rec.converged = path.converged.iter().all(|&c| c);
            Ok(sel.refit_estimate)
        };
        self.each_method(|method, rec| {
            let estimate = match method {
                Method::Erm => {
                    let fit = shared_failure(&pilot)?;
                    rec.converged = fit.converged;
                    fit.estimate
                }
                Method::Thres => {
                    let fit = shared_failure(&pilot)?;
                    let cands = threshold_candidates(&fit.estimate);
                    let supports: Vec<Vec<usize>> = cands.iter().map(|c| c.support.clone()).collect();
                    let sel = select(&supports)?;
                    rec.hyperparameter = Some(cands[sel.chosen_index].tau);
                    rec.converged = fit.converged;
                    sel.refit_estimate
                }
                Method::L2Erm => {
                    let top = 0.5 * risk.lipschitz();
                    let lo = if top > 0.01 { 0.01 } else { 1e-3 * top };
                    by_path(PathMethod::NegL2Erm, log_grid(lo, top, sp.l2_points), rec)?
                }
                Method::L2D => {
                    let mut grid: Vec<f64> = sp.dantzig_c.iter().map(|c| c * lambda0).collect();
                    grid.sort_by(f64::total_cmp);
                    by_path(PathMethod::NegL2Dantzig, grid, rec)?
                }
                Method::WeightedL1 => {
                    let pilot = shared_failure(&pilot)?.estimate;
                    let (lo, hi) = sp.wl1_c_range;
                    let grid = log_grid(lo, hi, sp.wl1_points).into_iter().map(|c| c * lambda0 * lambda0).collect();
                    by_path(PathMethod::WeightedL1(pilot), grid, rec)?
                }
                Method::Iht => {
                    let level = ((sp.iht_factor * s as f64).ceil() as usize).min(p);
                    let init = shared_failure(&pilot)?.estimate;
                    let fit = iht(risk, SparsityBudget::new(level, p)?, self.solver(), Some(&init), StepRule::Constant)?;
                    rec.hyperparameter = Some(level as f64);
                    rec.converged = fit.converged;
                    fit.estimate
                }
                Method::L1 => {
                    let fit = l1()?;
                    rec.hyperparameter = Some(lambda0);
                    rec.converged = fit.converged;
                    fit.estimate
                }
                Method::Oracle => {
                    rec.converged = true;
                    refit_on_support(risk, &truth.support(), self.solver())?
                }
                other => unreachable!("{other} rejected at parse time"),
            };
            vector_errors(rec, &estimate, truth);
            rec.set_objective(risk.value(estimate.as_vector()));
            Ok(())
        })
    }

    fn portfolio(&self, data: &PortfolioData, point: &GridPoint) -> Vec<TrialRecord> {
        let tau = point.value;
        let mut key = self.key.clone();
        key.p_or_m = data.mu.len();
        let risk = match build_portfolio_risk(&data.cov, &data.mu, tau) {
            Ok(r) => r,
            Err(e) => return self.all_failed(&e),
        };
        let p = risk.dim();
        let top = 0.5 * risk.lipschitz();
        let pilot = erm(&risk, self.solver(), None);
        let point_record = |method: Method, hyper: f64, est: CoreResult<(SimplexVector, bool)>| {
            let mut rec = key.record(method.name());
            rec.tau = Some(tau);
            rec.hyperparameter = Some(hyper);
            match est {
                Ok((b, converged)) => {
                    rec.converged = converged;
                    rec.rank_or_support_size = b.support().len();
                    rec.set_objective(risk.value(b.as_vector()));
                    rec.norm_l2 = Some(b.as_vector().norm());
                    rec.sharpe = sharpe_ratio(&b, &data.evaluation).ok().filter(|v| v.is_finite());
                }
                Err(e) => rec.fail(e),
            }
            rec
        };
        let mut out = Vec::new();
        for &method in &self.cfg.methods {
            let start = Instant::now();
            let first = out.len();
            let pilot = match &pilot {
                Ok(fit) => fit,
                Err(e) => {
                    let mut rec = key.record(method.name());
                    rec.tau = Some(tau);
                    rec.fail(format!("pilot ERM failed: {e}"));
                    out.push(rec);
                    continue;
                }
            };
            match method {
                Method::L2Erm | Method::WeightedL1 => {
                    let (path_method, points) = match method {
                        Method::L2Erm => (PathMethod::NegL2Erm, data.l2_points),
                        _ => (PathMethod::WeightedL1(pilot.estimate.clone()), data.wl1_points),
                    };
                    let grid = log_grid(1e-4 * top, top, points);
                    match lambda_path(&path_method, &risk, &grid, self.solver()) {
                        Ok(path) => {
                            for i in 0..path.len() {
                                let est = match &path.errors[i] {
                                    Some(msg) => Err(Error::Numerical(msg.clone())),
                                    None => Ok((path.estimates[i].clone(), path.converged[i])),
                                };
                                out.push(point_record(method, path.lambdas[i], est));
                            }
                        }
                        Err(e) => out.push(point_record(method, grid[0], Err(e))),
                    }
                }
                Method::Thres => {
                    for cand in threshold_candidates(&pilot.estimate) {
                        let est = refit_on_support(&risk, &cand.support, self.solver()).map(|b| (b, pilot.converged));
                        out.push(point_record(method, cand.tau, est));
                    }
                }
                Method::Iht => {
                    for level in 1..=data.max_sparsity.min(p) {
                        let est = SparsityBudget::new(level, p)
                            .and_then(|budget| iht(&risk, budget, self.solver(), Some(&pilot.estimate), StepRule::Constant))
                            .map(|fit| (fit.estimate, fit.converged));
                        out.push(point_record(method, level as f64, est));
                    }
                }
                other => unreachable!("{other} rejected at parse time"),
            }
            if self.cfg.record_runtime {
                let per_point = start.elapsed().as_secs_f64() * 1e3 / (out.len() - first).max(1) as f64;
                for rec in &mut out[first..] {
                    rec.runtime_ms = Some(per_point);
                }
            }
        }
        out
    }

    fn qst(&self, params: &QstParams) -> Vec<TrialRecord> {
        let seed = self.key.seed;
        let (n, m, r) = (self.key.n, self.key.p_or_m, self.key.s_or_r);
        let sigma = params.sigma;
        let built = (|| -> CoreResult<_> {
            let target = low_rank_target(m, r, substream(seed, 1))?;
            let ops = sample_pauli_measurements(params.q, n, substream(seed, 2))?;
            let clean = DVector::from_iterator(n, ops.iter().map(|op| op.apply(&target)));
            let y = if sigma > 0.0 { clean + gaussian_noise(n, sigma, substream(seed, 3)) } else { clean };
            Ok((target, TraceRegressionProblem::new(ops, y, sigma)?))
        })();
        let (target, prob) = match built {
            Ok(b) => b,
            Err(e) => return self.all_failed(&e),
        };
        let pilot: Result<Fit<SpectralEstimate>, String> = erm_matrix(&prob, self.solver(), None).map_err(|e| e.to_string());
        let lambda0 = 2.0 * sigma * ((m as f64).ln() / n as f64).sqrt();
        let select = |cands: &[SpectralEstimate]| matrix_rank_criterion(cands, &prob, params.c_sel, self.solver());
        self.each_method(|method, rec| {
            let fit: Fit<SpectralEstimate> = match method {
                Method::Feasible | Method::Erm => shared_failure(&pilot)?,
                Method::L2 => max_frobenius_noiseless(&prob, &shared_failure(&pilot)?.estimate.to_matrix(), self.solver())?,
                Method::Iht => {
                    let init = shared_failure(&pilot)?.estimate.to_matrix();
                    rec.hyperparameter = Some(r as f64);
                    iht_matrix(&prob, SparsityBudget::new(r, m)?, self.solver(), Some(&init))?
                }
                Method::Thres => {
                    let pilot = shared_failure(&pilot)?;
                    let cands = spectral_threshold_candidates(&pilot.estimate);
                    // Least-squares eigenvalue refits keep the candidates nested.
                    let refits: Vec<SpectralEstimate> = cands
                        .iter()
                        .map(|c| {
                            let thresholded = SpectralEstimate::from_matrix(&c.to_matrix(&pilot.estimate))?;
                            Ok(weighted_l1_eigen(&prob, &thresholded, 0.0, self.solver())?.estimate)
                        })
                        .collect::<CoreResult<_>>()?;
                    let sel = select(&refits)?;
                    rec.hyperparameter = Some(cands[sel.chosen_index].tau);
                    selected(&prob, sel.refit_estimate, pilot.converged)
                }
                Method::L2Erm => {
                    let pilot = shared_failure(&pilot)?;
                    let top = 0.5 * prob.lipschitz();
                    let grid = log_grid(1e-3 * top, top, params.l2_points);
                    let path = neg_l2_matrix_path(&prob, &grid, &pilot.estimate.to_matrix(), self.solver())?;
                    let converged = path.iter().all(|f| f.converged);
                    let cands: Vec<SpectralEstimate> = path.into_iter().map(|f| f.estimate).collect();
                    let sel = select(&cands)?;
                    rec.hyperparameter = Some(grid[sel.chosen_index]);
                    selected(&prob, sel.refit_estimate, converged)
                }
                Method::WeightedL1 => {
                    let pilot = shared_failure(&pilot)?;
                    let grid = log_grid(0.1, 10.0, params.wl1_points);
                    let fits: Vec<Fit<SpectralEstimate>> = grid
                        .iter()
                        .map(|c| weighted_l1_eigen(&prob, &pilot.estimate, c * lambda0 * lambda0, self.solver()))
                        .collect::<CoreResult<_>>()?;
                    let converged = fits.iter().all(|f| f.converged);
                    let cands: Vec<SpectralEstimate> = fits.into_iter().map(|f| f.estimate).collect();
                    let sel = select(&cands)?;
                    rec.hyperparameter = Some(grid[sel.chosen_index] * lambda0 * lambda0);
                    selected(&prob, sel.refit_estimate, converged)
                }
                Method::L1 => {
                    rec.hyperparameter = Some(lambda0);
                    nuclear_normalize(&prob, lambda0, self.solver())?
                }
                other => unreachable!("{other} rejected at parse time"),
            };
            matrix_errors(rec, &fit.estimate, &target);
            rec.set_objective(fit.objective);
            rec.converged = fit.converged;
            Ok(())
        })
    }

    fn denoise(&self, params: &DenoiseParams) -> Vec<TrialRecord> {
        match params.mode {
            DenoiseMode::Vec => self.denoise_vec(params),
            DenoiseMode::Mat => self.denoise_mat(params),
        }
    }

    /// Equal weights `1/s` on a random support, `|eps_i| <= eps`, and the
    /// regularization level `n lambda = 1/4 + s eps` which lies strictly
    /// between `2 s eps` and `1 - 2 s eps` whenever `2 s eps < 1/2`. The
    /// support is then recovered exactly.
    fn denoise_vec(&self, params: &DenoiseParams) -> Vec<TrialRecord> {
        let seed = self.key.seed;
        let (n, s, eps) = (self.key.n, params.s, params.eps);
        let support = match sparse_simplex_target(n, s, 0.0, substream(seed, 1)) {
            Ok(t) => t.support(),
            Err(e) => return self.all_failed(&e),
        };
        let mut b = DVector::zeros(n);
        for &j in &support {
            b[j] = 1.0 / s as f64;
        }
        let truth = SimplexVector::new(b).expect("equal weights sum to one");
        let mut noise_rng = rng(substream(seed, 2));
        let noise = DVector::from_fn(n, |_, _| noise_rng.random_range(-eps..=eps));
        let z = truth.as_vector() + noise;
        let lambda = (0.25 + s as f64 * eps) / n as f64;
        let risk = match build_regression_risk(&DMatrix::identity(n, n), &z) {
            Ok(r) => r,
            Err(e) => return self.all_failed(&e),
        };
        self.each_method(|method, rec| {
            rec.hyperparameter = Some(lambda);
            let estimate = match method {
                Method::L2ClosedForm => {
                    rec.converged = true;
                    denoise_closed_form(&z, lambda)?
                }
                Method::L2 => {
                    let start = erm(&risk, self.solver(), None)?.estimate;
                    let fit = neg_l2_erm(&risk, lambda, &start, self.solver())?;
                    rec.converged = fit.converged;
                    fit.estimate
                }
                other => unreachable!("{other} rejected at parse time"),
            };
            vector_errors(rec, &estimate, &truth);
            rec.set_objective(risk.value(estimate.as_vector()) - lambda * estimate.norm_squared());
            Ok(())
        })
    }

    /// Low-rank target observed through the symmetric vectorization with
    /// Gaussian noise; `lambda = lambda_factor 6 sigma r / n`.
    fn denoise_mat(&self, params: &DenoiseParams) -> Vec<TrialRecord> {
        let (m, r, n) = (self.key.p_or_m, params.s, self.key.n);
        let inst = match goe_denoise_instance(m, r, params.sigma, self.key.seed) {
            Ok(i) => i,
            Err(e) => return self.all_failed(&e),
        };
        let lambda = params.lambda_factor * 6.0 * params.sigma * r as f64 / n as f64;
        self.each_method(|method, rec| {
            rec.hyperparameter = Some(lambda);
            let estimate = match method {
                Method::L2ClosedForm => {
                    rec.converged = true;
                    denoise_matrix_closed_form(&inst.upsilon, lambda, n)?
                }
                Method::L2 => {
                    let start = erm_matrix(&inst.problem, self.solver(), None)?.estimate.to_matrix();
                    let fit = neg_l2_erm_matrix(&inst.problem, lambda, &start, self.solver())?;
                    rec.converged = fit.converged;
                    fit.estimate
                }
                other => unreachable!("{other} rejected at parse time"),
            };
            matrix_errors(rec, &estimate, &inst.target);
            let b = estimate.to_matrix();
            rec.set_objective(inst.problem.value(&b) - lambda * b.frobenius_norm().powi(2));
            Ok(())
        })
    }
}

/// Selection output as a fit; the objective is the risk at the refit.
fn selected(prob: &TraceRegressionProblem, estimate: SpectralEstimate, converged: bool) -> Fit<SpectralEstimate> {
    let objective = prob.value(&estimate.to_matrix());
    Fit { estimate, objective, iterations: 0, converged, history: Vec::new() }
}

/// Least squares over the simplex with every coordinate outside `support` fixed at zero.
pub fn refit_on_support(risk: &QuadraticRisk, support: &[usize], config: &SolverConfig) -> CoreResult<SimplexVector> {
    let mut weights = DVector::from_element(risk.dim(), f64::INFINITY);
    for &j in support {
        weights[j] = 0.0;
    }
    Ok(weighted_l1_with_weights(risk, 0.0, &weights, config)?.estimate)
}

/// Estimation-window moments and the held-out returns.
pub struct PortfolioData {
    pub mu: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub evaluation: DMatrix<f64>,
    l2_points: usize,
    wl1_points: usize,
    max_sparsity: usize,
}

impl PortfolioData {
    fn load(params: &PortfolioParams) -> Result<Self, HarnessError> {
        let data = load_returns_csv(&params.csv_path).map_err(|e| match e {
            Error::Io(source) => HarnessError::Io { path: params.csv_path.clone(), source },
            other => HarnessError::Input(format!("{}: {other}", params.csv_path.display())),
        })?;
        let (est, evaluation) = data
            .split(params.estimation_weeks)
            .map_err(|e| HarnessError::Input(format!("{}: {e}", params.csv_path.display())))?;
        let (mu, cov) = mean_and_covariance(&est).map_err(|e| HarnessError::Input(e.to_string()))?;
        Ok(Self {
            mu,
            cov,
            evaluation,
            l2_points: params.l2_points,
            wl1_points: params.wl1_points,
            max_sparsity: params.max_sparsity,
        })
    }
}
