//! Flat `key = value` experiment configuration.
//!
//! Blank lines and text after `#` are ignored. Lists are comma separated;
//! float lists also accept `lo:step:hi`. Every key is checked against the
//! experiment's key set, so a typo is a configuration error rather than a
//! silently ignored setting.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use simplex_core::SolverConfig;

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Experiment {
    Cs,
    Regress,
    Density,
    Portfolio,
    Qst,
    Denoise,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Cs,
        Experiment::Regress,
        Experiment::Density,
        Experiment::Portfolio,
        Experiment::Qst,
        Experiment::Denoise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Cs => "cs",
            Experiment::Regress => "regress",
            Experiment::Density => "density",
            Experiment::Portfolio => "portfolio",
            Experiment::Qst => "qst",
            Experiment::Denoise => "denoise",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment '{s}'")))
    }
}

/// Estimator pipelines. Which ones an experiment accepts is fixed by
/// [`allowed_methods`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Feasible,
    L2,
    Pilanci,
    WeightedL1,
    Iht,
    Erm,
    Thres,
    L2Erm,
    L2D,
    L1,
    Oracle,
    L2ClosedForm,
}

impl Method {
    const ALL: [Method; 12] = [
        Method::Feasible,
        Method::L2,
        Method::Pilanci,
        Method::WeightedL1,
        Method::Iht,
        Method::Erm,
        Method::Thres,
        Method::L2Erm,
        Method::L2D,
        Method::L1,
        Method::Oracle,
        Method::L2ClosedForm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Feasible => "feasible",
            Method::L2 => "l2",
            Method::Pilanci => "pilanci",
            Method::WeightedL1 => "weighted_l1",
            Method::Iht => "iht",
            Method::Erm => "erm",
            Method::Thres => "thres",
            Method::L2Erm => "l2_erm",
            Method::L2D => "l2_d",
            Method::L1 => "l1",
            Method::Oracle => "oracle",
            Method::L2ClosedForm => "l2_closed_form",
        }
    }

    fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Methods an experiment accepts, in default run order. For `qst` the
/// noiseless and noisy lists differ; see [`QstParams::noiseless`].
pub fn allowed_methods(experiment: Experiment, noiseless_qst: bool) -> &'static [Method] {
    use Method::*;
    match experiment {
        Experiment::Cs => &[Feasible, L2, Pilanci, WeightedL1, Iht],
        Experiment::Regress | Experiment::Density => &[Erm, Thres, L2Erm, L2D, WeightedL1, Iht, L1, Oracle],
        Experiment::Portfolio => &[L2Erm, WeightedL1, Thres, Iht],
        Experiment::Qst if noiseless_qst => &[Feasible, L2, Iht],
        Experiment::Qst => &[Erm, Thres, L2Erm, WeightedL1, Iht, L1],
        Experiment::Denoise => &[L2ClosedForm, L2],
    }
}

const COMMON_KEYS: &[&str] = &[
    "methods",
    "trials",
    "seed",
    "workers",
    "out",
    "record_runtime",
    "plots",
    "max_outer_iters",
    "max_inner_iters",
    "tol_obj",
    "tol_iterate",
];

fn experiment_keys(experiment: Experiment) -> &'static [&'static str] {
    match experiment {
        Experiment::Cs => &["p", "s_grid", "c_grid", "iht_backtracking"],
        Experiment::Regress => &[
            "p", "s_grid", "n_grid", "sigma", "rho", "l2_points", "wl1_points", "wl1_c_range", "dantzig_c", "iht_factor",
        ],
        Experiment::Density => &[
            "p0", "k", "s_grid", "n_grid", "sigma", "rho", "l2_points", "wl1_points", "wl1_c_range", "dantzig_c", "iht_factor",
        ],
        Experiment::Portfolio => &["csv_path", "estimation_weeks", "tau", "l2_points", "wl1_points", "max_sparsity"],
        Experiment::Qst => &["q", "r_grid", "n_factors", "n_grid", "sigma", "c_sel", "l2_points", "wl1_points"],
        Experiment::Denoise => &["mode", "n_grid", "s", "eps", "sigma", "lambda_factor"],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PlotKind {
    ErrorCurve,
    Contour,
    SharpeCurve,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::ErrorCurve => "error_curve",
            PlotKind::Contour => "contour",
            PlotKind::SharpeCurve => "sharpe_curve",
        }
    }
}

impl FromStr for PlotKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "error_curve" => Ok(PlotKind::ErrorCurve),
            "contour" => Ok(PlotKind::Contour),
            "sharpe_curve" => Ok(PlotKind::SharpeCurve),
            _ => Err(HarnessError::Config(format!("unknown plot kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsParams {
    pub p: usize,
    pub s_grid: Vec<usize>,
    /// `n = ceil(c s log(p/s))`.
    pub c_grid: Vec<f64>,
    pub iht_backtracking: bool,
}

/// Shared by regression and density estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseParams {
    pub s_grid: Vec<usize>,
    pub n_grid: Vec<usize>,
    /// Noise level in `lambda_0 = sigma sqrt(2 log p / n)`; `1/s` when absent.
    pub sigma: Option<f64>,
    /// `b_min = rho lambda_0`.
    pub rho: f64,
    pub l2_points: usize,
    pub wl1_points: usize,
    /// Range of `C` in `lambda = C lambda_0^2` for weighted l1.
    pub wl1_c_range: (f64, f64),
    /// `D(C lambda_0)` constants for the Dantzig-type estimator.
    pub dantzig_c: Vec<f64>,
    /// IHT sparsity as a multiple of the true `s`.
    pub iht_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressParams {
    pub p: usize,
    pub sparse: SparseParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityParams {
    /// Locations per bandwidth; the dictionary has `p0 * k` atoms.
    pub p0: usize,
    pub k: usize,
    pub sparse: SparseParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioParams {
    pub csv_path: PathBuf,
    pub estimation_weeks: usize,
    pub tau: Vec<f64>,
    pub l2_points: usize,
    pub wl1_points: usize,
    pub max_sparsity: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QstParams {
    /// Qubits; `m = 2^q`.
    pub q: u32,
    pub r_grid: Vec<usize>,
    /// `n = factor d`, times `log(m/r)` when noisy.
    pub n_factors: Vec<f64>,
    /// Explicit sample sizes; replaces `n_factors` when given.
    pub n_grid: Option<Vec<usize>>,
    pub sigma: f64,
    pub c_sel: f64,
    pub l2_points: usize,
    pub wl1_points: usize,
}

impl QstParams {
    pub fn noiseless(&self) -> bool {
        self.sigma == 0.0
    }

    pub fn m(&self) -> usize {
        1usize << self.q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenoiseMode {
    Vec,
    Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseParams {
    pub mode: DenoiseMode,
    /// Vector length (vec) or matrix dimension (mat).
    pub n_grid: Vec<usize>,
    /// Sparsity (vec) or rank (mat).
    pub s: usize,
    /// Bound on `|eps_i|` for the vector instances.
    pub eps: f64,
    /// Noise level of the matrix instances.
    pub sigma: f64,
    /// Matrix `lambda = lambda_factor * 6 sigma r / n`.
    pub lambda_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Cs(CsParams),
    Regress(RegressParams),
    Density(DensityParams),
    Portfolio(PortfolioParams),
    Qst(QstParams),
    Denoise(DenoiseParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; `0` uses one per core.
    pub workers: usize,
    pub out: PathBuf,
    /// Adds wall-clock `runtime_ms` to records, which makes output nondeterministic.
    pub record_runtime: bool,
    pub plots: Vec<PlotKind>,
    pub solver: SolverConfig,
    pub params: Params,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub workers: Option<usize>,
}

fn err<T>(msg: impl Into<String>) -> Result<T, HarnessError> {
    Err(HarnessError::Config(msg.into()))
}

/// Splits `text` into key/value pairs, rejecting malformed and duplicate lines.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, HarnessError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return err(format!("line {}: expected key = value", i + 1));
        };
        let key = key.trim().to_string();
        if key.is_empty() {
            return err(format!("line {}: empty key", i + 1));
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return err(format!("line {}: duplicate key '{key}'", i + 1));
        }
    }
    Ok(out)
}

struct Reader {
    pairs: BTreeMap<String, String>,
}

impl Reader {
    fn raw(&self, key: &str) -> Option<&str> {
        self.pairs.get(key).map(String::as_str)
    }

    fn scalar<T: FromStr>(&self, key: &str, default: T) -> Result<T, HarnessError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().or_else(|_| err(format!("{key}: cannot parse '{v}'"))),
        }
    }

    fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>, HarnessError> {
        self.raw(key)
            .map(|v| v.parse().or_else(|_| err(format!("{key}: cannot parse '{v}'"))))
            .transpose()
    }

    fn list<T: FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>, HarnessError> {
        let Some(v) = self.raw(key) else { return Ok(default) };
        let items: Vec<T> = v
            .split(',')
            .map(|s| s.trim().parse().or_else(|_| err(format!("{key}: cannot parse '{}'", s.trim()))))
            .collect::<Result<_, _>>()?;
        if items.is_empty() {
            return err(format!("{key}: empty list"));
        }
        Ok(items)
    }

    /// Comma list, or `lo:step:hi` inclusive of `hi` up to rounding.
    fn float_list(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>, HarnessError> {
        let Some(v) = self.raw(key) else { return Ok(default) };
        let parts: Vec<&str> = v.split(':').map(str::trim).collect();
        if parts.len() == 1 {
            return self.list(key, default);
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|s| s.parse::<f64>().or_else(|_| err(format!("{key}: cannot parse '{s}'"))))
            .collect::<Result<_, _>>()?;
        let [lo, step, hi] = nums[..] else {
            return err(format!("{key}: ranges are lo:step:hi"));
        };
        if !(step > 0.0 && lo <= hi && lo.is_finite() && hi.is_finite()) {
            return err(format!("{key}: invalid range"));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| lo + step * i as f64).collect())
    }
}

fn positive(key: &str, v: f64) -> Result<f64, HarnessError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        err(format!("{key} must be positive"))
    }
}

fn nonempty_positive<T: PartialOrd + Default + Copy>(key: &str, v: Vec<T>) -> Result<Vec<T>, HarnessError> {
    if v.is_empty() || v.iter().any(|x| !(*x > T::default())) {
        return err(format!("{key} must be a nonempty list of positive values"));
    }
    Ok(v)
}

fn grid_points(key: &str, v: usize) -> Result<usize, HarnessError> {
    if v == 0 {
        return err(format!("{key} must be at least 1"));
    }
    Ok(v)
}

fn sparse_params(r: &Reader, default_n: Vec<usize>, default_s: usize, default_rho: f64) -> Result<SparseParams, HarnessError> {
    let sigma = r.optional::<f64>("sigma")?;
    if let Some(s) = sigma {
        positive("sigma", s)?;
    }
    let wl1_c_range = {
        let v = r.float_list("wl1_c_range", vec![0.1, 10.0])?;
        match v[..] {
            [lo, hi] if lo > 0.0 && lo <= hi => (lo, hi),
            _ => return err("wl1_c_range: expected lo,hi with 0 < lo <= hi"),
        }
    };
    Ok(SparseParams {
        s_grid: nonempty_positive("s_grid", r.list("s_grid", vec![default_s])?)?,
        n_grid: nonempty_positive("n_grid", r.list("n_grid", default_n)?)?,
        sigma,
        rho: positive("rho", r.scalar("rho", default_rho)?)?,
        l2_points: grid_points("l2_points", r.scalar("l2_points", 100)?)?,
        wl1_points: grid_points("wl1_points", r.scalar("wl1_points", 100)?)?,
        wl1_c_range,
        dantzig_c: nonempty_positive("dantzig_c", r.float_list("dantzig_c", (0..31).map(|i| 0.5 + 0.05 * i as f64).collect())?)?,
        iht_factor: {
            let f = r.scalar("iht_factor", 1.0)?;
            if !(f >= 1.0) {
                return err("iht_factor must be at least 1");
            }
            f
        },
    })
}

fn params(experiment: Experiment, r: &Reader) -> Result<Params, HarnessError> {
    Ok(match experiment {
        Experiment::Cs => {
            let p = r.scalar("p", 100usize)?;
            let s_grid = nonempty_positive("s_grid", r.list("s_grid", vec![10])?)?;
            if s_grid.iter().any(|&s| s >= p) {
                return err("every s must be below p");
            }
            Params::Cs(CsParams {
                p,
                s_grid,
                c_grid: nonempty_positive("c_grid", r.float_list("c_grid", vec![0.8, 1.1, 1.4, 1.7, 2.0])?)?,
                iht_backtracking: r.scalar("iht_backtracking", false)?,
            })
        }
        Experiment::Regress => {
            let p = r.scalar("p", 200usize)?;
            let sparse = sparse_params(r, vec![100, 200, 400, 800], 5, 1.7)?;
            if sparse.s_grid.iter().any(|&s| s >= p) {
                return err("every s must be below p");
            }
            Params::Regress(RegressParams { p, sparse })
        }
        Experiment::Density => {
            let p0 = r.scalar("p0", 100usize)?;
            let k = r.scalar("k", 2usize)?;
            if p0 == 0 || k == 0 {
                return err("p0 and k must be positive");
            }
            let sparse = sparse_params(r, vec![200, 400, 800, 1600], 10, 2.0)?;
            if sparse.s_grid.iter().any(|&s| s > p0) {
                return err("s cannot exceed p0 (targets use distinct locations)");
            }
            Params::Density(DensityParams { p0, k, sparse })
        }
        Experiment::Portfolio => {
            let Some(path) = r.raw("csv_path") else {
                return err("portfolio needs csv_path");
            };
            let tau = r.float_list("tau", vec![1e-4, 5e-3])?;
            if tau.is_empty() || tau.iter().any(|t| !(*t >= 0.0)) {
                return err("tau must be a nonempty list of nonnegative values");
            }
            Params::Portfolio(PortfolioParams {
                csv_path: PathBuf::from(path),
                estimation_weeks: grid_points("estimation_weeks", r.scalar("estimation_weeks", 208)?)?,
                tau,
                l2_points: grid_points("l2_points", r.scalar("l2_points", 30)?)?,
                wl1_points: grid_points("wl1_points", r.scalar("wl1_points", 30)?)?,
                max_sparsity: grid_points("max_sparsity", r.scalar("max_sparsity", 20)?)?,
            })
        }
        Experiment::Qst => {
            let q: u32 = r.scalar("q", 4)?;
            if !(1..=7).contains(&q) {
                return err("q must be between 1 and 7");
            }
            let r_grid = nonempty_positive("r_grid", r.list("r_grid", vec![1, 2])?)?;
            if r_grid.iter().any(|&rank| rank > 1usize << q) {
                return err("rank exceeds the matrix dimension");
            }
            let sigma: f64 = r.scalar("sigma", 0.0)?;
            if !(sigma >= 0.0) {
                return err("sigma must be nonnegative");
            }
            let n_grid = match r.raw("n_grid") {
                Some(_) => Some(nonempty_positive("n_grid", r.list("n_grid", Vec::new())?)?),
                None => None,
            };
            let default_factors = if sigma == 0.0 { vec![2.0, 3.0, 4.0] } else { vec![1.0, 2.0, 3.0, 4.0] };
            Params::Qst(QstParams {
                q,
                r_grid,
                n_factors: nonempty_positive("n_factors", r.float_list("n_factors", default_factors)?)?,
                n_grid,
                sigma,
                c_sel: {
                    let c = r.scalar("c_sel", 64.0)?;
                    if !(c >= 0.0) {
                        return err("c_sel must be nonnegative");
                    }
                    c
                },
                l2_points: grid_points("l2_points", r.scalar("l2_points", 20)?)?,
                wl1_points: grid_points("wl1_points", r.scalar("wl1_points", 20)?)?,
            })
        }
        Experiment::Denoise => {
            let mode = match r.raw("mode").unwrap_or("vec") {
                "vec" => DenoiseMode::Vec,
                "mat" => DenoiseMode::Mat,
                other => return err(format!("mode must be vec or mat, not '{other}'")),
            };
            let default_n = match mode {
                DenoiseMode::Vec => vec![20, 50],
                DenoiseMode::Mat => vec![16, 32],
            };
            let s = grid_points("s", r.scalar("s", 2)?)?;
            let n_grid = nonempty_positive("n_grid", r.list("n_grid", default_n)?)?;
            if n_grid.iter().any(|&n| n <= s) {
                return err("every n must exceed s");
            }
            let eps: f64 = r.scalar("eps", 1e-4)?;
            if mode == DenoiseMode::Vec && !(eps >= 0.0 && 2.0 * s as f64 * eps <= 0.45) {
                return err("eps must satisfy 0 <= 2 s eps <= 0.45");
            }
            let sigma: f64 = r.scalar("sigma", 0.05)?;
            if !(sigma >= 0.0) {
                return err("sigma must be nonnegative");
            }
            Params::Denoise(DenoiseParams {
                mode,
                n_grid,
                s,
                eps,
                sigma,
                lambda_factor: positive("lambda_factor", r.scalar("lambda_factor", 1.1)?)?,
            })
        }
    })
}

impl ExperimentConfig {
    /// Parses `text`, applies `overrides` and validates everything.
    pub fn parse(experiment: Experiment, text: &str, overrides: &Overrides) -> Result<Self, HarnessError> {
        let pairs = parse_pairs(text)?;
        for key in pairs.keys() {
            if !COMMON_KEYS.contains(&key.as_str()) && !experiment_keys(experiment).contains(&key.as_str()) {
                return err(format!("unknown key '{key}' for experiment {experiment}"));
            }
        }
        let r = Reader { pairs };
        let params = params(experiment, &r)?;
        let noiseless = matches!(&params, Params::Qst(q) if q.noiseless());
        let allowed = allowed_methods(experiment, noiseless);
        let methods = match r.raw("methods") {
            None => allowed.to_vec(),
            Some(list) => {
                let mut out = Vec::new();
                for name in list.split(',').map(str::trim) {
                    let Some(m) = Method::parse(name).filter(|m| allowed.contains(m)) else {
                        return err(format!("unknown method '{name}' for experiment {experiment}"));
                    };
                    if out.contains(&m) {
                        return err(format!("method '{name}' listed twice"));
                    }
                    out.push(m);
                }
                if out.is_empty() {
                    return err("methods: empty list");
                }
                out
            }
        };
        let defaults = SolverConfig::default();
        let solver = SolverConfig {
            max_outer_iters: r.scalar("max_outer_iters", defaults.max_outer_iters)?,
            max_inner_iters: r.scalar("max_inner_iters", defaults.max_inner_iters)?,
            tol_obj: r.scalar("tol_obj", defaults.tol_obj)?,
            tol_iterate: r.scalar("tol_iterate", defaults.tol_iterate)?,
            ..defaults
        };
        solver.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        let plots = match r.raw("plots") {
            None => Vec::new(),
            Some(list) => list.split(',').map(|s| s.trim().parse()).collect::<Result<_, _>>()?,
        };
        let seed = overrides.seed.map_or_else(|| r.scalar("seed", 0u64), Ok)?;
        Ok(Self {
            experiment,
            methods,
            trials: overrides.trials.map_or_else(|| r.scalar("trials", 20usize), Ok)?,
            seed,
            workers: overrides.workers.map_or_else(|| r.scalar("workers", 0usize), Ok)?,
            out: match &overrides.out {
                Some(p) => p.clone(),
                None => PathBuf::from(r.raw("out").unwrap_or("out")),
            },
            record_runtime: r.scalar("record_runtime", false)?,
            plots,
            solver: SolverConfig { seed, ..solver },
            params,
        })
    }

    /// Reads and parses a config file. A missing file is an I/O error.
    pub fn load(experiment: Experiment, path: &Path, overrides: &Overrides) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(experiment, &text, overrides)
    }
}
