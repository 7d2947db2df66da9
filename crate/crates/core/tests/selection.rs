use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simplex_core::matrix::{erm_matrix, spectral_threshold_candidates, weighted_l1_eigen};
use simplex_core::risk::build_regression_risk;
use simplex_core::selection::*;
use simplex_core::synthetic::*;
use simplex_core::*;

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

/// Residual of unrestricted least squares on `support` via normal equations.
fn ls_oracle(support: &[usize], x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let xs = x.select_columns(support);
    let coef = (xs.transpose() * &xs).lu().solve(&(xs.transpose() * y)).unwrap();
    (y - xs * coef).norm_squared() / x.nrows() as f64
}

#[test]
fn ric_examples() {
    let x = DMatrix::identity(3, 3);
    let y = DVector::from_vec(vec![1.0, 0.0, 0.0]);
    assert!((ric(&[], &x, &y, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert!((ric(&[0], &x, &y, 1.0).unwrap() - 0.7324081924454064).abs() < 1e-12);
    assert!(ric(&[0], &x, &y, -1.0).is_err());
    assert!(ric(&[3], &x, &y, 1.0).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = DMatrix::from_fn(30, 8, |_, _| rng.random_range(-1.0..1.0));
    let y = DVector::from_fn(30, |_, _| rng.random_range(-1.0..1.0));
    let support = [1, 4, 6];
    let penalty = 2.0 * 0.25 * 8f64.ln() * 3.0 / 30.0;
    assert!((ric(&support, &x, &y, 0.5).unwrap() - ls_oracle(&support, &x, &y) - penalty).abs() < 1e-12);
}

#[test]
fn ric_residual_is_nested() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = DMatrix::from_fn(20, 10, |_, _| rng.random_range(-1.0..1.0));
    let y = DVector::from_fn(20, |_, _| rng.random_range(-1.0..1.0));
    let sigma = 0.3;
    let unit = 2.0 * sigma * sigma * 10f64.ln() / 20.0;
    let mut support = Vec::new();
    let mut last = ric(&support, &x, &y, sigma).unwrap();
    for j in [3, 0, 7, 5, 1, 9, 2, 8, 4, 6] {
        support.push(j);
        let value = ric(&support, &x, &y, sigma).unwrap();
        assert!(value - unit <= last + 1e-12);
        last = value;
    }
}

#[test]
fn select_single_candidate() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = DMatrix::from_fn(15, 5, |_, _| rng.random_range(-1.0..1.0));
    let y = DVector::from_fn(15, |_, _| rng.random_range(-1.0..1.0));
    let sel = select_by_ric(&[vec![1, 3]], &x, &y, 0.1, &cfg()).unwrap();
    assert_eq!(sel.chosen_index, 0);
    assert_eq!(sel.criterion_values.len(), 1);
    let support = sel.refit_estimate.support();
    assert!(support.iter().all(|j| [1, 3].contains(j)));
    assert!(select_by_ric(&[], &x, &y, 0.1, &cfg()).is_err());
}

#[test]
fn select_true_support_under_strong_signal() {
    let (n, p, s, sigma) = (200, 30, 3, 0.01);
    for seed in 0..20u64 {
        let x = gaussian_design(n, p, substream(seed, 1));
        let truth = sparse_simplex_target(p, s, 0.2, substream(seed, 2)).unwrap();
        let y = &x * truth.as_vector() + gaussian_noise(n, sigma, substream(seed, 3));
        let s_true = truth.support();
        let mut candidates = vec![s_true.clone()];
        for extra in (0..p).filter(|j| !s_true.contains(j)).take(5) {
            let mut sup = candidates.last().unwrap().clone();
            sup.push(extra);
            candidates.push(sup);
        }
        let sel = select_by_ric(&candidates, &x, &y, sigma, &cfg()).unwrap();
        assert_eq!(sel.chosen_index, 0, "seed {seed}");
        assert_eq!(sel.refit_estimate.support(), s_true);
        // Refit: simplex-constrained least squares on the support.
        let risk = build_regression_risk(&x, &y).unwrap();
        let grad = risk.gradient(sel.refit_estimate.as_vector());
        let b = sel.refit_estimate.as_vector();
        let on_support = s_true.iter().map(|&j| grad[j]).fold(f64::NEG_INFINITY, f64::max);
        assert!(on_support - grad.dot(b) < 1e-6);
    }
}

#[test]
fn select_ties_and_duplication() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = DMatrix::from_fn(25, 6, |_, _| rng.random_range(-1.0..1.0));
    let y = DVector::from_fn(25, |_, _| rng.random_range(-1.0..1.0));
    let a = vec![0, 2];
    let b = vec![2, 0];
    let sel = select_by_ric(&[a.clone(), b.clone()], &x, &y, 0.2, &cfg()).unwrap();
    assert_eq!(sel.chosen_index, 0);
    assert_eq!(sel.criterion_values[0], sel.criterion_values[1]);

    let base = vec![vec![1], vec![1, 4], vec![0, 1, 4], vec![3]];
    let chosen = &base[select_by_ric(&base, &x, &y, 0.2, &cfg()).unwrap().chosen_index];
    let mut shuffled = base.clone();
    shuffled.reverse();
    shuffled.extend(base.iter().cloned());
    let again = &shuffled[select_by_ric(&shuffled, &x, &y, 0.2, &cfg()).unwrap().chosen_index];
    assert_eq!(chosen, again);
}

#[test]
fn rank_criterion_without_penalty_picks_largest_rank() {
    let (q, m, r) = (2u32, 4usize, 2usize);
    let target = low_rank_target(m, r, 5).unwrap();
    let ops = sample_pauli_measurements(q, 12, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let y = DVector::from_iterator(ops.len(), ops.iter().map(|op| op.apply(&target) + rng.random_range(-0.1..0.1)));
    let prob = TraceRegressionProblem::new(ops, y, 0.1).unwrap();
    let fit = erm_matrix(&prob, &cfg(), None).unwrap().estimate;
    // Least-squares refits on nested eigen-supports, largest first.
    let candidates: Vec<SpectralEstimate> = spectral_threshold_candidates(&fit)
        .iter()
        .map(|c| {
            let thresholded = SpectralEstimate::from_matrix(&c.to_matrix(&fit)).unwrap();
            weighted_l1_eigen(&prob, &thresholded, 0.0, &cfg()).unwrap().estimate
        })
        .collect();
    let values: Vec<f64> = candidates.iter().map(|c| prob.value(&c.to_matrix())).collect();
    assert!(values.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    let sel = matrix_rank_criterion(&candidates, &prob, 0.0, &cfg()).unwrap();
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(sel.criterion_values[sel.chosen_index], best);
    // Nested refits: the fullest support attains the minimum residual.
    assert_eq!(values[0], best);
    assert!(sel.refit_estimate.is_feasible(1e-8));

    // A heavy penalty forces rank one.
    let sel = matrix_rank_criterion(&candidates, &prob, 1e6, &cfg()).unwrap();
    assert_eq!(candidates[sel.chosen_index].rank(), 1);
    assert!(matrix_rank_criterion(&[], &prob, 1.0, &cfg()).is_err());
    assert!(matrix_rank_criterion(&candidates, &prob, -1.0, &cfg()).is_err());
}

#[test]
fn mcc_examples() {
    assert_eq!(mcc(&[1, 3], &[1, 3], 6), 1.0);
    // TP=3, FP=1, FN=1, TN=5.
    let v = mcc(&[0, 1, 2, 3], &[0, 1, 2, 4], 10);
    assert!((v - 14.0 / 24.0).abs() < 1e-15);
    assert_eq!(mcc(&[2, 3], &[0, 1], 4), -1.0);
    assert_eq!(mcc(&[], &[0], 3), 0.0);
}

proptest! {
    #[test]
    fn mcc_range(p in 2usize..20, a in proptest::collection::vec(any::<bool>(), 20), b in proptest::collection::vec(any::<bool>(), 20)) {
        let s_hat: Vec<usize> = (0..p).filter(|&j| a[j]).collect();
        let s_true: Vec<usize> = (0..p).filter(|&j| b[j]).collect();
        let v = mcc(&s_hat, &s_true, p);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&v));
        if !s_true.is_empty() && s_true.len() < p {
            prop_assert_eq!((v - 1.0).abs() < 1e-12, s_hat == s_true);
        }
    }
}

#[test]
fn sharpe_examples() {
    let constant = DMatrix::from_element(5, 1, 0.01);
    assert!(matches!(sharpe_ratio(&SimplexVector::vertex(1, 0), &constant), Err(Error::UndefinedRatio(_))));

    let returns = DMatrix::from_row_slice(4, 2, &[0.01, 0.03, -0.02, 0.01, 0.04, -0.01, 0.00, 0.02]);
    let single = sharpe_ratio(&SimplexVector::vertex(2, 0), &returns).unwrap();
    // Asset 0: mean 0.0075, sample sd sqrt(0.0018750/3).
    let expected = 0.0075 / (0.001875f64 / 3.0).sqrt();
    assert!((single - expected).abs() < 1e-12);

    let half = SimplexVector::from_slice(&[0.5, 0.5]).unwrap();
    // Portfolio returns 0.02, -0.005, 0.015, 0.01.
    let r = [0.02, -0.005, 0.015, 0.01];
    let mean = r.iter().sum::<f64>() / 4.0;
    let sd = (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
    assert!((sharpe_ratio(&half, &returns).unwrap() - mean / sd).abs() < 1e-12);
    assert!(sharpe_ratio(&half, &DMatrix::zeros(1, 2)).is_err());
}

#[test]
fn holdout_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = DMatrix::from_fn(20, 3, |_, _| rng.random_range(-1.0..1.0));
    let truth = SimplexVector::from_slice(&[0.2, 0.5, 0.3]).unwrap();
    let y = &x * truth.as_vector();
    let validation = build_regression_risk(&x, &y).unwrap();
    let cands = vec![SimplexVector::uniform(3), truth.clone(), SimplexVector::vertex(3, 0)];
    let sel = holdout_select(&cands, &validation).unwrap();
    assert_eq!(sel.chosen_index, 1);
    assert_eq!(sel.refit_estimate, truth);
    let tied = vec![truth.clone(), truth.clone()];
    assert_eq!(holdout_select(&tied, &validation).unwrap().chosen_index, 0);
    assert_eq!(holdout_select(&cands[..1], &validation).unwrap().chosen_index, 0);
    assert!(holdout_select(&[], &validation).is_err());
}
