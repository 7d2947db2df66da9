use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simplex_core::geometry::*;
use simplex_core::{HermitianMatrix, C64};

/// Exhaustive active-set oracle: for every nonempty support `S`, the
/// stationary point on the face is `v_S - (sum v_S - 1)/|S|`; keep the
/// feasible one closest to `v`.
fn brute_simplex(v: &[f64], allowed: &[usize]) -> Vec<f64> {
    let k = allowed.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << k) {
        let s: Vec<usize> = (0..k).filter(|&i| mask & (1 << i) != 0).map(|i| allowed[i]).collect();
        let shift = (s.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / s.len() as f64;
        let mut b = vec![0.0; v.len()];
        let mut ok = true;
        for &i in &s {
            b[i] = v[i] - shift;
            if b[i] < -1e-14 {
                ok = false;
            }
        }
        if !ok {
            continue;
        }
        let d: f64 = v.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, b));
        }
    }
    best.unwrap().1
}

fn brute_sparse(v: &[f64], s: usize) -> Vec<f64> {
    let p = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << p) {
        if mask.count_ones() as usize > s {
            continue;
        }
        let allowed: Vec<usize> = (0..p).filter(|&i| mask & (1 << i) != 0).collect();
        let b = brute_simplex(v, &allowed);
        let d: f64 = v.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd - 1e-15) {
            best = Some((d, b));
        }
    }
    best.unwrap().1
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn dv(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

#[test]
fn simplex_examples() {
    assert_eq!(project_simplex(&dv(&[0.2, 0.3, 0.5])).unwrap().as_slice(), &[0.2, 0.3, 0.5]);
    let b = project_simplex(&dv(&[1.0, 0.5, -0.2])).unwrap();
    assert!(dist(b.as_slice(), &[0.75, 0.25, 0.0]) < 1e-15);
    assert!(dist(b.as_slice(), &brute_simplex(&[1.0, 0.5, -0.2], &[0, 1, 2])) < 1e-15);
    assert_eq!(project_simplex(&dv(&[2.0, 0.0])).unwrap().as_slice(), &[1.0, 0.0]);
    assert!(project_simplex(&dv(&[f64::NAN, 1.0])).is_err());
    assert!(project_simplex(&dv(&[])).is_err());
}

#[test]
fn sparse_examples() {
    let s2 = SparsityBudget::new(2, 3).unwrap();
    let b = project_sparse_simplex(&dv(&[0.6, 0.3, 0.2]), s2).unwrap();
    assert!(dist(b.as_slice(), &[0.65, 0.35, 0.0]) < 1e-15);
    assert!(dist(b.as_slice(), &brute_sparse(&[0.6, 0.3, 0.2], 2)) < 1e-15);
    let v = dv(&[0.4, -1.0, 2.0, 0.3]);
    let full = SparsityBudget::new(4, 4).unwrap();
    assert_eq!(project_sparse_simplex(&v, full).unwrap(), project_simplex(&v).unwrap());
    let one = SparsityBudget::new(1, 2).unwrap();
    assert_eq!(project_sparse_simplex(&dv(&[0.9, 0.1]), one).unwrap().as_slice(), &[1.0, 0.0]);
    assert!(SparsityBudget::new(0, 3).is_err());
    assert!(SparsityBudget::new(4, 3).is_err());
}

#[test]
fn lower_bounded_examples() {
    let b = project_lower_bounded_simplex(&dv(&[0.5, 0.5]), 0.1).unwrap();
    assert_eq!(b.as_slice(), &[0.5, 0.5]);
    let b = project_lower_bounded_simplex(&dv(&[0.9, 0.1]), 0.2).unwrap();
    // Grid search on the feasible segment {(t, 1 - t) : 0.2 <= t <= 0.8}.
    let best = (0..=600_000)
        .map(|i| 0.2 + 0.6 * i as f64 / 600_000.0)
        .min_by(|a, b| {
            let f = |t: f64| (t - 0.9).powi(2) + (1.0 - t - 0.1).powi(2);
            f(*a).total_cmp(&f(*b))
        })
        .unwrap();
    assert!(dist(b.as_slice(), &[best, 1.0 - best]) < 1e-6);
    assert!(dist(b.as_slice(), &[0.8, 0.2]) < 1e-12);
    let b = project_lower_bounded_simplex(&dv(&[0.5, 0.5]), 0.5).unwrap();
    assert_eq!(b.as_slice(), &[0.5, 0.5]);
    assert!(matches!(
        project_lower_bounded_simplex(&dv(&[0.5, 0.5]), 0.6),
        Err(simplex_core::Error::InfeasibleConstraint(_))
    ));
}

#[test]
fn thousand_random_instances_match_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = rng.random_range(1..=6);
        let v: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let all: Vec<usize> = (0..p).collect();
        worst = worst.max(dist(project_simplex(&dv(&v)).unwrap().as_slice(), &brute_simplex(&v, &all)));
        let s = rng.random_range(1..=p);
        let b = project_sparse_simplex(&dv(&v), SparsityBudget::new(s, p).unwrap()).unwrap();
        worst = worst.max(dist(b.as_slice(), &brute_sparse(&v, s)));
    }
    assert!(worst <= 1e-9, "max deviation {worst}");
}

#[test]
fn sparse_matches_enumeration_up_to_eight() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let p = rng.random_range(1..=8);
        let v: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.5)).collect();
        let s = rng.random_range(1..=p);
        let b = project_sparse_simplex(&dv(&v), SparsityBudget::new(s, p).unwrap()).unwrap();
        let oracle = brute_sparse(&v, s);
        let (d1, d2) = (dist(&v, b.as_slice()), dist(&v, &oracle));
        assert!((d1 - d2).abs() <= 1e-9, "{v:?} s={s}");
        assert!(b.support().len() <= s);
    }
}

proptest! {
    #[test]
    fn projection_is_optimal(v in prop::collection::vec(-3.0f64..3.0, 1..10), seed in any::<u64>()) {
        let p = v.len();
        let b = project_simplex(&dv(&v)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..1.0)).collect();
        let w = project_simplex(&dv(&w)).unwrap();
        prop_assert!(dist(&v, b.as_slice()) <= dist(&v, w.as_slice()) + 1e-12);
    }

    #[test]
    fn projection_idempotent_ordered_shift_invariant(v in prop::collection::vec(-3.0f64..3.0, 1..12), t in -5.0f64..5.0) {
        let b = project_simplex(&dv(&v)).unwrap();
        let again = project_simplex(b.as_vector()).unwrap();
        prop_assert!(dist(b.as_slice(), again.as_slice()) <= 1e-12);
        for i in 0..v.len() {
            for j in 0..v.len() {
                if v[i] >= v[j] {
                    prop_assert!(b.as_slice()[i] >= b.as_slice()[j]);
                }
            }
        }
        let shifted: Vec<f64> = v.iter().map(|x| x + t).collect();
        let bs = project_simplex(&dv(&shifted)).unwrap();
        prop_assert!(dist(b.as_slice(), bs.as_slice()) <= 1e-12);
        prop_assert!(b.as_slice().iter().all(|&x| x >= 0.0));
        prop_assert!((b.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-10);
    }
}

fn diag_close(h: &HermitianMatrix, d: &[f64], tol: f64) {
    let expected = HermitianMatrix::from_diagonal(d);
    let err = (h.as_matrix() - expected.as_matrix()).norm();
    assert!(err < tol, "error {err}");
}

fn random_unitary(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    let a = DMatrix::from_fn(m, m, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    a.qr().q()
}

#[test]
fn spectral_examples() {
    let p = project_spectral_simplex(&HermitianMatrix::from_diagonal(&[0.5, 0.3, -0.2])).unwrap();
    // Vector oracle on the eigenvalues.
    let phi = project_simplex(&dv(&[0.5, 0.3, -0.2])).unwrap();
    diag_close(&p, phi.as_slice(), 1e-12);
    diag_close(&p, &[0.6, 0.4, 0.0], 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = random_unitary(4, &mut rng);
    let col = u.column(0).into_owned();
    let proj = HermitianMatrix::outer(&col);
    let twice = proj.scaled(2.0);
    let out = project_spectral_simplex(&twice).unwrap();
    assert!((out.as_matrix() - proj.as_matrix()).norm() < 1e-10);
    let r1 = SparsityBudget::new(1, 4).unwrap();
    let out = project_spectral_sparse_simplex(&proj, r1).unwrap();
    assert!((out.as_matrix() - proj.as_matrix()).norm() < 1e-10);

    let d = HermitianMatrix::from_diagonal(&[0.6, 0.3, 0.1]);
    let r = project_spectral_sparse_simplex(&d, SparsityBudget::new(1, 3).unwrap()).unwrap();
    diag_close(&r, &[1.0, 0.0, 0.0], 1e-12);
    let full = project_spectral_sparse_simplex(&d, SparsityBudget::new(3, 3).unwrap()).unwrap();
    assert!((full.as_matrix() - project_spectral_simplex(&d).unwrap().as_matrix()).norm() < 1e-12);
    assert!(project_spectral_sparse_simplex(&d, SparsityBudget::new(4, 4).unwrap()).is_err());
}

#[test]
fn spectral_projection_fixes_feasible_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let m = rng.random_range(2..6);
        let u = random_unitary(m, &mut rng);
        let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        let total: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|x| x / total).collect();
        let b = HermitianMatrix::from_spectrum(&w, &u);
        let p = project_spectral_simplex(&b).unwrap();
        assert!((p.as_matrix() - b.as_matrix()).norm() < 1e-10);
    }
}

#[test]
fn spectral_projection_is_unitarily_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let m = rng.random_range(2..7);
        // Distinct eigenvalues keep the eigenvectors well defined.
        let vals: Vec<f64> = (0..m).map(|i| i as f64 * 0.37 - 0.5 + rng.random_range(0.0..0.1)).collect();
        let v = random_unitary(m, &mut rng);
        let mat = HermitianMatrix::from_spectrum(&vals, &v);
        let u = random_unitary(m, &mut rng);
        let rotated = HermitianMatrix::symmetrized(&u * mat.as_matrix() * u.adjoint());
        let lhs = project_spectral_simplex(&rotated).unwrap();
        let rhs = &u * project_spectral_simplex(&mat).unwrap().as_matrix() * u.adjoint();
        assert!((lhs.as_matrix() - rhs).norm() < 1e-8);
    }
}

#[test]
fn psd_cone_clips_negative_eigenvalues() {
    let p = project_psd_cone(&HermitianMatrix::from_diagonal(&[0.5, -0.3, 2.0])).unwrap();
    diag_close(&p, &[0.5, 0.0, 2.0], 1e-12);
}
