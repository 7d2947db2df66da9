use nalgebra::DVector;

use crate::error::{invalid, Error, Result};
use crate::{FEASIBILITY_TOL, SUPPORT_TOL};

/// A point of the probability simplex: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector(DVector<f64>);

impl SimplexVector {
    /// Validates simplex membership within [`FEASIBILITY_TOL`].
    pub fn new(entries: DVector<f64>) -> Result<Self> {
        if entries.is_empty() {
            return invalid("simplex vector must have at least one entry");
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return invalid("simplex vector has non-finite entries");
        }
        let min = entries.min();
        let sum = entries.sum();
        if min < -FEASIBILITY_TOL || (sum - 1.0).abs() > FEASIBILITY_TOL {
            return invalid(format!(
                "not in the simplex (min entry {min:.3e}, sum {sum:.12})"
            ));
        }
        Ok(Self(entries))
    }

    pub fn from_slice(entries: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(entries))
    }

    /// Wraps a vector produced by a projection; feasibility holds by construction.
    pub(crate) fn from_projection(entries: DVector<f64>) -> Self {
        debug_assert!(entries.min() >= -FEASIBILITY_TOL);
        debug_assert!((entries.sum() - 1.0).abs() <= 1e-8);
        Self(entries)
    }

    /// The barycentre `1/p`.
    pub fn uniform(p: usize) -> Self {
        assert!(p >= 1);
        Self(DVector::from_element(p, 1.0 / p as f64))
    }

    /// The vertex `e_j` of the simplex in dimension `p`.
    pub fn vertex(p: usize, j: usize) -> Self {
        assert!(j < p);
        let mut v = DVector::zeros(p);
        v[j] = 1.0;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    /// Indices of entries above [`SUPPORT_TOL`].
    pub fn support(&self) -> Vec<usize> {
        support_of(&self.0)
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn is_vertex(&self) -> bool {
        self.support().len() == 1
    }
}

/// Indices whose entries exceed [`SUPPORT_TOL`].
pub fn support_of(v: &DVector<f64>) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, &x)| x > SUPPORT_TOL)
        .map(|(i, _)| i)
        .collect()
}

/// Sparsity level `s` (vector case) or rank `r` (matrix case), `1 <= s <= dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SparsityBudget(usize);

impl SparsityBudget {
    pub fn new(level: usize, dim: usize) -> Result<Self> {
        if level == 0 || level > dim {
            return invalid(format!("sparsity budget {level} outside 1..={dim}"));
        }
        Ok(Self(level))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// Indices sorted by descending value; ties keep the lower index first.
fn descending_order(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    idx
}

/// Threshold `tau` such that `(v_i - tau)_+` sums to one.
fn simplex_threshold(v: &[f64]) -> f64 {
    let order = descending_order(v);
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &i) in order.iter().enumerate() {
        cumsum += v[i];
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if v[i] > candidate {
            tau = candidate;
        } else {
            break;
        }
    }
    tau
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return invalid("cannot project an empty vector");
    }
    if v.iter().any(|x| !x.is_finite()) {
        return invalid("projection input has non-finite entries");
    }
    Ok(())
}

/// Euclidean projection onto the probability simplex.
///
/// Sort-based: with `z_(1) >= z_(2) >= ...` and
/// `q = max{k : z_(k) > (sum_{i<=k} z_(i) - 1) / k}`, the projection is
/// `(v_i - tau)_+` with `tau = (sum_{i<=q} z_(i) - 1) / q`.
pub fn project_simplex(v: &DVector<f64>) -> Result<SimplexVector> {
    check_finite(v.as_slice())?;
    let tau = simplex_threshold(v.as_slice());
    Ok(SimplexVector::from_projection(v.map(|x| (x - tau).max(0.0))))
}

/// Projection onto the face of the simplex spanned by `support`; other
/// coordinates are set to zero.
pub fn project_simplex_on_support(v: &DVector<f64>, support: &[usize]) -> Result<SimplexVector> {
    if support.is_empty() {
        return invalid("support must be nonempty");
    }
    let sub: Vec<f64> = support.iter().map(|&i| v[i]).collect();
    check_finite(&sub)?;
    let tau = simplex_threshold(&sub);
    let mut out = DVector::zeros(v.len());
    for (&i, &x) in support.iter().zip(&sub) {
        out[i] = (x - tau).max(0.0);
    }
    Ok(SimplexVector::from_projection(out))
}

/// Projection onto `{beta in simplex : ||beta||_0 <= s}`: keep the `s` largest
/// entries (lowest index wins ties) and project that subvector onto the simplex.
pub fn project_sparse_simplex(v: &DVector<f64>, s: SparsityBudget) -> Result<SimplexVector> {
    check_finite(v.as_slice())?;
    let s = s.get();
    if s > v.len() {
        return invalid(format!("sparsity budget {s} exceeds dimension {}", v.len()));
    }
    let mut keep: Vec<usize> = descending_order(v.as_slice()).into_iter().take(s).collect();
    keep.sort_unstable();
    project_simplex_on_support(v, &keep)
}

/// Projection onto `{beta : beta >= b_min, sum beta = 1}`.
pub fn project_lower_bounded_simplex(v: &DVector<f64>, b_min: f64) -> Result<SimplexVector> {
    check_finite(v.as_slice())?;
    if !(b_min >= 0.0) {
        return invalid(format!("lower bound must be nonnegative, got {b_min}"));
    }
    let s = v.len() as f64;
    let slack = 1.0 - s * b_min;
    if slack < -FEASIBILITY_TOL {
        return Err(Error::InfeasibleConstraint(format!(
            "{} entries with lower bound {b_min} exceed unit mass",
            v.len()
        )));
    }
    if slack <= FEASIBILITY_TOL {
        return Ok(SimplexVector::from_projection(DVector::from_element(
            v.len(),
            1.0 / s,
        )));
    }
    let scaled = v.map(|x| (x - b_min) / slack);
    let inner = project_simplex(&scaled)?;
    Ok(SimplexVector::from_projection(
        inner.into_inner().map(|x| b_min + slack * x),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dv(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn feasible_input_is_fixed() {
        let p = project_simplex(&dv(&[0.2, 0.3, 0.5])).unwrap();
        assert_abs_diff_eq!(p.as_vector(), &dv(&[0.2, 0.3, 0.5]), epsilon = 1e-15);
    }

    #[test]
    fn projection_examples() {
        let p = project_simplex(&dv(&[1.0, 0.5, -0.2])).unwrap();
        assert_abs_diff_eq!(p.as_vector(), &dv(&[0.75, 0.25, 0.0]), epsilon = 1e-15);
        let p = project_simplex(&dv(&[2.0, 0.0])).unwrap();
        assert_abs_diff_eq!(p.as_vector(), &dv(&[1.0, 0.0]), epsilon = 1e-15);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            project_simplex(&dv(&[1.0, f64::NAN])),
            Err(Error::InvalidInput(_))
        ));
        assert!(project_simplex(&dv(&[])).is_err());
    }

    #[test]
    fn ties_are_total() {
        let p = project_simplex(&dv(&[0.5, 0.5, 0.5])).unwrap();
        assert_abs_diff_eq!(p.as_vector(), &dv(&[1.0 / 3.0; 3]), epsilon = 1e-15);
        let p = project_sparse_simplex(&dv(&[0.3, 0.3, 0.3]), SparsityBudget(1)).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn sparse_projection_examples() {
        let b = SparsityBudget::new(2, 3).unwrap();
        let p = project_sparse_simplex(&dv(&[0.6, 0.3, 0.2]), b).unwrap();
        assert_abs_diff_eq!(p.as_vector(), &dv(&[0.65, 0.35, 0.0]), epsilon = 1e-15);
        let b = SparsityBudget::new(1, 2).unwrap();
        let p = project_sparse_simplex(&dv(&[0.9, 0.1]), b).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 0.0]);
        let v = dv(&[0.4, -1.0, 2.5, 0.3]);
        let full = project_sparse_simplex(&v, SparsityBudget::new(4, 4).unwrap()).unwrap();
        assert_eq!(full, project_simplex(&v).unwrap());
    }

    #[test]
    fn budget_range() {
        assert!(SparsityBudget::new(0, 3).is_err());
        assert!(SparsityBudget::new(4, 3).is_err());
        assert!(SparsityBudget::new(3, 3).is_ok());
    }

    #[test]
    fn lower_bounded_examples() {
        let p = project_lower_bounded_simplex(&dv(&[0.5, 0.5]), 0.1).unwrap();
        assert_abs_diff_eq!(p.as_vector(), &dv(&[0.5, 0.5]), epsilon = 1e-15);
        let p = project_lower_bounded_simplex(&dv(&[0.9, 0.1]), 0.2).unwrap();
        assert_abs_diff_eq!(p.as_vector(), &dv(&[0.8, 0.2]), epsilon = 1e-15);
        let p = project_lower_bounded_simplex(&dv(&[0.7, 0.3]), 0.5).unwrap();
        assert_abs_diff_eq!(p.as_vector(), &dv(&[0.5, 0.5]), epsilon = 1e-15);
        assert!(matches!(
            project_lower_bounded_simplex(&dv(&[0.5, 0.5, 0.0]), 0.4),
            Err(Error::InfeasibleConstraint(_))
        ));
    }

    #[test]
    fn lower_bounded_matches_grid_search() {
        // The feasible set for two entries is the segment beta_1 in [b, 1 - b].
        let v = dv(&[0.9, 0.1]);
        let b = 0.2;
        let (mut best, mut best_d) = (0.0, f64::INFINITY);
        for k in 0..=60_000 {
            let x = b + (1.0 - 2.0 * b) * k as f64 / 60_000.0;
            let d = (v[0] - x).powi(2) + (v[1] - (1.0 - x)).powi(2);
            if d < best_d {
                best_d = d;
                best = x;
            }
        }
        let p = project_lower_bounded_simplex(&v, b).unwrap();
        assert!((p.as_slice()[0] - best).abs() < 1e-4);
    }

    #[test]
    fn simplex_vector_validation() {
        assert!(SimplexVector::from_slice(&[0.5, 0.5]).is_ok());
        assert!(SimplexVector::from_slice(&[0.6, 0.5]).is_err());
        assert!(SimplexVector::from_slice(&[1.1, -0.1]).is_err());
        assert_eq!(SimplexVector::vertex(3, 1).support(), vec![1]);
    }
}
