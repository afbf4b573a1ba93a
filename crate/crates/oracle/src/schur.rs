//! Conditional cross-covariance of Gaussian blocks through the precision
//! matrix.

use nalgebra::DMatrix;

/// Frobenius norm of `Cov(A, B | C)` for a Gaussian with covariance `cov`.
///
/// Computed by inverting the joint covariance of `A ∪ B ∪ C`, keeping the
/// `(A ∪ B)` block of the precision and inverting it back. Returns `None`
/// when either inversion fails.
pub fn oracle_schur_ci(cov: &DMatrix<f64>, a: &[usize], b: &[usize], c: &[usize]) -> Option<f64> {
    let idx: Vec<usize> = a.iter().chain(b).chain(c).copied().collect();
    let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| cov[(idx[i], idx[j])]);
    let precision = sub.try_inverse()?;
    let ab = a.len() + b.len();
    let cond_cov = precision.view((0, 0), (ab, ab)).into_owned().try_inverse()?;
    Some(cond_cov.view((0, a.len()), (a.len(), b.len())).norm())
}
