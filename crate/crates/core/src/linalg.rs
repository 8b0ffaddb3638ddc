//! Thin helpers over nalgebra for the small dense complex systems the
//! receivers solve.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Singular values in descending order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// `σ_max / σ_min`; infinite for an exactly singular matrix.
pub fn condition_number(s: &[f64]) -> f64 {
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Numerical rank with the usual `max(dim)·ε·σ_max` cut-off.
pub fn numerical_rank(s: &[f64], dim: usize) -> usize {
    let Some(&hi) = s.first() else { return 0 };
    let tol = hi * dim as f64 * f64::EPSILON;
    s.iter().filter(|&&x| x > tol).count()
}

pub fn lu_solve(a: &CMatrix, b: &CVector) -> Option<CVector> {
    a.clone().lu().solve(b)
}

/// Minimum-norm least-squares solution via SVD.
pub fn pinv_solve(a: &CMatrix, b: &CVector) -> CVector {
    let svd = a.clone().svd(true, true);
    let hi = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = hi * a.nrows().max(a.ncols()) as f64 * f64::EPSILON;
    svd.solve(b, eps).unwrap_or_else(|_| CVector::zeros(a.ncols()))
}

/// Lower Cholesky factor of a real symmetric positive-definite matrix, as a
/// complex matrix ready to whiten complex systems.
pub fn cholesky_lower(sigma: &DMatrix<f64>) -> Option<CMatrix> {
    let c = sigma.map(|x| Complex64::new(x, 0.0));
    c.cholesky().map(|ch| ch.l())
}

/// `L⁻¹·A` for lower-triangular `L`.
pub fn whiten(l: &CMatrix, a: &CMatrix) -> Option<CMatrix> {
    l.solve_lower_triangular(a)
}

pub fn whiten_vec(l: &CMatrix, b: &CVector) -> Option<CVector> {
    l.solve_lower_triangular(b)
}

/// `log₂ det(I + p·AᴴA)` computed from the singular values of `A`.
pub fn log2_det_identity_plus(a: &CMatrix, p: f64) -> f64 {
    singular_values(a).iter().map(|s| (p * s * s).ln_1p()).sum::<f64>() / std::f64::consts::LN_2
}
