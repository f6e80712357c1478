//! Small dense helpers shared by the estimators.

use nalgebra::{ComplexField, DMatrix, Dyn, Scalar, LU};
use num_complex::Complex64;

/// Condition numbers above this are treated as numerically singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Maximum absolute column sum.
pub fn norm1<T: ComplexField>(m: &DMatrix<T>) -> f64
where
    T::RealField: Into<f64>,
{
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|x| x.clone().modulus().into()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse together with its 1-norm condition number, or `None` when the
/// LU factorisation hits an exact zero pivot.
pub fn inverse_with_condition<T>(m: &DMatrix<T>) -> Option<(DMatrix<T>, f64)>
where
    T: ComplexField + Scalar,
    T::RealField: Into<f64>,
{
    let lu: LU<T, Dyn, Dyn> = m.clone().lu();
    let inv = lu.try_inverse()?;
    let cond = norm1(m) * norm1(&inv);
    if !cond.is_finite() {
        return None;
    }
    Some((inv, cond))
}

/// `(M + M^H) / 2`.
pub fn hermitian_part(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entrywise deviation `|M_ij - conj(M_ji)|`.
pub fn hermitian_deviation(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Sum of squared moduli.
pub fn frobenius_sq(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Largest entry modulus.
pub fn max_modulus(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue_hermitian(m: &DMatrix<Complex64>) -> f64 {
    hermitian_part(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Lifts a real matrix to complex.
pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Symmetric square root factor `L` with `L L^T = V`. A zero matrix maps
/// to a zero factor; otherwise `V` must be positive definite.
pub fn covariance_factor(v: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if v.iter().all(|&x| x == 0.0) {
        return Some(DMatrix::zeros(v.nrows(), v.ncols()));
    }
    let sym = (v + v.transpose()) * 0.5;
    sym.cholesky().map(|c| c.unpack())
}
