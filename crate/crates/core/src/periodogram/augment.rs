//! Real 2d×2d representation of complex Hermitian d×d matrices.
//!
//! `M = C - iQ` maps to `½ [[C, -Q], [Q, C]]`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::hermitian_deviation;

/// Real symmetric `½ [[C, -Q], [Q, C]]` for Hermitian `M = C - iQ`.
pub fn augment(m: &DMatrix<Complex64>) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let dev = hermitian_deviation(m);
    if dev > 1e-10 * scale {
        return Err(Error::NotHermitian(dev));
    }
    let mut out = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            // average the two triangles so C and Q have exact symmetry
            let c = 0.5 * (m[(i, j)].re + m[(j, i)].re);
            let q = -0.5 * (m[(i, j)].im - m[(j, i)].im);
            out[(i, j)] = 0.5 * c;
            out[(d + i, d + j)] = 0.5 * c;
            out[(i, d + j)] = -0.5 * q;
            out[(d + i, j)] = 0.5 * q;
        }
    }
    Ok(out)
}

/// Inverse of [`augment`] that also projects a matrix without the block
/// structure onto it: `C = Σ₁₁ + Σ₂₂`, `Q = Σ₂₁ - Σ₁₂`, then `C` is
/// symmetrised and `Q` skew-symmetrised.
pub fn de_augment(sigma: &DMatrix<f64>) -> DMatrix<Complex64> {
    let d = sigma.nrows() / 2;
    let mut c = DMatrix::zeros(d, d);
    let mut q = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            c[(i, j)] = sigma[(i, j)] + sigma[(d + i, d + j)];
            q[(i, j)] = sigma[(d + i, j)] - sigma[(i, d + j)];
        }
    }
    let c = (&c + c.transpose()) * 0.5;
    let q = (&q - q.transpose()) * 0.5;
    DMatrix::from_fn(d, d, |i, j| Complex64::new(c[(i, j)], -q[(i, j)]))
}

/// Complex precision from the inverse of an augmented covariance.
///
/// If `Σ = augment(M)` then `Σ⁻¹` maps back to `4 M⁻¹`.
pub fn de_augment_precision(theta: &DMatrix<f64>) -> DMatrix<Complex64> {
    de_augment(theta) * Complex64::new(0.25, 0.0)
}
