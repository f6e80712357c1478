//! Spectral densities of VAR/GNAR processes, their inverses, coherence and
//! partial coherence on a frequency grid.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnar::{var_coefficients, GnarParams};
use crate::graph::NetworkContext;
use crate::linalg::{hermitian_part, inverse_with_condition, to_complex, MAX_CONDITION};

/// Ascending frequencies in `[0, 0.5]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    values: Vec<f64>,
    /// Series length when the grid is `l / T` for integer `l`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fourier_length: Option<usize>,
}

impl FrequencyGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("frequency grid is empty".into()));
        }
        if values.iter().any(|w| !(0.0..=0.5).contains(w)) {
            return Err(Error::InvalidInput("frequencies must lie in [0, 0.5]".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("frequencies must be strictly increasing".into()));
        }
        Ok(Self {
            values,
            fourier_length: None,
        })
    }

    /// `ω_l = l/T` for `l = 1..⌊T/2⌋-1`.
    pub fn fourier(t: usize) -> Result<Self> {
        if t < 6 {
            return Err(Error::InvalidInput(format!("series length {t} too short for a Fourier grid")));
        }
        let values = (1..t / 2).map(|l| l as f64 / t as f64).collect();
        Ok(Self {
            values,
            fourier_length: Some(t),
        })
    }

    /// `n` equally spaced points `k / (2n)`, `k = 1..n`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("grid needs at least one point".into()));
        }
        Self::new((1..=n).map(|k| k as f64 / (2 * n) as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn fourier_length(&self) -> Option<usize> {
        self.fourier_length
    }

    /// Fourier indices `l` of the grid points, when it is a Fourier grid.
    pub fn fourier_indices(&self) -> Option<Vec<usize>> {
        let t = self.fourier_length?;
        Some(self.values.iter().map(|w| (w * t as f64).round() as usize).collect())
    }
}

/// What a [`SpectralField`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Spectrum,
    Precision,
    Coherence,
    PartialCoherence,
}

impl FieldKind {
    pub fn is_real(self) -> bool {
        matches!(self, FieldKind::Coherence | FieldKind::PartialCoherence)
    }
}

/// One `d × d` matrix per grid frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: FrequencyGrid,
    matrices: Vec<DMatrix<Complex64>>,
    kind: FieldKind,
}

impl SpectralField {
    pub fn new(grid: FrequencyGrid, matrices: Vec<DMatrix<Complex64>>, kind: FieldKind) -> Result<Self> {
        if grid.len() != matrices.len() {
            return Err(Error::Dimension(format!(
                "{} frequencies but {} matrices",
                grid.len(),
                matrices.len()
            )));
        }
        let d = matrices.first().map_or(0, |m| m.nrows());
        if matrices.iter().any(|m| m.nrows() != d || m.ncols() != d) {
            return Err(Error::Dimension("matrices must all be square and of equal size".into()));
        }
        Ok(Self { grid, matrices, kind })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn matrices(&self) -> &[DMatrix<Complex64>] {
        &self.matrices
    }

    pub fn into_matrices(self) -> Vec<DMatrix<Complex64>> {
        self.matrices
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    /// Iterates `(ω, matrix)`.
    pub fn iter(&self) -> impl Iterator<Item = (f64, &DMatrix<Complex64>)> {
        self.grid.values.iter().copied().zip(self.matrices.iter())
    }

    /// Entry `(i, j)` across the grid.
    pub fn curve(&self, i: usize, j: usize) -> Vec<Complex64> {
        self.matrices.iter().map(|m| m[(i, j)]).collect()
    }
}

fn transfer(phi: &[DMatrix<f64>], omega: f64) -> DMatrix<Complex64> {
    let d = phi.first().map_or(0, |m| m.nrows());
    let mut u = DMatrix::<Complex64>::identity(d, d);
    for (k, m) in phi.iter().enumerate() {
        let z = Complex64::from_polar(1.0, -2.0 * PI * (k + 1) as f64 * omega);
        u -= to_complex(m) * z;
    }
    u
}

/// `f(ω) = U(ω)⁻¹ V U(ω)⁻ᴴ` with `U(ω) = I - Σ_k Φ_k e^{-2πikω}`.
pub fn var_spectrum(phi: &[DMatrix<f64>], v: &DMatrix<f64>, grid: &FrequencyGrid) -> Result<SpectralField> {
    let d = v.nrows();
    if !v.is_square() || phi.iter().any(|m| m.shape() != (d, d)) {
        return Err(Error::Dimension("coefficient and covariance shapes differ".into()));
    }
    let vc = to_complex(v);
    let matrices = grid
        .values()
        .par_iter()
        .map(|&omega| {
            if phi.is_empty() {
                return Ok(vc.clone());
            }
            let u = transfer(phi, omega);
            match inverse_with_condition(&u) {
                Some((inv, cond)) if cond <= MAX_CONDITION => Ok(hermitian_part(&(&inv * &vc * inv.adjoint()))),
                _ => Err(Error::SingularTransfer { omega }),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    SpectralField::new(grid.clone(), matrices, FieldKind::Spectrum)
}

/// Spectrum of a GNAR model through its VAR embedding.
pub fn gnar_spectrum(params: &GnarParams, ctx: &NetworkContext, grid: &FrequencyGrid) -> Result<SpectralField> {
    let phi = var_coefficients(params, ctx)?;
    var_spectrum(&phi, params.innovation_cov(), grid)
}

/// Inverse of every matrix in the field, with a condition-number guard.
pub fn invert_field(field: &SpectralField, kind: FieldKind) -> Result<SpectralField> {
    let matrices = field
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(omega, m)| match inverse_with_condition(m) {
            Some((inv, cond)) if cond <= MAX_CONDITION => Ok(hermitian_part(&inv)),
            Some((_, cond)) => Err(Error::IllConditioned { omega, condition: cond }),
            None => Err(Error::IllConditioned {
                omega,
                condition: f64::INFINITY,
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    SpectralField::new(field.grid.clone(), matrices, kind)
}

/// `S(ω) = f(ω)⁻¹`.
pub fn precision(spectrum: &SpectralField) -> Result<SpectralField> {
    invert_field(spectrum, FieldKind::Precision)
}

fn normalised_squares(field: &SpectralField, kind: FieldKind) -> Result<SpectralField> {
    let d = field.dim();
    let mut matrices = Vec::with_capacity(field.len());
    for m in field.matrices() {
        let diag: Vec<f64> = (0..d).map(|i| m[(i, i)].re).collect();
        if let Some((index, &value)) = diag.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
            return Err(Error::NonPositiveDiagonal { index, value });
        }
        let out = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                let a = m[(i, j)];
                let b = m[(j, i)];
                // average the two triangles so the result is exactly symmetric
                let sq = 0.5 * (a.norm_sqr() + b.norm_sqr()) / (diag[i] * diag[j]);
                Complex64::new(sq.min(1.0), 0.0)
            }
        });
        matrices.push(out);
    }
    SpectralField::new(field.grid.clone(), matrices, kind)
}

/// Squared coherence `|f_ij|² / (f_ii f_jj)`.
pub fn coherence(spectrum: &SpectralField) -> Result<SpectralField> {
    normalised_squares(spectrum, FieldKind::Coherence)
}

/// Squared partial coherence `|S_ij|² / (S_ii S_jj)`, unit diagonal.
pub fn partial_coherence(precision: &SpectralField) -> Result<SpectralField> {
    normalised_squares(precision, FieldKind::PartialCoherence)
}
