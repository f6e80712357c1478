//! r-dependent spectra: soft-thresholding of a precision field at levels
//! chosen from the network distance structure, then inversion.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::StageStructure;
use crate::linalg::{hermitian_part, inverse_with_condition, MAX_CONDITION};
use crate::spectra::{FieldKind, SpectralField};

/// `(|z| - ρ)₊ e^{i arg z}`, with `arg 0 = 0`.
pub fn soft_threshold(z: Complex64, rho: f64) -> Complex64 {
    let r = z.norm();
    if r <= rho {
        return Complex64::new(0.0, 0.0);
    }
    z * ((r - rho) / r)
}

/// Threshold levels `ξ^(1), .., ξ^(r*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdLadder {
    pub xi: Vec<f64>,
}

impl ThresholdLadder {
    pub fn r_star(&self) -> usize {
        self.xi.len()
    }

    /// `ξ^(r)` for `1 <= r <= r*`.
    pub fn level(&self, r: usize) -> f64 {
        self.xi[r - 1]
    }
}

/// `ξ^(r)` is the smallest `|S_ij(ω)|` over all frequencies and all pairs
/// at distance `2r-1` or `2r`.
pub fn select_thresholds(precision: &SpectralField, stages: &StageStructure, r_star: usize) -> Result<ThresholdLadder> {
    if r_star == 0 {
        return Err(Error::InvalidInput("r* must be at least 1".into()));
    }
    if precision.dim() != stages.node_count() {
        return Err(Error::Dimension("precision field and network sizes differ".into()));
    }
    let mut xi = Vec::with_capacity(r_star);
    for r in 1..=r_star {
        let (lo, hi) = (2 * r - 1, 2 * r);
        let pairs = stages.pairs_within(lo, hi);
        if pairs.is_empty() {
            return Err(Error::EmptyStage { stage: r, lo, hi });
        }
        let level = precision
            .matrices()
            .iter()
            .flat_map(|m| pairs.iter().map(move |&(i, j)| m[(i, j)].norm()))
            .fold(f64::INFINITY, f64::min);
        xi.push(level);
    }
    for r in 1..r_star {
        if xi[r - 1] < xi[r] {
            log::warn!("threshold ladder increases from r = {r} ({:.3e}) to r = {} ({:.3e})", xi[r - 1], r + 1, xi[r]);
        }
    }
    Ok(ThresholdLadder { xi })
}

/// Soft-thresholds one precision matrix at level `xi`, keeping the
/// diagonal: `sft(S_ij + ξ 1{i=j} e^{i arg S_ii}; ξ)`.
pub fn threshold_matrix(s: &DMatrix<Complex64>, xi: f64) -> DMatrix<Complex64> {
    DMatrix::from_fn(s.nrows(), s.ncols(), |i, j| {
        let z = s[(i, j)];
        if i == j {
            let phase = if z.norm() == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                z / z.norm()
            };
            soft_threshold(z + phase * xi, xi)
        } else {
            soft_threshold(z, xi)
        }
    })
}

/// Thresholded precision field at stage `r` of the ladder.
pub fn threshold_precision(precision: &SpectralField, ladder: &ThresholdLadder, r: usize) -> Result<SpectralField> {
    if r == 0 || r > ladder.r_star() {
        return Err(Error::InvalidInput(format!("stage {r} outside 1..={}", ladder.r_star())));
    }
    let xi = ladder.level(r);
    let matrices = precision.matrices().iter().map(|m| threshold_matrix(m, xi)).collect();
    SpectralField::new(precision.grid().clone(), matrices, FieldKind::Precision)
}

/// Inverts a thresholded precision field. Singular frequencies are
/// collected and reported together unless `ridge_fallback` is set, in
/// which case `1e-8 · mean |diag| · I` is added before retrying.
pub fn r_dependent_spectrum(thresholded: &SpectralField, ridge_fallback: bool) -> Result<SpectralField> {
    let d = thresholded.dim();
    let mut singular = Vec::new();
    let mut out = Vec::with_capacity(thresholded.len());
    for (omega, m) in thresholded.iter() {
        let attempt = |a: &DMatrix<Complex64>| match inverse_with_condition(a) {
            Some((inv, cond)) if cond <= MAX_CONDITION => Some(hermitian_part(&inv)),
            _ => None,
        };
        let inv = attempt(m).or_else(|| {
            if !ridge_fallback {
                return None;
            }
            let mean_diag = (0..d).map(|i| m[(i, i)].norm()).sum::<f64>() / d as f64;
            let ridged = m + DMatrix::<Complex64>::identity(d, d) * Complex64::new(1e-8 * mean_diag.max(1e-300), 0.0);
            attempt(&ridged)
        });
        match inv {
            Some(inv) => out.push(inv),
            None => singular.push(omega),
        }
    }
    if !singular.is_empty() {
        return Err(Error::SingularAt(singular));
    }
    SpectralField::new(thresholded.grid().clone(), out, FieldKind::Spectrum)
}

/// Ladder plus the `r = 1..r*` thresholded precisions and spectra.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub ladder: ThresholdLadder,
    pub precisions: Vec<SpectralField>,
    pub spectra: Vec<SpectralField>,
}

pub fn build_hierarchy(precision: &SpectralField, stages: &StageStructure, r_star: usize, ridge_fallback: bool) -> Result<Hierarchy> {
    let ladder = select_thresholds(precision, stages, r_star)?;
    let mut precisions = Vec::with_capacity(r_star);
    let mut spectra = Vec::with_capacity(r_star);
    for r in 1..=r_star {
        let s = threshold_precision(precision, &ladder, r)?;
        spectra.push(r_dependent_spectrum(&s, ridge_fallback)?);
        precisions.push(s);
    }
    Ok(Hierarchy {
        ladder,
        precisions,
        spectra,
    })
}
