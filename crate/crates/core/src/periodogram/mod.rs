//! Nonparametric and penalised spectral estimators.
//!
//! Penalisation refits each frequency's spectral matrix by covariance
//! selection on its real augmented form, with zeros imposed on the
//! precision entries of node pairs outside a network mask.

pub mod augment;
pub mod covsel;
pub mod dft;

use nalgebra::DMatrix;
use rayon::prelude::*;

pub use augment::{augment, de_augment, de_augment_precision};
pub use covsel::{constrained_mle, constrained_mle_with, CovarianceSelection, CovselOptions};
pub use dft::{dft, periodogram_field, raw_periodogram, smooth, smoothed_periodogram, SmoothingSpec};

use crate::error::{Error, Result};
use crate::graph::{augment_mask, induced_adjacency, NetworkContext};
use crate::spectra::{var_spectrum, FieldKind, FrequencyGrid, SpectralField};
use crate::var::{fit_var_ols, select_var_order_bic};

/// Which node pairs keep a free precision entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Penalty {
    /// No refit.
    None,
    /// Direct neighbours only (`A_1`).
    Adjacency,
    /// Pairs within `2 r*` stages.
    Induced { r_star: usize },
}

impl Penalty {
    /// The `d × d` mask, or `None` for no penalty.
    pub fn mask(&self, ctx: &NetworkContext) -> Option<DMatrix<f64>> {
        let d = ctx.node_count();
        match *self {
            Penalty::None => None,
            Penalty::Adjacency if ctx.r_max() == 0 => Some(DMatrix::zeros(d, d)),
            Penalty::Adjacency => Some(ctx.stages().stage(1).clone()),
            Penalty::Induced { .. } if ctx.r_max() == 0 => Some(DMatrix::zeros(d, d)),
            Penalty::Induced { r_star } => Some(induced_adjacency(ctx.stages(), r_star.max(1))),
        }
    }
}

/// A spectrum estimate together with the precision implied by the
/// penalised fit (exact zeros off the mask), when one was computed.
#[derive(Debug, Clone)]
pub struct SpectrumEstimate {
    pub spectrum: SpectralField,
    pub precision: Option<SpectralField>,
}

/// Refits every frequency of `field` by covariance selection under
/// `augment_mask(mask)`.
pub fn penalize_field(field: &SpectralField, mask: &DMatrix<f64>) -> Result<SpectrumEstimate> {
    penalize_field_with(field, mask, CovselOptions::default())
}

pub fn penalize_field_with(field: &SpectralField, mask: &DMatrix<f64>, opts: CovselOptions) -> Result<SpectrumEstimate> {
    if mask.nrows() != field.dim() {
        return Err(Error::Dimension("mask size differs from spectrum dimension".into()));
    }
    let big_mask = augment_mask(mask);
    let pairs: Vec<_> = field
        .matrices()
        .par_iter()
        .map(|m| {
            let fit = constrained_mle_with(&augment(m)?, &big_mask, opts)?;
            Ok((de_augment(&fit.sigma), de_augment_precision(&fit.theta)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (spec, prec): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok(SpectrumEstimate {
        spectrum: SpectralField::new(field.grid().clone(), spec, FieldKind::Spectrum)?,
        precision: Some(SpectralField::new(field.grid().clone(), prec, FieldKind::Precision)?),
    })
}

fn apply_penalty(field: SpectralField, penalty: Penalty, ctx: &NetworkContext) -> Result<SpectrumEstimate> {
    if field.dim() != ctx.node_count() {
        return Err(Error::Dimension("panel width differs from network size".into()));
    }
    match penalty.mask(ctx) {
        None => Ok(SpectrumEstimate {
            spectrum: field,
            precision: None,
        }),
        Some(mask) => penalize_field(&field, &mask),
    }
}

/// Smoothed periodogram, optionally refitted under a network mask.
pub fn np_spectrum_penalized(
    panel: &DMatrix<f64>,
    spec: &SmoothingSpec,
    penalty: Penalty,
    ctx: &NetworkContext,
) -> Result<SpectrumEstimate> {
    apply_penalty(smoothed_periodogram(panel, spec)?, penalty, ctx)
}

/// Lag selection for the unrestricted VAR plug-in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarLag {
    Fixed(usize),
    Bic { p_max: usize },
}

/// Unrestricted VAR plug-in spectrum on the panel's Fourier grid,
/// optionally refitted under a network mask.
pub fn parametric_var_penalized(
    panel: &DMatrix<f64>,
    lag: VarLag,
    penalty: Penalty,
    ctx: &NetworkContext,
) -> Result<SpectrumEstimate> {
    let p = match lag {
        VarLag::Fixed(p) => p,
        VarLag::Bic { p_max } => select_var_order_bic(panel, p_max)?,
    };
    let fit = fit_var_ols(panel, p)?;
    let grid = FrequencyGrid::fourier(panel.nrows())?;
    let field = var_spectrum(&fit.phi, &fit.innovation_cov, &grid)?;
    apply_penalty(field, penalty, ctx)
}
