//! Discrete Fourier transform and (smoothed) periodograms.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::spectra::{FieldKind, FrequencyGrid, SpectralField};

/// `J(l/T) = T^{-1/2} Σ_{t=1}^{T} X_t e^{-2πi t l / T}` for `l = 0..T-1`.
pub fn dft(panel: &DMatrix<f64>) -> Result<Vec<DVector<Complex64>>> {
    let (t_len, d) = panel.shape();
    if t_len < 2 {
        return Err(Error::InvalidInput("DFT needs at least two observations".into()));
    }
    let fft = FftPlanner::new().plan_fft_forward(t_len);
    let scale = 1.0 / (t_len as f64).sqrt();
    let mut out = vec![DVector::zeros(d); t_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); t_len];
    for j in 0..d {
        for (t, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(panel[(t, j)], 0.0);
        }
        fft.process(&mut buf);
        // the FFT sums from t = 0; shifting to t = 1 multiplies by e^{-2πil/T}
        for (l, v) in buf.iter().enumerate() {
            let shift = Complex64::from_polar(scale, -2.0 * PI * l as f64 / t_len as f64);
            out[l][j] = v * shift;
        }
    }
    Ok(out)
}

/// `I(ω_l) = J(ω_l) J(ω_l)ᴴ` for every `l`.
pub fn raw_periodogram(j: &[DVector<Complex64>]) -> Vec<DMatrix<Complex64>> {
    j.iter().map(|v| v * v.adjoint()).collect()
}

/// Symmetric kernel weights `W(k)`, `k = -m..m`, normalised to average one.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingSpec {
    bandwidth: usize,
    weights: Vec<f64>,
}

impl SmoothingSpec {
    /// Flat kernel `W ≡ 1`.
    pub fn daniell(bandwidth: usize) -> Self {
        Self {
            bandwidth,
            weights: vec![1.0; 2 * bandwidth + 1],
        }
    }

    /// Daniell kernel with `m = ⌊√T⌋`.
    pub fn default_for(t: usize) -> Self {
        Self::daniell((t as f64).sqrt().floor() as usize)
    }

    /// Custom weights for `k = -m..m` (odd length, symmetric, nonnegative,
    /// positive centre). They are rescaled to average one.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let len = weights.len();
        if len % 2 == 0 {
            return Err(Error::InvalidInput("kernel needs an odd number of weights".into()));
        }
        let m = len / 2;
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights[m] <= 0.0 {
            return Err(Error::InvalidInput("kernel weights must be nonnegative with positive centre".into()));
        }
        if (0..m).any(|k| (weights[k] - weights[len - 1 - k]).abs() > 1e-12) {
            return Err(Error::InvalidInput("kernel weights must be symmetric".into()));
        }
        let mean = weights.iter().sum::<f64>() / len as f64;
        Ok(Self {
            bandwidth: m,
            weights: weights.iter().map(|w| w / mean).collect(),
        })
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// `W(k)` for `k = -m..m`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// `(1/(2m+1)) Σ_{|k|≤m} W(k) I(ω_{(l+k) mod T})` at each requested `l`.
pub fn smooth(raw: &[DMatrix<Complex64>], spec: &SmoothingSpec, indices: &[usize]) -> Result<Vec<DMatrix<Complex64>>> {
    let t_len = raw.len();
    let m = spec.bandwidth;
    if 2 * m >= t_len {
        return Err(Error::InvalidInput(format!(
            "bandwidth {m} must be below T/2 = {}",
            t_len as f64 / 2.0
        )));
    }
    let d = raw[0].nrows();
    let norm = 1.0 / (2 * m + 1) as f64;
    Ok(indices
        .iter()
        .map(|&l| {
            let mut acc = DMatrix::<Complex64>::zeros(d, d);
            for (offset, &w) in spec.weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let idx = (l + t_len + offset - m) % t_len;
                acc += &raw[idx] * Complex64::new(w * norm, 0.0);
            }
            acc
        })
        .collect())
}

/// Raw periodogram on the Fourier grid of the panel.
pub fn periodogram_field(panel: &DMatrix<f64>) -> Result<SpectralField> {
    let grid = FrequencyGrid::fourier(panel.nrows())?;
    let raw = raw_periodogram(&dft(panel)?);
    let idx = grid.fourier_indices().expect("Fourier grid");
    let matrices = idx.iter().map(|&l| raw[l].clone()).collect();
    SpectralField::new(grid, matrices, FieldKind::Spectrum)
}

/// Smoothed periodogram on the Fourier grid of the panel.
pub fn smoothed_periodogram(panel: &DMatrix<f64>, spec: &SmoothingSpec) -> Result<SpectralField> {
    let grid = FrequencyGrid::fourier(panel.nrows())?;
    let raw = raw_periodogram(&dft(panel)?);
    let idx = grid.fourier_indices().expect("Fourier grid");
    SpectralField::new(grid, smooth(&raw, spec, &idx)?, FieldKind::Spectrum)
}
