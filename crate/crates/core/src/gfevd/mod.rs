//! Volatility connectedness networks: Garman–Klass log volatility, sparse
//! VAR, generalised forecast error variance decomposition, and the
//! connectivity-preserving threshold graph.

pub mod lasso;
pub mod ohlc;

use nalgebra::DMatrix;
use serde::Serialize;

pub use lasso::{lasso_var, lasso_var_fixed, LambdaRule, LassoOptions, LassoVarFit};
pub use ohlc::{garman_klass, log_volatility, Ohlc, VARIANCE_FLOOR};

use crate::error::{Error, Result};
use crate::graph::Network;

/// `B_0 = I`, `B_h = Σ_{j=1}^{min(h,p)} B_{h-j} Π_j` for `h = 0..=H`.
pub fn ma_coefficients(pi: &[DMatrix<f64>], horizon: usize) -> Vec<DMatrix<f64>> {
    let d = pi.first().map_or(0, |m| m.nrows());
    let mut b: Vec<DMatrix<f64>> = Vec::with_capacity(horizon + 1);
    b.push(DMatrix::identity(d, d));
    for h in 1..=horizon {
        let mut acc = DMatrix::zeros(d, d);
        for j in 1..=h.min(pi.len()) {
            acc += &b[h - j] * &pi[j - 1];
        }
        b.push(acc);
    }
    b
}

/// Which MA terms enter the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HorizonStart {
    /// `h = 1..=H`.
    #[default]
    One,
    /// `h = 0..=H-1`.
    Zero,
}

/// Row-normalised generalised variance decomposition.
///
/// `ψ_ij = V_jj⁻¹ Σ_h (e_iᵀ B_h V e_j)² / Σ_h e_iᵀ B_h V B_hᵀ e_i`.
/// `b` must hold `B_0..B_H`.
pub fn gfevd(b: &[DMatrix<f64>], v: &DMatrix<f64>, horizon: usize, start: HorizonStart) -> Result<DMatrix<f64>> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    if b.len() <= horizon {
        return Err(Error::Dimension(format!("need B_0..B_{horizon}, got {} matrices", b.len())));
    }
    let d = v.nrows();
    if v.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite("innovation covariance".into()));
    }
    let range = match start {
        HorizonStart::One => 1..=horizon,
        HorizonStart::Zero => 0..=horizon - 1,
    };
    let mut num = DMatrix::<f64>::zeros(d, d);
    let mut den = vec![0.0; d];
    for h in range {
        let bv = &b[h] * v;
        let bvb = &bv * b[h].transpose();
        for i in 0..d {
            den[i] += bvb[(i, i)];
            for j in 0..d {
                num[(i, j)] += bv[(i, j)] * bv[(i, j)];
            }
        }
    }
    let mut psi = DMatrix::zeros(d, d);
    for i in 0..d {
        if !(den[i] > 0.0) {
            return Err(Error::InvalidInput(format!(
                "forecast error variance of node {} is zero over the horizon",
                i + 1
            )));
        }
        for j in 0..d {
            psi[(i, j)] = num[(i, j)] / (v[(j, j)] * den[i]);
        }
        let total: f64 = psi.row(i).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidInput(format!("row {} of the decomposition is zero", i + 1)));
        }
        for j in 0..d {
            psi[(i, j)] /= total;
        }
    }
    Ok(psi)
}

/// Pairs `i < j` with `max(ψ_ij, ψ_ji) >= tau`.
fn edges_at(psi: &DMatrix<f64>, tau: f64) -> Vec<(usize, usize)> {
    let d = psi.nrows();
    let mut out = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            if psi[(i, j)].max(psi[(j, i)]) >= tau {
                out.push((i, j));
            }
        }
    }
    out
}

fn connected_at(psi: &DMatrix<f64>, tau: f64) -> bool {
    Network::new(psi.nrows(), &edges_at(psi, tau))
        .map(|n| n.is_connected())
        .unwrap_or(false)
}

/// Sorted distinct values of `max(ψ_ij, ψ_ji)` over pairs `i < j`.
pub fn default_candidates(psi: &DMatrix<f64>) -> Vec<f64> {
    let d = psi.nrows();
    let mut c: Vec<f64> = (0..d)
        .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
        .map(|(i, j)| psi[(i, j)].max(psi[(j, i)]))
        .collect();
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

fn sorted_candidates(candidates: &[f64]) -> Result<Vec<f64>> {
    let mut c: Vec<f64> = candidates.iter().copied().filter(|x| x.is_finite()).collect();
    if c.is_empty() {
        return Err(Error::InvalidInput("no candidate thresholds".into()));
    }
    c.sort_by(f64::total_cmp);
    c.dedup();
    Ok(c)
}

/// Largest candidate keeping the threshold graph connected, by bisection
/// (connectivity can only be lost as the threshold grows).
pub fn threshold_by_bisection(psi: &DMatrix<f64>, candidates: &[f64]) -> Result<f64> {
    let c = sorted_candidates(candidates)?;
    if !connected_at(psi, c[0]) {
        return Err(Error::NoConnectedThreshold);
    }
    let (mut lo, mut hi) = (0usize, c.len());
    // invariant: c[lo] connected, every index >= hi disconnected
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if connected_at(psi, c[mid]) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(c[lo])
}

/// Largest connected candidate by checking every candidate.
pub fn threshold_by_scan(psi: &DMatrix<f64>, candidates: &[f64]) -> Result<f64> {
    sorted_candidates(candidates)?
        .into_iter()
        .filter(|&t| connected_at(psi, t))
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))))
        .ok_or(Error::NoConnectedThreshold)
}

/// Thresholded symmetric graph from a decomposition matrix.
#[derive(Debug, Clone, Serialize)]
pub struct GfevdNetwork {
    pub tau_star: f64,
    /// `(i, j, w)` with `i < j` and `w = (ψ_ij + ψ_ji) / 2`.
    pub edges: Vec<(usize, usize, f64)>,
}

impl GfevdNetwork {
    pub fn to_network(&self, d: usize) -> Result<Network> {
        let pairs: Vec<_> = self.edges.iter().map(|&(i, j, _)| (i, j)).collect();
        let w: Vec<_> = self.edges.iter().map(|&(_, _, w)| w).collect();
        Network::with_weights(d, &pairs, &w)
    }
}

/// Builds the graph at the largest connectivity-preserving threshold.
/// Without candidates the distinct pairwise maxima of `ψ` are used.
pub fn build_network(psi: &DMatrix<f64>, candidates: Option<&[f64]>) -> Result<GfevdNetwork> {
    let owned;
    let c = match candidates {
        Some(c) => c,
        None => {
            owned = default_candidates(psi);
            &owned
        }
    };
    let tau_star = threshold_by_bisection(psi, c)?;
    let edges = edges_at(psi, tau_star)
        .into_iter()
        .map(|(i, j)| (i, j, 0.5 * (psi[(i, j)] + psi[(j, i)])))
        .collect();
    Ok(GfevdNetwork { tau_star, edges })
}

/// Options for the end-to-end pipeline.
#[derive(Debug, Clone, Copy)]
pub struct GfevdOptions {
    pub p_max: usize,
    pub horizon: usize,
    pub start: HorizonStart,
    pub lasso: LassoOptions,
}

impl Default for GfevdOptions {
    fn default() -> Self {
        Self {
            p_max: 5,
            horizon: 10,
            start: HorizonStart::One,
            lasso: LassoOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GfevdResult {
    pub psi: Vec<Vec<f64>>,
    pub horizon: usize,
    pub lag_order: usize,
    pub tau_star: f64,
    pub edges: Vec<(usize, usize, f64)>,
}

/// Log-volatility panel to thresholded connectedness network.
pub fn gfevd_pipeline(log_vol: &DMatrix<f64>, opts: &GfevdOptions) -> Result<GfevdResult> {
    let fit = lasso_var(log_vol, opts.p_max, &opts.lasso)?;
    let b = ma_coefficients(&fit.pi, opts.horizon);
    let psi = gfevd(&b, &fit.innovation_cov, opts.horizon, opts.start)?;
    let net = build_network(&psi, None)?;
    let d = psi.nrows();
    Ok(GfevdResult {
        psi: (0..d).map(|i| psi.row(i).iter().copied().collect()).collect(),
        horizon: opts.horizon,
        lag_order: fit.order(),
        tau_star: net.tau_star,
        edges: net.edges,
    })
}

/// Log-volatility panel (`T × d`) from per-node OHLC series.
pub fn log_volatility_panel(bars: &[Vec<Ohlc>]) -> Result<DMatrix<f64>> {
    let d = bars.len();
    if d == 0 {
        return Err(Error::InvalidInput("no series".into()));
    }
    let t_len = bars[0].len();
    if bars.iter().any(|b| b.len() != t_len) {
        return Err(Error::InvalidOhlc("series have different lengths".into()));
    }
    let mut x = DMatrix::zeros(t_len, d);
    for (j, series) in bars.iter().enumerate() {
        for (t, bar) in series.iter().enumerate() {
            x[(t, j)] = log_volatility(garman_klass(bar)?);
        }
    }
    Ok(x)
}
