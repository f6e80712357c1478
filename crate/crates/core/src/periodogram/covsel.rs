//! Gaussian covariance selection: maximum likelihood covariance with
//! prescribed zeros in the precision matrix.
//!
//! Cyclic column regression restricted to the free entries of each column
//! (the known-graph variant of the graphical lasso iteration).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct CovselOptions {
    /// Stop when the largest covariance update falls below this multiple
    /// of the mean diagonal.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for CovselOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CovarianceSelection {
    /// Fitted covariance; equals the input on the diagonal and on free pairs.
    pub sigma: DMatrix<f64>,
    /// Fitted precision, exactly zero on masked-out pairs.
    pub theta: DMatrix<f64>,
    pub sweeps: usize,
    /// Ridge added to the input diagonal, zero when none was needed.
    pub ridge: f64,
}

/// Lower Cholesky factor of a row-major `m × m` matrix, in place.
fn cholesky_in_place(a: &mut [f64], m: usize) -> bool {
    for j in 0..m {
        let mut s = a[j * m + j];
        for k in 0..j {
            s -= a[j * m + k] * a[j * m + k];
        }
        if !(s > 0.0) {
            return false;
        }
        let s = s.sqrt();
        a[j * m + j] = s;
        for i in (j + 1)..m {
            let mut v = a[i * m + j];
            for k in 0..j {
                v -= a[i * m + k] * a[j * m + k];
            }
            a[i * m + j] = v / s;
        }
    }
    true
}

fn cholesky_solve(l: &[f64], m: usize, b: &mut [f64]) {
    for i in 0..m {
        let mut v = b[i];
        for k in 0..i {
            v -= l[i * m + k] * b[k];
        }
        b[i] = v / l[i * m + i];
    }
    for i in (0..m).rev() {
        let mut v = b[i];
        for k in (i + 1)..m {
            v -= l[k * m + i] * b[k];
        }
        b[i] = v / l[i * m + i];
    }
}

fn is_pd_above(s: &DMatrix<f64>, floor: f64) -> bool {
    let n = s.nrows();
    let mut a: Vec<f64> = (0..n * n).map(|k| s[(k / n, k % n)]).collect();
    for i in 0..n {
        a[i * n + i] -= floor;
    }
    cholesky_in_place(&mut a, n)
}

/// Maximises `log det Θ - tr(S Θ)` subject to `Θ_ij = 0` wherever
/// `mask_ij == 0` for `i != j`. Diagonal entries are always free.
pub fn constrained_mle(s: &DMatrix<f64>, mask: &DMatrix<f64>) -> Result<CovarianceSelection> {
    constrained_mle_with(s, mask, CovselOptions::default())
}

pub fn constrained_mle_with(s: &DMatrix<f64>, mask: &DMatrix<f64>, opts: CovselOptions) -> Result<CovarianceSelection> {
    let n = s.nrows();
    if !s.is_square() || mask.shape() != s.shape() {
        return Err(Error::Dimension("covariance and mask must be square and of equal size".into()));
    }
    if (mask - mask.transpose()).abs().max() > 0.0 {
        return Err(Error::InvalidInput("mask must be symmetric".into()));
    }
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("covariance has non-finite entries".into()));
    }
    let mut s = (s + s.transpose()) * 0.5;
    if let Some(index) = (0..n).find(|&i| !(s[(i, i)] > 0.0)) {
        return Err(Error::NonPositiveDiagonal {
            index,
            value: s[(index, index)],
        });
    }
    let mut ridge = 0.0;
    if !is_pd_above(&s, 1e-10) {
        ridge = 1e-8 * s.trace() / n as f64;
        for i in 0..n {
            s[(i, i)] += ridge;
        }
        if !is_pd_above(&s, 0.0) {
            return Err(Error::NotPositiveDefinite("input covariance is not positive semidefinite".into()));
        }
    }
    let scale = s.trace() / n as f64;
    let tol = opts.tolerance * scale;

    let sv: Vec<f64> = (0..n * n).map(|k| s[(k / n, k % n)]).collect();
    let mut w = sv.clone();
    let free: Vec<Vec<usize>> = (0..n)
        .map(|j| (0..n).filter(|&k| k != j && mask[(k, j)] != 0.0).collect())
        .collect();
    let mut betas: Vec<Vec<f64>> = free.iter().map(|f| vec![0.0; f.len()]).collect();
    let mut g = vec![0.0; n * n];
    let mut sweeps = 0;
    let mut max_change = f64::INFINITY;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        max_change = 0.0f64;
        for j in 0..n {
            let f = &free[j];
            let m = f.len();
            let beta = &mut betas[j];
            if m > 0 {
                for (a, &fa) in f.iter().enumerate() {
                    for (b, &fb) in f.iter().enumerate().take(a + 1) {
                        g[a * m + b] = w[fa * n + fb];
                    }
                    beta[a] = sv[fa * n + j];
                }
                if !cholesky_in_place(&mut g[..m * m], m) {
                    return Err(Error::NotPositiveDefinite(format!("working covariance lost definiteness at column {j}")));
                }
                cholesky_solve(&g[..m * m], m, beta);
            }
            for k in 0..n {
                if k == j {
                    continue;
                }
                let mut v = 0.0;
                for (a, &fa) in f.iter().enumerate() {
                    v += w[k * n + fa] * beta[a];
                }
                max_change = max_change.max((v - w[k * n + j]).abs());
                w[k * n + j] = v;
                w[j * n + k] = v;
            }
        }
        if max_change < tol {
            break;
        }
    }

    let mut theta = DMatrix::zeros(n, n);
    for j in 0..n {
        let f = &free[j];
        let fitted: f64 = f.iter().zip(&betas[j]).map(|(&fa, b)| w[fa * n + j] * b).sum();
        let tjj = 1.0 / (sv[j * n + j] - fitted);
        theta[(j, j)] = tjj;
        for (&fa, b) in f.iter().zip(&betas[j]) {
            theta[(fa, j)] = -b * tjj;
        }
    }
    let theta = (&theta + theta.transpose()) * 0.5;
    let duality_gap = (s.clone() * &theta).trace() - n as f64;
    if max_change >= tol {
        return Err(Error::NoConvergence {
            sweeps,
            max_change,
            duality_gap: duality_gap.abs(),
        });
    }
    let sigma = DMatrix::from_row_slice(n, n, &w);
    Ok(CovarianceSelection {
        sigma,
        theta,
        sweeps,
        ridge,
    })
}

/// Gaussian log-likelihood kernel `-log det Σ - tr(Σ⁻¹ S)`, or `None` when
/// `Σ` is not positive definite.
pub fn gaussian_loglik(sigma: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<f64> {
    let c = sigma.clone().cholesky()?;
    let logdet = 2.0 * c.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    Some(-logdet - (c.inverse() * s).trace())
}
