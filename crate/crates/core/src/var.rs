//! Unrestricted vector autoregressions: simulation and least squares.
//!
//! Panels are `T × d` matrices with rows indexed by time.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::covariance_factor;

/// Draws `rows` Gaussian innovation vectors with covariance `V`, one per
/// row. Standard normals are consumed row-major so different simulators
/// fed the same generator state see the same shocks.
pub fn draw_innovations<R: Rng + ?Sized>(v: &DMatrix<f64>, rows: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let d = v.nrows();
    if v.ncols() != d {
        return Err(Error::Dimension("innovation covariance must be square".into()));
    }
    let factor = covariance_factor(v)
        .ok_or_else(|| Error::NotPositiveDefinite("innovation covariance".into()))?;
    let mut z = DMatrix::zeros(rows, d);
    for t in 0..rows {
        for j in 0..d {
            z[(t, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(z * factor.transpose())
}

/// Runs `x_t = Σ_k Φ_k x_{t-k} + ε_t` from zero initial state over the
/// given innovations and drops the first `burn_in` rows.
pub fn var_recursion(phi: &[DMatrix<f64>], innovations: &DMatrix<f64>, burn_in: usize) -> DMatrix<f64> {
    let (total, d) = innovations.shape();
    let p = phi.len();
    let mut x = DMatrix::zeros(total, d);
    for t in 0..total {
        let mut row = innovations.row(t).transpose();
        for k in 1..=p.min(t) {
            row += &phi[k - 1] * x.row(t - k).transpose();
        }
        x.set_row(t, &row.transpose());
    }
    x.rows(burn_in.min(total), total - burn_in.min(total)).into_owned()
}

/// Simulates `T` observations of a Gaussian VAR(p).
pub fn simulate_var<R: Rng + ?Sized>(
    phi: &[DMatrix<f64>],
    v: &DMatrix<f64>,
    t: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    for m in phi {
        if m.shape() != v.shape() {
            return Err(Error::Dimension("coefficient and covariance shapes differ".into()));
        }
    }
    let eps = draw_innovations(v, t + burn_in, rng)?;
    Ok(var_recursion(phi, &eps, burn_in))
}

/// Lagged regressors `[x_{t-1}, .., x_{t-p}]` for `t = start..T`.
pub fn lagged_design(panel: &DMatrix<f64>, p: usize, start: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (t_len, d) = panel.shape();
    let n = t_len - start;
    let mut x = DMatrix::zeros(n, p * d);
    for (row, t) in (start..t_len).enumerate() {
        for k in 1..=p {
            for j in 0..d {
                x[(row, (k - 1) * d + j)] = panel[(t - k, j)];
            }
        }
    }
    (x, panel.rows(start, n).into_owned())
}

/// Least-squares VAR fit.
#[derive(Debug, Clone)]
pub struct VarFit {
    pub phi: Vec<DMatrix<f64>>,
    pub innovation_cov: DMatrix<f64>,
    pub residuals: DMatrix<f64>,
}

fn fit_on_sample(panel: &DMatrix<f64>, p: usize, start: usize) -> Result<VarFit> {
    let d = panel.ncols();
    let (x, y) = lagged_design(panel, p, start);
    let gram = x.transpose() * &x;
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::RankDeficient(vec![format!("VAR({p}) lagged design")]))?;
    let coef = chol.solve(&(x.transpose() * &y));
    let residuals = &y - &x * &coef;
    let n = residuals.nrows() as f64;
    let cov = residuals.transpose() * &residuals / n;
    let phi = (0..p)
        .map(|k| coef.rows(k * d, d).transpose())
        .collect();
    Ok(VarFit {
        phi,
        innovation_cov: (&cov + cov.transpose()) * 0.5,
        residuals,
    })
}

/// Per-equation OLS without intercept, using rows `t = p+1..T`.
pub fn fit_var_ols(panel: &DMatrix<f64>, p: usize) -> Result<VarFit> {
    let (t_len, d) = panel.shape();
    if p == 0 {
        return Err(Error::InvalidInput("VAR order must be positive".into()));
    }
    if t_len <= p * d + p {
        return Err(Error::InvalidInput(format!(
            "VAR({p}) on {d} series needs more than {} observations, got {t_len}",
            p * d + p
        )));
    }
    fit_on_sample(panel, p, p)
}

/// Lag order in `1..=p_max` minimising `log det V + p d² log(n)/n`, every
/// candidate fitted on the common sample `t = p_max+1..T`.
pub fn select_var_order_bic(panel: &DMatrix<f64>, p_max: usize) -> Result<usize> {
    let (t_len, d) = panel.shape();
    if p_max == 0 || t_len <= p_max * d + p_max {
        return Err(Error::InvalidInput(format!(
            "cannot select among VAR orders up to {p_max} with {t_len} observations"
        )));
    }
    let n = (t_len - p_max) as f64;
    let mut best = (f64::INFINITY, 1);
    for p in 1..=p_max {
        let fit = fit_on_sample(panel, p, p_max)?;
        let logdet = match fit.innovation_cov.clone().cholesky() {
            Some(c) => 2.0 * c.l().diagonal().iter().map(|x| x.ln()).sum::<f64>(),
            None => f64::NEG_INFINITY,
        };
        let bic = logdet + (p * d * d) as f64 * n.ln() / n;
        if bic < best.0 {
            best = (bic, p);
        }
    }
    Ok(best.1)
}
