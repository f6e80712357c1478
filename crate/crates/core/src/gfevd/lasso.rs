//! Sparse VAR estimation by per-equation lasso with time-blocked
//! cross-validation and BIC lag selection.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::var::lagged_design;

/// How the penalty level of each equation is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    /// Minimum mean squared error over contiguous folds.
    CrossValidated,
    /// Largest grid value, which zeroes every coefficient.
    Largest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    pub folds: usize,
    pub n_lambda: usize,
    /// Smallest grid value as a fraction of the largest.
    pub lambda_ratio: f64,
    pub rule: LambdaRule,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            folds: 10,
            n_lambda: 50,
            lambda_ratio: 1e-3,
            rule: LambdaRule::CrossValidated,
            tolerance: 1e-8,
            max_iter: 10_000,
        }
    }
}

/// Lasso-VAR fit with intercepts.
#[derive(Debug, Clone)]
pub struct LassoVarFit {
    pub pi: Vec<DMatrix<f64>>,
    pub intercept: DVector<f64>,
    pub innovation_cov: DMatrix<f64>,
    pub residuals: DMatrix<f64>,
    /// Selected penalty per equation, on the standardised scale.
    pub lambdas: Vec<f64>,
}

impl LassoVarFit {
    pub fn order(&self) -> usize {
        self.pi.len()
    }

    pub fn nonzero_count(&self) -> usize {
        self.pi.iter().flat_map(|m| m.iter()).filter(|&&x| x != 0.0).count()
    }
}

struct Standardised {
    x: DMatrix<f64>,
    mean: DVector<f64>,
    scale: DVector<f64>,
    y: DVector<f64>,
    y_mean: f64,
}

fn standardise(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<Standardised> {
    let (n, m) = x.shape();
    let nf = n as f64;
    let mean = DVector::from_fn(m, |j, _| x.column(j).sum() / nf);
    let scale = DVector::from_fn(m, |j, _| {
        (x.column(j).iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / nf).sqrt()
    });
    if scale.iter().any(|&s| !(s > 0.0)) {
        return None;
    }
    let xs = DMatrix::from_fn(n, m, |i, j| (x[(i, j)] - mean[j]) / scale[j]);
    let y_mean = y.sum() / nf;
    Some(Standardised {
        x: xs,
        mean,
        scale,
        y: y.add_scalar(-y_mean),
        y_mean,
    })
}

fn soft(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Coordinate descent for `(1/2n)|y - Xb|² + λ|b|₁` on standardised
/// columns, warm-started along a decreasing `lambdas` path. Works on the
/// Gram matrix so each update costs one column of `X'X`.
fn lasso_path(x: &DMatrix<f64>, y: &DVector<f64>, lambdas: &[f64], opts: &LassoOptions) -> Vec<DVector<f64>> {
    let (n, m) = x.shape();
    let nf = n as f64;
    let gram = x.transpose() * x / nf;
    // grad[j] = x_j'(y - Xb)/n
    let mut grad = x.transpose() * y / nf;
    let mut b = DVector::<f64>::zeros(m);
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        for _ in 0..opts.max_iter {
            let mut max_delta = 0.0f64;
            for j in 0..m {
                let gjj = gram[(j, j)];
                let new = soft(grad[j] + gjj * b[j], lambda) / gjj;
                let delta = new - b[j];
                if delta != 0.0 {
                    grad.axpy(-delta, &gram.column(j), 1.0);
                    b[j] = new;
                    max_delta = max_delta.max(delta.abs());
                }
            }
            if max_delta < opts.tolerance {
                break;
            }
        }
        out.push(b.clone());
    }
    out
}

fn lambda_grid(lambda_max: f64, opts: &LassoOptions) -> Vec<f64> {
    let k = opts.n_lambda.max(1);
    if k == 1 || lambda_max <= 0.0 {
        return vec![lambda_max.max(0.0)];
    }
    let ratio = opts.lambda_ratio.ln();
    (0..k)
        .map(|i| lambda_max * (ratio * i as f64 / (k - 1) as f64).exp())
        .collect()
}

/// Coefficients on the original scale plus intercept.
fn unscale(st: &Standardised, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let coef = b.component_div(&st.scale);
    let intercept = st.y_mean - coef.dot(&st.mean);
    (coef, intercept)
}

/// One equation: returns original-scale coefficients, intercept, λ.
fn fit_equation(x: &DMatrix<f64>, y: &DVector<f64>, opts: &LassoOptions) -> Option<(DVector<f64>, f64, f64)> {
    let st = standardise(x, y)?;
    let n = x.nrows() as f64;
    // nudged up so rounding in the coordinate updates cannot leave a
    // coefficient alive at the top of the path
    let lambda_max = (st.x.transpose() * &st.y).amax() / n * (1.0 + 1e-9);
    let grid = lambda_grid(lambda_max, opts);
    let chosen = match opts.rule {
        LambdaRule::Largest => 0,
        LambdaRule::CrossValidated => {
            let rows = x.nrows();
            let folds = opts.folds.clamp(2, rows);
            let mut mse = vec![0.0; grid.len()];
            for f in 0..folds {
                let lo = f * rows / folds;
                let hi = (f + 1) * rows / folds;
                let train: Vec<usize> = (0..rows).filter(|&i| i < lo || i >= hi).collect();
                let xt = x.select_rows(&train);
                let yt = DVector::from_fn(train.len(), |i, _| y[train[i]]);
                // a fold whose training rows are constant in some column
                // cannot be standardised; it contributes nothing
                let Some(sf) = standardise(&xt, &yt) else { continue };
                for (g, b) in lasso_path(&sf.x, &sf.y, &grid, opts).iter().enumerate() {
                    let (coef, icpt) = unscale(&sf, b);
                    for i in lo..hi {
                        let pred = icpt + x.row(i).transpose().dot(&coef);
                        mse[g] += (y[i] - pred).powi(2);
                    }
                }
            }
            // ties go to the larger penalty
            let mut best = 0;
            for g in 1..grid.len() {
                if mse[g] < mse[best] {
                    best = g;
                }
            }
            best
        }
    };
    let path = lasso_path(&st.x, &st.y, &grid[..=chosen], opts);
    let (coef, icpt) = unscale(&st, path.last().expect("nonempty path"));
    Some((coef, icpt, grid[chosen]))
}

fn fit_on_sample(panel: &DMatrix<f64>, p: usize, start: usize, opts: &LassoOptions) -> Result<LassoVarFit> {
    let d = panel.ncols();
    let (x, y) = lagged_design(panel, p, start);
    let eqs = (0..d)
        .into_par_iter()
        .map(|i| {
            let yi = y.column(i).into_owned();
            fit_equation(&x, &yi, opts).ok_or(Error::DegenerateSeries(i))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pi = vec![DMatrix::zeros(d, d); p];
    let mut intercept = DVector::zeros(d);
    let mut lambdas = Vec::with_capacity(d);
    for (i, (coef, icpt, lambda)) in eqs.into_iter().enumerate() {
        for k in 0..p {
            for j in 0..d {
                pi[k][(i, j)] = coef[k * d + j];
            }
        }
        intercept[i] = icpt;
        lambdas.push(lambda);
    }
    let mut residuals = y.clone();
    for t in 0..residuals.nrows() {
        let xt = x.row(t).transpose();
        for i in 0..d {
            let mut pred = intercept[i];
            for k in 0..p {
                pred += pi[k].row(i).transpose().dot(&xt.rows(k * d, d));
            }
            residuals[(t, i)] -= pred;
        }
    }
    let n = residuals.nrows() as f64;
    let v = residuals.transpose() * &residuals / n;
    Ok(LassoVarFit {
        pi,
        intercept,
        innovation_cov: (&v + v.transpose()) * 0.5,
        residuals,
        lambdas,
    })
}

fn check_panel(panel: &DMatrix<f64>, p_max: usize, opts: &LassoOptions) -> Result<()> {
    let (t_len, d) = panel.shape();
    if p_max == 0 {
        return Err(Error::InvalidInput("p_max must be at least 1".into()));
    }
    if t_len <= p_max + opts.folds.max(2) || 5 * t_len <= p_max * d {
        return Err(Error::InvalidInput(format!(
            "{t_len} observations are too few for lag {p_max} with {} folds",
            opts.folds
        )));
    }
    for j in 0..d {
        let col = panel.column(j);
        let mean = col.sum() / t_len as f64;
        if col.iter().all(|&v| v == mean) {
            return Err(Error::DegenerateSeries(j));
        }
    }
    Ok(())
}

/// Lasso-VAR at a fixed lag `p`, rows `t = p+1..T`.
pub fn lasso_var_fixed(panel: &DMatrix<f64>, p: usize, opts: &LassoOptions) -> Result<LassoVarFit> {
    check_panel(panel, p, opts)?;
    fit_on_sample(panel, p, p, opts)
}

/// Lag order minimising `log det V + k log(n)/n` with `k` the number of
/// nonzero coefficients, all candidates on the sample `t = p_max+1..T`
/// and `V` from the penalised residuals. The chosen lag is then refitted
/// on `t = p+1..T`.
pub fn lasso_var(panel: &DMatrix<f64>, p_max: usize, opts: &LassoOptions) -> Result<LassoVarFit> {
    check_panel(panel, p_max, opts)?;
    let n = (panel.nrows() - p_max) as f64;
    let mut best: Option<(f64, usize)> = None;
    for p in 1..=p_max {
        let fit = fit_on_sample(panel, p, p_max, opts)?;
        let logdet = match fit.innovation_cov.clone().cholesky() {
            Some(c) => 2.0 * c.l().diagonal().iter().map(|x| x.ln()).sum::<f64>(),
            None => f64::NEG_INFINITY,
        };
        let bic = logdet + fit.nonzero_count() as f64 * n.ln() / n;
        if best.map_or(true, |(b, _)| bic < b) {
            best = Some((bic, p));
        }
    }
    let p = best.expect("p_max >= 1").1;
    fit_on_sample(panel, p, p, opts)
}
