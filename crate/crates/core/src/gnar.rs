//! Global-α GNAR models: coefficients, VAR embedding, simulation, least
//! squares and BIC order selection.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::NetworkContext;
use crate::var::{draw_innovations, var_recursion};

/// Lag order `p` with a stage depth `s_k` per lag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GnarOrder {
    stages: Vec<usize>,
}

impl GnarOrder {
    pub fn new(stages: Vec<usize>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidInput("GNAR order needs p >= 1".into()));
        }
        Ok(Self { stages })
    }

    pub fn p(&self) -> usize {
        self.stages.len()
    }

    /// `[s_1, .., s_p]`.
    pub fn stages(&self) -> &[usize] {
        &self.stages
    }

    /// Number of regression coefficients, `p + Σ s_k`.
    pub fn parameter_count(&self) -> usize {
        self.p() + self.stages.iter().sum::<usize>()
    }

    pub fn max_stage(&self) -> usize {
        self.stages.iter().copied().max().unwrap_or(0)
    }

    /// Regression column labels in coefficient order.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.parameter_count());
        for (k, &s) in self.stages.iter().enumerate() {
            names.push(format!("alpha_{}", k + 1));
            for r in 1..=s {
                names.push(format!("beta_{}_{}", k + 1, r));
            }
        }
        names
    }

    fn check_against(&self, ctx: &NetworkContext) -> Result<()> {
        let r_max = ctx.r_max();
        match self.stages.iter().find(|&&s| s > r_max) {
            Some(&stage) => Err(Error::StageExceedsDiameter { stage, r_max }),
            None => Ok(()),
        }
    }
}

impl std::fmt::Display for GnarOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: Vec<String> = self.stages.iter().map(|s| s.to_string()).collect();
        write!(f, "({}, [{}])", self.p(), s.join(", "))
    }
}

/// Coefficients and innovation covariance of a GNAR model.
#[derive(Debug, Clone, PartialEq)]
pub struct GnarParams {
    alpha: Vec<f64>,
    beta: Vec<Vec<f64>>,
    innovation_cov: DMatrix<f64>,
}

impl GnarParams {
    pub fn new(alpha: Vec<f64>, beta: Vec<Vec<f64>>, innovation_cov: DMatrix<f64>) -> Result<Self> {
        if alpha.is_empty() || alpha.len() != beta.len() {
            return Err(Error::Dimension(format!(
                "{} alpha values but {} beta lags",
                alpha.len(),
                beta.len()
            )));
        }
        if !innovation_cov.is_square() {
            return Err(Error::Dimension("innovation covariance must be square".into()));
        }
        let asym = (&innovation_cov - innovation_cov.transpose()).abs().max();
        if asym > 1e-12 * innovation_cov.abs().max().max(1.0) {
            return Err(Error::InvalidInput("innovation covariance is not symmetric".into()));
        }
        if alpha.iter().chain(beta.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        Ok(Self {
            alpha,
            beta,
            innovation_cov,
        })
    }

    /// Parameters with innovation covariance `σ² I_d`.
    pub fn with_sigma2(alpha: Vec<f64>, beta: Vec<Vec<f64>>, d: usize, sigma2: f64) -> Result<Self> {
        Self::new(alpha, beta, DMatrix::identity(d, d) * sigma2)
    }

    /// Unpacks a coefficient vector laid out as `(α_1, β_11, .., α_2, ..)`.
    pub fn from_coefficients(order: &GnarOrder, coef: &[f64], innovation_cov: DMatrix<f64>) -> Result<Self> {
        if coef.len() != order.parameter_count() {
            return Err(Error::Dimension(format!(
                "order {order} has {} coefficients, got {}",
                order.parameter_count(),
                coef.len()
            )));
        }
        let mut it = coef.iter().copied();
        let mut alpha = Vec::with_capacity(order.p());
        let mut beta = Vec::with_capacity(order.p());
        for &s in order.stages() {
            alpha.push(it.next().expect("length checked"));
            beta.push(it.by_ref().take(s).collect());
        }
        Self::new(alpha, beta, innovation_cov)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[Vec<f64>] {
        &self.beta
    }

    pub fn innovation_cov(&self) -> &DMatrix<f64> {
        &self.innovation_cov
    }

    pub fn node_count(&self) -> usize {
        self.innovation_cov.nrows()
    }

    pub fn order(&self) -> GnarOrder {
        GnarOrder {
            stages: self.beta.iter().map(Vec::len).collect(),
        }
    }

    /// Coefficients in design-column order.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (a, b) in self.alpha.iter().zip(&self.beta) {
            out.push(*a);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn with_innovation_cov(&self, innovation_cov: DMatrix<f64>) -> Result<Self> {
        Self::new(self.alpha.clone(), self.beta.clone(), innovation_cov)
    }
}

/// Sufficient stationarity condition `Σ_k (|α_k| + Σ_r |β_kr|) < 1`.
pub fn is_stationary(params: &GnarParams) -> bool {
    stationarity_sum(params) < 1.0
}

pub fn stationarity_sum(params: &GnarParams) -> f64 {
    params
        .alpha
        .iter()
        .zip(&params.beta)
        .map(|(a, b)| a.abs() + b.iter().map(|x| x.abs()).sum::<f64>())
        .sum()
}

fn check_params(params: &GnarParams, ctx: &NetworkContext) -> Result<()> {
    if params.node_count() != ctx.node_count() {
        return Err(Error::Dimension(format!(
            "model has {} nodes, network has {}",
            params.node_count(),
            ctx.node_count()
        )));
    }
    params.order().check_against(ctx)
}

/// `Φ_k = α_k I + Σ_r β_kr (W ∘ A_r)` for `k = 1..p`.
pub fn var_coefficients(params: &GnarParams, ctx: &NetworkContext) -> Result<Vec<DMatrix<f64>>> {
    check_params(params, ctx)?;
    let d = ctx.node_count();
    Ok(params
        .alpha
        .iter()
        .zip(&params.beta)
        .map(|(&a, b)| {
            b.iter()
                .enumerate()
                .fold(DMatrix::identity(d, d) * a, |acc, (r, &beta)| acc + ctx.operator(r + 1) * beta)
        })
        .collect())
}

/// `Z^r = (W ∘ A_r) x`.
pub fn neighbourhood_averages(x: &DVector<f64>, ctx: &NetworkContext, r: usize) -> Result<DVector<f64>> {
    if r == 0 || r > ctx.r_max() {
        return Err(Error::StageExceedsDiameter {
            stage: r,
            r_max: ctx.r_max(),
        });
    }
    Ok(ctx.operator(r) * x)
}

/// Simulates `T` rows from the network recursion with Gaussian innovations,
/// zero initial state and `burn_in` discarded rows. Non-stationary
/// parameters are simulated with a warning.
pub fn simulate<R: Rng + ?Sized>(
    params: &GnarParams,
    ctx: &NetworkContext,
    t: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    check_params(params, ctx)?;
    if !is_stationary(params) {
        log::warn!(
            "coefficient sum {:.4} >= 1, stationarity is not guaranteed",
            stationarity_sum(params)
        );
    }
    let eps = draw_innovations(&params.innovation_cov, t + burn_in, rng)?;
    Ok(gnar_recursion(params, ctx, &eps, burn_in))
}

/// Network-form recursion driven by the supplied innovations.
pub fn gnar_recursion(params: &GnarParams, ctx: &NetworkContext, innovations: &DMatrix<f64>, burn_in: usize) -> DMatrix<f64> {
    let (total, d) = innovations.shape();
    let mut x = DMatrix::zeros(total, d);
    for t in 0..total {
        let mut row = innovations.row(t).transpose();
        for (k, (&a, b)) in params.alpha.iter().zip(&params.beta).enumerate() {
            let lag = k + 1;
            if lag > t {
                break;
            }
            let past = x.row(t - lag).transpose();
            row += &past * a;
            for (r, &beta) in b.iter().enumerate() {
                row += ctx.operator(r + 1) * &past * beta;
            }
        }
        x.set_row(t, &row.transpose());
    }
    let skip = burn_in.min(total);
    x.rows(skip, total - skip).into_owned()
}

/// Simulates through the VAR embedding instead of the network recursion.
pub fn simulate_via_var<R: Rng + ?Sized>(
    params: &GnarParams,
    ctx: &NetworkContext,
    t: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let phi = var_coefficients(params, ctx)?;
    let eps = draw_innovations(&params.innovation_cov, t + burn_in, rng)?;
    Ok(var_recursion(&phi, &eps, burn_in))
}

/// Stacked regression with every `(lag, stage)` column up to `p_max` lags
/// and `s_max` stages, rows `(t, i)` for `t = start..T`.
struct LagDesign {
    y: DVector<f64>,
    x: DMatrix<f64>,
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    s_max: usize,
    d: usize,
}

impl LagDesign {
    fn new(panel: &DMatrix<f64>, ctx: &NetworkContext, p_max: usize, s_max: usize, start: usize) -> Self {
        let (t_len, d) = panel.shape();
        let n = t_len - start;
        // Z^r for every time point at once: rows of X_r = X (W∘A_r)^T.
        let averages: Vec<DMatrix<f64>> = (1..=s_max).map(|r| panel * ctx.operator(r).transpose()).collect();
        let width = p_max * (s_max + 1);
        let mut x = DMatrix::zeros(n * d, width);
        let mut y = DVector::zeros(n * d);
        for (block, t) in (start..t_len).enumerate() {
            for i in 0..d {
                let row = block * d + i;
                y[row] = panel[(t, i)];
                for k in 1..=p_max {
                    let base = (k - 1) * (s_max + 1);
                    x[(row, base)] = panel[(t - k, i)];
                    for r in 1..=s_max {
                        x[(row, base + r)] = averages[r - 1][(t - k, i)];
                    }
                }
            }
        }
        let gram = x.transpose() * &x;
        let xty = x.transpose() * &y;
        Self {
            y,
            x,
            gram,
            xty,
            s_max,
            d,
        }
    }

    fn columns(&self, order: &GnarOrder) -> Vec<usize> {
        let mut cols = Vec::with_capacity(order.parameter_count());
        for (k, &s) in order.stages().iter().enumerate() {
            let base = k * (self.s_max + 1);
            cols.extend((0..=s).map(|r| base + r));
        }
        cols
    }

    fn solve(&self, order: &GnarOrder) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let cols = self.columns(order);
        let q = cols.len();
        let g = DMatrix::from_fn(q, q, |a, b| self.gram[(cols[a], cols[b])]);
        let rhs = DVector::from_fn(q, |a, _| self.xty[cols[a]]);
        let deficient = deficient_columns(&g);
        if !deficient.is_empty() {
            let names = order.column_names();
            return Err(Error::RankDeficient(deficient.into_iter().map(|c| names[c].clone()).collect()));
        }
        let coef = g
            .cholesky()
            .ok_or_else(|| Error::RankDeficient(order.column_names()))?
            .solve(&rhs);
        let mut resid = self.y.clone();
        for (a, &c) in cols.iter().enumerate() {
            resid.axpy(-coef[a], &self.x.column(c), 1.0);
        }
        let n = resid.len() / self.d;
        let residuals = DMatrix::from_row_slice(n, self.d, resid.as_slice());
        Ok((coef.iter().copied().collect(), residuals))
    }
}

/// Columns whose Cholesky pivot collapses relative to their own norm.
fn deficient_columns(gram: &DMatrix<f64>) -> Vec<usize> {
    let q = gram.nrows();
    let mut l = DMatrix::<f64>::zeros(q, q);
    let mut bad = Vec::new();
    for j in 0..q {
        let mut pivot = gram[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if gram[(j, j)] <= 0.0 || pivot <= 1e-10 * gram[(j, j)] {
            bad.push(j);
            continue;
        }
        let pivot = pivot.sqrt();
        l[(j, j)] = pivot;
        for i in (j + 1)..q {
            let mut v = gram[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / pivot;
        }
    }
    bad
}

fn check_sample(panel: &DMatrix<f64>, p: usize) -> Result<()> {
    if panel.nrows() <= p {
        return Err(Error::InvalidInput(format!(
            "need more than {p} observations, got {}",
            panel.nrows()
        )));
    }
    if panel.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("panel contains non-finite values".into()));
    }
    Ok(())
}

/// Stacked response (length `n d`) and design (`n d × q`) for rows
/// `t = p+1..T`, columns `(α_1, β_11, .., β_1s_1, α_2, ..)`.
pub fn build_design(panel: &DMatrix<f64>, order: &GnarOrder, ctx: &NetworkContext) -> Result<(DVector<f64>, DMatrix<f64>)> {
    order.check_against(ctx)?;
    check_sample(panel, order.p())?;
    if panel.ncols() != ctx.node_count() {
        return Err(Error::Dimension("panel width differs from network size".into()));
    }
    let design = LagDesign::new(panel, ctx, order.p(), order.max_stage(), order.p());
    let cols = design.columns(order);
    let x = DMatrix::from_fn(design.x.nrows(), cols.len(), |r, c| design.x[(r, cols[c])]);
    Ok((design.y, x))
}

/// Least-squares fit of a GNAR model.
#[derive(Debug, Clone)]
pub struct GnarFit {
    pub params: GnarParams,
    /// `(T - p) × d` residuals, rows `t = p+1..T`.
    pub residuals: DMatrix<f64>,
}

/// OLS on the stacked design; the innovation covariance is the residual
/// covariance with divisor `n`.
pub fn fit_ols(panel: &DMatrix<f64>, order: &GnarOrder, ctx: &NetworkContext) -> Result<GnarFit> {
    order.check_against(ctx)?;
    check_sample(panel, order.p())?;
    if panel.ncols() != ctx.node_count() {
        return Err(Error::Dimension("panel width differs from network size".into()));
    }
    let design = LagDesign::new(panel, ctx, order.p(), order.max_stage(), order.p());
    let (coef, residuals) = design.solve(order)?;
    let params = GnarParams::from_coefficients(order, &coef, residual_covariance(&residuals))?;
    Ok(GnarFit { params, residuals })
}

/// `(1/n) Σ_t u_t u_tᵀ`, symmetrised.
pub fn residual_covariance(residuals: &DMatrix<f64>) -> DMatrix<f64> {
    let n = residuals.nrows().max(1) as f64;
    let v = residuals.transpose() * residuals / n;
    (&v + v.transpose()) * 0.5
}

/// Penalty term of the order-selection criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BicPenalty {
    /// `q log(n d) / (n d)`: every stacked observation counts.
    Stacked,
    /// `q log(n) / n`: one observation per time point.
    PerTime,
}

fn log_det_spd(v: &DMatrix<f64>) -> f64 {
    match v.clone().cholesky() {
        Some(c) => 2.0 * c.l().diagonal().iter().map(|x| x.ln()).sum::<f64>(),
        None => f64::NEG_INFINITY,
    }
}

/// Every order with `p ∈ 1..=p_max` and `s_k ∈ 0..=s_max`.
pub fn candidate_orders(p_max: usize, s_max: usize) -> Vec<GnarOrder> {
    let mut out = Vec::new();
    for p in 1..=p_max {
        let mut s = vec![0usize; p];
        loop {
            out.push(GnarOrder { stages: s.clone() });
            let mut k = 0;
            while k < p && s[k] == s_max {
                s[k] = 0;
                k += 1;
            }
            if k == p {
                break;
            }
            s[k] += 1;
        }
    }
    out
}

/// Exhaustive BIC search. All candidates are fitted on the common sample
/// `t = p_max+1..T`; ties go to fewer parameters, then smaller `p`.
pub fn select_order_bic(
    panel: &DMatrix<f64>,
    ctx: &NetworkContext,
    p_max: usize,
    s_max: usize,
    penalty: BicPenalty,
) -> Result<GnarOrder> {
    if p_max == 0 {
        return Err(Error::InvalidInput("p_max must be at least 1".into()));
    }
    if s_max > ctx.r_max() {
        return Err(Error::StageExceedsDiameter {
            stage: s_max,
            r_max: ctx.r_max(),
        });
    }
    check_sample(panel, p_max)?;
    let d = ctx.node_count();
    let design = LagDesign::new(panel, ctx, p_max, s_max, p_max);
    let n = (panel.nrows() - p_max) as f64;
    let scale = match penalty {
        BicPenalty::Stacked => (n * d as f64).ln() / (n * d as f64),
        BicPenalty::PerTime => n.ln() / n,
    };
    let mut best: Option<(f64, usize, usize, GnarOrder)> = None;
    for order in candidate_orders(p_max, s_max) {
        let bic = match design.solve(&order) {
            Ok((_, resid)) => log_det_spd(&residual_covariance(&resid)) + order.parameter_count() as f64 * scale,
            Err(Error::RankDeficient(_)) => continue,
            Err(e) => return Err(e),
        };
        let key = (bic, order.parameter_count(), order.p());
        let better = match &best {
            None => true,
            Some((b, q, p, _)) => {
                key.0 < *b || (key.0 == *b && (key.1, key.2) < (*q, *p))
            }
        };
        if better {
            best = Some((key.0, key.1, key.2, order));
        }
    }
    best.map(|b| b.3)
        .ok_or_else(|| Error::RankDeficient(vec!["every candidate design".into()]))
}
