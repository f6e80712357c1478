//! Monte-Carlo comparison of spectral estimators on simulated GNAR data.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::network_by_name;
use crate::error::{Error, Result};
use crate::gnar::{fit_ols, is_stationary, select_order_bic, simulate, BicPenalty, GnarOrder, GnarParams};
use crate::graph::{Network, NetworkContext};
use crate::hierarchy::{build_hierarchy, threshold_matrix, r_dependent_spectrum, Hierarchy, ThresholdLadder};
use crate::linalg::frobenius_sq;
use crate::periodogram::{np_spectrum_penalized, parametric_var_penalized, Penalty, SmoothingSpec, VarLag};
use crate::spectra::{coherence, gnar_spectrum, partial_coherence, precision, FieldKind, FrequencyGrid, SpectralField};

/// Sum of squared Frobenius differences over all frequencies.
fn squared_error(estimate: &SpectralField, truth: &SpectralField) -> Result<f64> {
    if estimate.grid() != truth.grid() {
        return Err(Error::GridMismatch("estimate and truth grids differ".into()));
    }
    if estimate.dim() != truth.dim() {
        return Err(Error::Dimension("estimate and truth dimensions differ".into()));
    }
    Ok(estimate
        .matrices()
        .iter()
        .zip(truth.matrices())
        .map(|(a, b)| frobenius_sq(&(a - b)))
        .sum())
}

/// `sqrt( Σ_r Σ_l ‖f̂_r(ω_l) - f(ω_l)‖²_F / (R n_T) )`.
pub fn rmse(estimates: &[SpectralField], truth: &SpectralField) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::InvalidInput("no estimates".into()));
    }
    let mut total = 0.0;
    for e in estimates {
        total += squared_error(e, truth)?;
    }
    Ok((total / (estimates.len() * truth.len()) as f64).sqrt())
}

/// The simulation models, with unit innovation variance on `d` nodes.
///
/// Where a stage vector is listed with fewer values than stages, the
/// per-lag value is repeated across that lag's stages.
pub fn builtin_models(d: usize) -> BTreeMap<String, GnarParams> {
    let table: [(&str, Vec<f64>, Vec<Vec<f64>>); 5] = [
        ("M1", vec![0.2, 0.2], vec![vec![0.2], vec![0.1]]),
        ("M2", vec![0.1, 0.1], vec![vec![0.075], vec![0.05, 0.15]]),
        ("M3", vec![0.2, 0.1], vec![vec![0.075, 0.05], vec![0.05, 0.05, 0.1]]),
        ("M4", vec![0.1, 0.075, 0.05], vec![vec![0.1], vec![0.075; 2], vec![0.05; 3]]),
        ("M5", vec![0.15, 0.1, 0.05], vec![vec![0.05; 3], vec![0.05; 3], vec![0.05; 3]]),
    ];
    table
        .into_iter()
        .map(|(name, alpha, beta)| {
            let params = GnarParams::with_sigma2(alpha, beta, d, 1.0).expect("builtin model is well formed");
            debug_assert!(is_stationary(&params));
            (name.to_string(), params)
        })
        .collect()
}

pub fn builtin_model(name: &str, d: usize) -> Option<GnarParams> {
    builtin_models(d).remove(&name.to_ascii_uppercase())
}

/// Estimators under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// GNAR least squares plug-in.
    EM1,
    /// Unrestricted VAR plug-in.
    EM2,
    /// VAR plug-in refitted under the GNAR-induced mask.
    EM3,
    /// VAR plug-in refitted under the adjacency mask.
    EM4,
    /// Smoothed periodogram refitted under the GNAR-induced mask.
    EM5,
    /// Smoothed periodogram refitted under the adjacency mask.
    EM6,
    /// Smoothed periodogram.
    EM7,
}

impl Method {
    pub const ALL: [Method; 7] = [Method::EM1, Method::EM2, Method::EM3, Method::EM4, Method::EM5, Method::EM6, Method::EM7];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown method {s:?}, expected EM1..EM7")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Spectrum,
    Coherence,
    PartialCoherence,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::Spectrum, Target::Coherence, Target::PartialCoherence];
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Spectrum => "spectrum",
            Target::Coherence => "coherence",
            Target::PartialCoherence => "partial_coherence",
        })
    }
}

/// Whether EM1 and the VAR methods are told the true order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    KnownOrder,
    BicMisspec,
}

/// A model given by name (`"M1"`..`"M5"`) or by its coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelChoice {
    Builtin(String),
    Custom {
        name: String,
        alpha: Vec<f64>,
        beta: Vec<Vec<f64>>,
        #[serde(default = "one")]
        sigma2: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ModelChoice {
    pub fn name(&self) -> &str {
        match self {
            ModelChoice::Builtin(n) => n,
            ModelChoice::Custom { name, .. } => name,
        }
    }

    pub fn params(&self, d: usize) -> Result<GnarParams> {
        match self {
            ModelChoice::Builtin(n) => builtin_model(n, d).ok_or_else(|| Error::InvalidInput(format!("unknown model {n:?}"))),
            ModelChoice::Custom { alpha, beta, sigma2, .. } => GnarParams::with_sigma2(alpha.clone(), beta.clone(), d, *sigma2),
        }
    }
}

/// A shipped network (`"five"`, `"ten"`) or an edge-list file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkChoice {
    Builtin(String),
    File(PathBuf),
}

impl NetworkChoice {
    pub fn label(&self) -> String {
        match self {
            NetworkChoice::Builtin(n) => n.clone(),
            NetworkChoice::File(p) => p.display().to_string(),
        }
    }

    pub fn load(&self) -> Result<Network> {
        match self {
            NetworkChoice::Builtin(n) => network_by_name(n).ok_or_else(|| Error::InvalidInput(format!("unknown network {n:?}"))),
            NetworkChoice::File(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::InvalidInput(format!("cannot read network file {}: {e}", p.display())))?;
                Network::parse_edge_list(&text)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub models: Vec<ModelChoice>,
    pub networks: Vec<NetworkChoice>,
    pub lengths: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Search bounds for BIC order selection.
    #[serde(default = "default_max")]
    pub p_max: usize,
    #[serde(default = "default_max")]
    pub s_max: usize,
    #[serde(default = "default_penalty")]
    pub bic_penalty: BicPenalty,
}

fn default_replicates() -> usize {
    100
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_burn_in() -> usize {
    500
}

fn default_max() -> usize {
    3
}

fn default_penalty() -> BicPenalty {
    BicPenalty::PerTime
}

impl ExperimentSpec {
    pub fn new(models: &[&str], networks: &[&str], lengths: &[usize]) -> Self {
        Self {
            models: models.iter().map(|m| ModelChoice::Builtin(m.to_string())).collect(),
            networks: networks.iter().map(|n| NetworkChoice::Builtin(n.to_string())).collect(),
            lengths: lengths.to_vec(),
            replicates: default_replicates(),
            methods: all_methods(),
            mode: Mode::KnownOrder,
            seed: 0,
            burn_in: default_burn_in(),
            p_max: default_max(),
            s_max: default_max(),
            bic_penalty: default_penalty(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidInput("replicate count must be at least 1".into()));
        }
        if self.methods.is_empty() || self.models.is_empty() || self.networks.is_empty() || self.lengths.is_empty() {
            return Err(Error::InvalidInput("models, networks, lengths and methods must be nonempty".into()));
        }
        if let Some(&t) = self.lengths.iter().find(|&&t| t < 8) {
            return Err(Error::InvalidInput(format!("series length {t} is too short")));
        }
        if self.mode == Mode::BicMisspec && self.p_max == 0 {
            return Err(Error::InvalidInput("p_max must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseRow {
    pub network: String,
    pub model: String,
    pub method: Method,
    pub t: usize,
    pub target: Target,
    pub rmse: f64,
    pub replicates: usize,
    pub excluded: usize,
}

/// How often BIC picked the true order, per cell (misspecification mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRecovery {
    pub network: String,
    pub model: String,
    pub t: usize,
    pub hits: usize,
    pub replicates: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RmseReport {
    pub rows: Vec<RmseRow>,
    pub order_recovery: Vec<OrderRecovery>,
    /// Wall-clock seconds per `(network, model, T)` cell.
    pub runtime: Vec<(String, String, usize, f64)>,
}

impl RmseReport {
    pub fn get(&self, network: &str, model: &str, method: Method, t: usize, target: Target) -> Option<&RmseRow> {
        self.rows
            .iter()
            .find(|r| r.network == network && r.model == model && r.method == method && r.t == t && r.target == target)
    }
}

/// Independent stream for one replicate of one cell.
pub fn replicate_seed(master: u64, cell: u64, replicate: u64) -> u64 {
    // splitmix64 finaliser over a combined key
    let mut z = master
        .wrapping_add(cell.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(replicate.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Spectrum, coherence and partial coherence of one estimate or truth.
pub struct Targets {
    pub spectrum: SpectralField,
    pub coherence: SpectralField,
    pub partial_coherence: SpectralField,
}

impl Targets {
    pub fn from_spectrum(spectrum: SpectralField, prec: Option<SpectralField>) -> Result<Self> {
        let prec = match prec {
            Some(p) => p,
            None => precision(&spectrum)?,
        };
        Ok(Self {
            coherence: coherence(&spectrum)?,
            partial_coherence: partial_coherence(&prec)?,
            spectrum,
        })
    }

    fn get(&self, target: Target) -> &SpectralField {
        match target {
            Target::Spectrum => &self.spectrum,
            Target::Coherence => &self.coherence,
            Target::PartialCoherence => &self.partial_coherence,
        }
    }

    fn squared_errors(&self, truth: &Targets) -> Result<[f64; 3]> {
        let mut out = [0.0; 3];
        for (k, t) in Target::ALL.into_iter().enumerate() {
            out[k] = squared_error(self.get(t), truth.get(t))?;
        }
        Ok(out)
    }
}

struct Cell<'a> {
    params: &'a GnarParams,
    order: GnarOrder,
    ctx: &'a NetworkContext,
    t: usize,
}

/// Order used by EM1 and the VAR lag, plus whether it was the true one.
fn working_order(panel: &DMatrix<f64>, cell: &Cell, spec: &ExperimentSpec) -> Result<GnarOrder> {
    match spec.mode {
        Mode::KnownOrder => Ok(cell.order.clone()),
        Mode::BicMisspec => {
            let s_max = spec.s_max.min(cell.ctx.r_max());
            select_order_bic(panel, cell.ctx, spec.p_max, s_max, spec.bic_penalty)
        }
    }
}

fn estimate(method: Method, panel: &DMatrix<f64>, order: &GnarOrder, cell: &Cell, spec: &ExperimentSpec) -> Result<Targets> {
    let ctx = cell.ctx;
    let induced = Penalty::Induced { r_star: order.max_stage().max(1) };
    let lag = match spec.mode {
        Mode::KnownOrder => VarLag::Fixed(order.p()),
        Mode::BicMisspec => VarLag::Bic { p_max: spec.p_max },
    };
    let smoothing = SmoothingSpec::default_for(cell.t);
    let est = match method {
        Method::EM1 => {
            let fit = fit_ols(panel, order, ctx)?;
            let grid = FrequencyGrid::fourier(cell.t)?;
            return Targets::from_spectrum(gnar_spectrum(&fit.params, ctx, &grid)?, None);
        }
        Method::EM2 => parametric_var_penalized(panel, lag, Penalty::None, ctx)?,
        Method::EM3 => parametric_var_penalized(panel, lag, induced, ctx)?,
        Method::EM4 => parametric_var_penalized(panel, lag, Penalty::Adjacency, ctx)?,
        Method::EM5 => np_spectrum_penalized(panel, &smoothing, induced, ctx)?,
        Method::EM6 => np_spectrum_penalized(panel, &smoothing, Penalty::Adjacency, ctx)?,
        Method::EM7 => np_spectrum_penalized(panel, &smoothing, Penalty::None, ctx)?,
    };
    Targets::from_spectrum(est.spectrum, est.precision)
}

struct ReplicateOutcome {
    /// Per method: squared errors for each target, or `None` if excluded.
    errors: Vec<Option<[f64; 3]>>,
    order_hit: bool,
}

fn run_replicate(cell: &Cell, truth: &Targets, spec: &ExperimentSpec, seed: u64) -> Result<ReplicateOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let panel = simulate(cell.params, cell.ctx, cell.t, spec.burn_in, &mut rng)?;
    let order = working_order(&panel, cell, spec);
    let order_hit = matches!(&order, Ok(o) if *o == cell.order);
    let errors = spec
        .methods
        .iter()
        .map(|&m| {
            let order = order.as_ref().ok()?;
            match estimate(m, &panel, order, cell, spec).and_then(|e| e.squared_errors(truth)) {
                Ok(v) => Some(v),
                Err(e) => {
                    log::debug!("{m} excluded in replicate with seed {seed}: {e}");
                    None
                }
            }
        })
        .collect();
    Ok(ReplicateOutcome { errors, order_hit })
}

/// Runs every `(network, model, T)` cell of the experiment.
///
/// Replicates run in parallel, each from its own derived seed; a method
/// that fails in a replicate is left out of that method's average and
/// counted as excluded.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RmseReport> {
    spec.validate()?;
    let mut report = RmseReport {
        rows: Vec::new(),
        order_recovery: Vec::new(),
        runtime: Vec::new(),
    };
    let mut cell_id = 0u64;
    for net_choice in &spec.networks {
        let ctx = NetworkContext::new(net_choice.load()?);
        let net_label = net_choice.label();
        for model in &spec.models {
            let params = model.params(ctx.node_count())?;
            let order = params.order();
            for &t in &spec.lengths {
                cell_id += 1;
                let started = Instant::now();
                let cell = Cell {
                    params: &params,
                    order: order.clone(),
                    ctx: &ctx,
                    t,
                };
                let grid = FrequencyGrid::fourier(t)?;
                let truth = Targets::from_spectrum(gnar_spectrum(&params, &ctx, &grid)?, None)?;
                let outcomes = (0..spec.replicates as u64)
                    .into_par_iter()
                    .map(|r| run_replicate(&cell, &truth, spec, replicate_seed(spec.seed, cell_id, r)))
                    .collect::<Result<Vec<_>>>()?;
                let n_t = grid.len() as f64;
                for (k, &method) in spec.methods.iter().enumerate() {
                    let kept: Vec<&[f64; 3]> = outcomes.iter().filter_map(|o| o.errors[k].as_ref()).collect();
                    for (ti, target) in Target::ALL.into_iter().enumerate() {
                        let total: f64 = kept.iter().map(|e| e[ti]).sum();
                        let rmse = if kept.is_empty() {
                            f64::NAN
                        } else {
                            (total / (kept.len() as f64 * n_t)).sqrt()
                        };
                        report.rows.push(RmseRow {
                            network: net_label.clone(),
                            model: model.name().to_string(),
                            method,
                            t,
                            target,
                            rmse,
                            replicates: kept.len(),
                            excluded: spec.replicates - kept.len(),
                        });
                    }
                }
                if spec.mode == Mode::BicMisspec {
                    report.order_recovery.push(OrderRecovery {
                        network: net_label.clone(),
                        model: model.name().to_string(),
                        t,
                        hits: outcomes.iter().filter(|o| o.order_hit).count(),
                        replicates: spec.replicates,
                    });
                }
                let secs = started.elapsed().as_secs_f64();
                log::info!("{net_label} {} T={t}: {secs:.1}s", model.name());
                report.runtime.push((net_label.clone(), model.name().to_string(), t, secs));
            }
        }
    }
    Ok(report)
}

/// How the hierarchy experiment picks threshold levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderChoice {
    #[default]
    Estimated,
    /// Every level set to zero, so each stage reproduces the plug-in.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyRow {
    pub network: String,
    pub model: String,
    pub t: usize,
    pub r: usize,
    /// Against the model spectrum.
    pub rmse_truth: f64,
    /// Against the model's own thresholded spectrum at stage `r`.
    pub rmse_thresholded_truth: f64,
    pub replicates: usize,
    pub excluded: usize,
}

fn hierarchy_with_ladder(prec: &SpectralField, stages: &crate::graph::StageStructure, r_star: usize, ladder: LadderChoice) -> Result<Hierarchy> {
    match ladder {
        LadderChoice::Estimated => build_hierarchy(prec, stages, r_star, true),
        LadderChoice::Zero => {
            let ladder = ThresholdLadder { xi: vec![0.0; r_star] };
            let mut precisions = Vec::with_capacity(r_star);
            let mut spectra = Vec::with_capacity(r_star);
            for _ in 0..r_star {
                let m = prec.matrices().iter().map(|m| threshold_matrix(m, 0.0)).collect();
                let s = SpectralField::new(prec.grid().clone(), m, FieldKind::Precision)?;
                spectra.push(r_dependent_spectrum(&s, true)?);
                precisions.push(s);
            }
            Ok(Hierarchy { ladder, precisions, spectra })
        }
    }
}

/// Thresholded-precision spectra of the EM1 plug-in for `r = 1..=r_star`,
/// scored against the model spectrum and against the model's own
/// hierarchy at the same stage.
pub fn run_hierarchy_experiment(spec: &ExperimentSpec, r_star: usize, ladder: LadderChoice) -> Result<Vec<HierarchyRow>> {
    spec.validate()?;
    if r_star == 0 {
        return Err(Error::InvalidInput("r* must be at least 1".into()));
    }
    let mut rows = Vec::new();
    let mut cell_id = 0u64;
    for net_choice in &spec.networks {
        let ctx = NetworkContext::new(net_choice.load()?);
        let net_label = net_choice.label();
        for model in &spec.models {
            let params = model.params(ctx.node_count())?;
            let order = params.order();
            for &t in &spec.lengths {
                cell_id += 1;
                let grid = FrequencyGrid::fourier(t)?;
                let truth = gnar_spectrum(&params, &ctx, &grid)?;
                let true_h = hierarchy_with_ladder(&precision(&truth)?, ctx.stages(), r_star, ladder)?;
                let cell = Cell {
                    params: &params,
                    order: order.clone(),
                    ctx: &ctx,
                    t,
                };
                let outcomes: Vec<Option<Vec<(f64, f64)>>> = (0..spec.replicates as u64)
                    .into_par_iter()
                    .map(|r| -> Result<_> {
                        let seed = replicate_seed(spec.seed, cell_id, r);
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        let panel = simulate(&params, &ctx, t, spec.burn_in, &mut rng)?;
                        let attempt = || -> Result<Vec<(f64, f64)>> {
                            let order = working_order(&panel, &cell, spec)?;
                            let fit = fit_ols(&panel, &order, &ctx)?;
                            let est = gnar_spectrum(&fit.params, &ctx, &grid)?;
                            let h = hierarchy_with_ladder(&precision(&est)?, ctx.stages(), r_star, ladder)?;
                            h.spectra
                                .iter()
                                .zip(&true_h.spectra)
                                .map(|(s, ts)| Ok((squared_error(s, &truth)?, squared_error(s, ts)?)))
                                .collect()
                        };
                        Ok(attempt().map_err(|e| log::debug!("hierarchy replicate {seed} excluded: {e}")).ok())
                    })
                    .collect::<Result<Vec<_>>>()?;
                let kept: Vec<&Vec<(f64, f64)>> = outcomes.iter().flatten().collect();
                let denom = kept.len() as f64 * grid.len() as f64;
                for r in 1..=r_star {
                    let (a, b) = kept
                        .iter()
                        .fold((0.0, 0.0), |(a, b), v| (a + v[r - 1].0, b + v[r - 1].1));
                    rows.push(HierarchyRow {
                        network: net_label.clone(),
                        model: model.name().to_string(),
                        t,
                        r,
                        rmse_truth: (a / denom).sqrt(),
                        rmse_thresholded_truth: (b / denom).sqrt(),
                        replicates: kept.len(),
                        excluded: spec.replicates - kept.len(),
                    });
                }
            }
        }
    }
    Ok(rows)
}
