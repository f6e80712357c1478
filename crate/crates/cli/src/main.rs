use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use gnarspec::bench::{builtin_model, run_experiment, run_hierarchy_experiment, ExperimentSpec, LadderChoice, NetworkChoice};
use gnarspec::gfevd::{gfevd_pipeline, log_volatility_panel, GfevdOptions, HorizonStart};
use gnarspec::gnar::{fit_ols, select_order_bic, simulate, BicPenalty, GnarOrder, GnarParams};
use gnarspec::graph::NetworkContext;
use gnarspec::hierarchy::build_hierarchy;
use gnarspec::io;
use gnarspec::periodogram::{np_spectrum_penalized, Penalty, SmoothingSpec};
use gnarspec::spectra::{coherence, gnar_spectrum, partial_coherence, precision, FrequencyGrid, SpectralField};
use gnarspec::Error;

const DEFAULT_SEED: u64 = 42;

const PRESET_TREND: &str = include_str!("../presets/trend.json");
const PRESET_MISSPEC: &str = include_str!("../presets/misspec.json");

#[derive(Parser)]
#[command(name = "gnarspec", version, about = "Network autoregressive spectra, periodogram refits and volatility networks")]
struct Cli {
    /// Master seed; simulations default to 42, bench runs to the seed in the experiment file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to every core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a GNAR panel to CSV.
    Simulate(SimulateArgs),
    /// Fit a GNAR model by least squares.
    Fit(FitArgs),
    /// Model spectrum, coherence and partial coherence of a parameter file.
    Spectrum(SpectrumArgs),
    /// Smoothed periodogram, optionally refitted under a network mask.
    NpSpectrum(NpSpectrumArgs),
    /// Thresholded-precision hierarchy of a parameter file.
    Hierarchy(HierarchyArgs),
    /// Volatility connectedness network from OHLC data.
    Gfevd(GfevdArgs),
    /// Monte Carlo RMSE benchmark.
    Bench(BenchArgs),
}

#[derive(Args)]
struct NetworkArg {
    /// `five`, `ten` or a path to an edge-list file.
    #[arg(long)]
    network: String,
}

impl NetworkArg {
    fn load(&self) -> Result<NetworkContext> {
        Ok(NetworkContext::new(network_choice(&self.network).load()?))
    }
}

fn network_choice(s: &str) -> NetworkChoice {
    if gnarspec::datasets::network_by_name(s).is_some() {
        NetworkChoice::Builtin(s.to_string())
    } else {
        NetworkChoice::File(PathBuf::from(s))
    }
}

#[derive(Args)]
struct GridArgs {
    /// Uniform grid with this many points on [0, 1/2].
    #[arg(long, conflicts_with = "length")]
    points: Option<usize>,
    /// Fourier grid of a series of this length.
    #[arg(long)]
    length: Option<usize>,
}

impl GridArgs {
    fn grid(&self) -> Result<FrequencyGrid> {
        Ok(match (self.points, self.length) {
            (_, Some(t)) => FrequencyGrid::fourier(t)?,
            (Some(n), None) => FrequencyGrid::uniform(n)?,
            (None, None) => FrequencyGrid::uniform(128)?,
        })
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    network: NetworkArg,
    /// Built-in model M1..M5.
    #[arg(long, conflicts_with = "params", required_unless_present = "params")]
    model: Option<String>,
    /// Parameter JSON file.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    length: usize,
    #[arg(long, default_value_t = 500)]
    burn_in: usize,
    #[arg(long)]
    out: PathBuf,
    /// Also write a JSON record of how the panel was made.
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PenaltyScale {
    /// log(n d)/(n d) per parameter.
    Stacked,
    /// log(n)/n per parameter.
    PerTime,
}

impl From<PenaltyScale> for BicPenalty {
    fn from(p: PenaltyScale) -> Self {
        match p {
            PenaltyScale::Stacked => BicPenalty::Stacked,
            PenaltyScale::PerTime => BicPenalty::PerTime,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    network: NetworkArg,
    /// Panel CSV, one column per node.
    #[arg(long)]
    panel: PathBuf,
    /// Neighbourhood stage per lag, e.g. `2,1`.
    #[arg(long, value_delimiter = ',', required_unless_present = "bic", conflicts_with = "bic")]
    stages: Option<Vec<usize>>,
    /// Choose the order by BIC.
    #[arg(long)]
    bic: bool,
    #[arg(long, default_value_t = 3)]
    p_max: usize,
    #[arg(long, default_value_t = 3)]
    s_max: usize,
    #[arg(long, value_enum, default_value_t = PenaltyScale::PerTime)]
    bic_penalty: PenaltyScale,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    network: NetworkArg,
    #[arg(long)]
    params: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PenaltyArg {
    None,
    Adjacency,
    Induced,
}

#[derive(Args)]
struct NpSpectrumArgs {
    #[command(flatten)]
    network: NetworkArg,
    #[arg(long)]
    panel: PathBuf,
    #[arg(long, value_enum, default_value_t = PenaltyArg::None)]
    penalty: PenaltyArg,
    /// Depth of the induced mask.
    #[arg(long, default_value_t = 1)]
    r_star: usize,
    /// Daniell half-width; defaults to ⌊√T⌋.
    #[arg(long)]
    bandwidth: Option<usize>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct HierarchyArgs {
    #[command(flatten)]
    network: NetworkArg,
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    r_star: usize,
    #[command(flatten)]
    grid: GridArgs,
    /// Add a small ridge when a thresholded precision is singular.
    #[arg(long)]
    ridge_fallback: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum StartArg {
    One,
    Zero,
}

#[derive(Args)]
struct GfevdArgs {
    /// CSV with columns date,node,open,high,low,close.
    #[arg(long)]
    ohlc: PathBuf,
    #[arg(long, default_value_t = 5)]
    p_max: usize,
    #[arg(long, default_value_t = 10)]
    horizon: usize,
    /// First horizon summed over.
    #[arg(long, value_enum, default_value_t = StartArg::One)]
    horizon_start: StartArg,
    #[arg(long)]
    out: PathBuf,
    /// Edge list CSV (source,target,weight).
    #[arg(long)]
    edges: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Trend,
    Misspec,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment JSON.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    lengths: Option<Vec<usize>>,
    /// RMSE table CSV.
    #[arg(long)]
    out: PathBuf,
    /// Full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Also run the hierarchy experiment up to this depth, written next to `--out`.
    #[arg(long)]
    hierarchy: Option<usize>,
}

fn load_params(path: &Path, d: usize) -> Result<GnarParams> {
    Ok(io::read_params_json(io::open(path)?, d)?)
}

fn write_targets(dir: &Path, spectrum: &SpectralField, prec: Option<SpectralField>) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let prec = match prec {
        Some(p) => p,
        None => precision(spectrum)?,
    };
    io::write_field_json(io::create(&dir.join("spectrum.json"))?, spectrum)?;
    io::write_field_csv(io::create(&dir.join("spectrum.csv"))?, spectrum)?;
    io::write_field_csv(io::create(&dir.join("coherence.csv"))?, &coherence(spectrum)?)?;
    io::write_field_csv(io::create(&dir.join("partial_coherence.csv"))?, &partial_coherence(&prec)?)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = io::create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

#[derive(Serialize)]
struct SimulationRecord<'a> {
    network: &'a str,
    model: Option<&'a str>,
    params: Option<&'a Path>,
    length: usize,
    burn_in: usize,
    seed: u64,
}

fn cmd_simulate(a: &SimulateArgs, seed: u64) -> Result<()> {
    let ctx = a.network.load()?;
    let d = ctx.node_count();
    let params = match (&a.model, &a.params) {
        (Some(m), _) => builtin_model(m, d).ok_or_else(|| Error::InvalidInput(format!("unknown model {m:?}")))?,
        (None, Some(p)) => load_params(p, d)?,
        (None, None) => bail!(Error::InvalidInput("give --model or --params".into())),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let panel = simulate(&params, &ctx, a.length, a.burn_in, &mut rng)?;
    io::write_panel_csv(io::create(&a.out)?, &panel)?;
    if let Some(meta) = &a.meta {
        let record = SimulationRecord {
            network: &a.network.network,
            model: a.model.as_deref(),
            params: a.params.as_deref(),
            length: a.length,
            burn_in: a.burn_in,
            seed,
        };
        write_json(meta, &record)?;
    }
    log::info!("wrote {} x {} panel to {}", a.length, d, a.out.display());
    Ok(())
}

fn read_panel(path: &Path, ctx: &NetworkContext) -> Result<DMatrix<f64>> {
    let panel = io::read_panel_csv(io::open(path)?)?;
    if panel.ncols() != ctx.node_count() {
        bail!(Error::Dimension(format!(
            "{} has {} columns but the network has {} nodes",
            path.display(),
            panel.ncols(),
            ctx.node_count()
        )));
    }
    Ok(panel)
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    let ctx = a.network.load()?;
    let panel = read_panel(&a.panel, &ctx)?;
    let order = match &a.stages {
        Some(s) => GnarOrder::new(s.clone())?,
        None => {
            let s_max = a.s_max.min(ctx.r_max());
            select_order_bic(&panel, &ctx, a.p_max, s_max, a.bic_penalty.into())?
        }
    };
    log::info!("order {:?}", order.stages());
    let fit = fit_ols(&panel, &order, &ctx)?;
    io::write_params_json(io::create(&a.out)?, &fit.params)?;
    Ok(())
}

fn cmd_spectrum(a: &SpectrumArgs) -> Result<()> {
    let ctx = a.network.load()?;
    let params = load_params(&a.params, ctx.node_count())?;
    let f = gnar_spectrum(&params, &ctx, &a.grid.grid()?)?;
    write_targets(&a.out_dir, &f, None)
}

fn cmd_np_spectrum(a: &NpSpectrumArgs) -> Result<()> {
    let ctx = a.network.load()?;
    let panel = read_panel(&a.panel, &ctx)?;
    let smoothing = match a.bandwidth {
        Some(m) => SmoothingSpec::daniell(m),
        None => SmoothingSpec::default_for(panel.nrows()),
    };
    let penalty = match a.penalty {
        PenaltyArg::None => Penalty::None,
        PenaltyArg::Adjacency => Penalty::Adjacency,
        PenaltyArg::Induced => Penalty::Induced { r_star: a.r_star },
    };
    let est = np_spectrum_penalized(&panel, &smoothing, penalty, &ctx)?;
    write_targets(&a.out_dir, &est.spectrum, est.precision)
}

fn cmd_hierarchy(a: &HierarchyArgs) -> Result<()> {
    let ctx = a.network.load()?;
    let params = load_params(&a.params, ctx.node_count())?;
    let f = gnar_spectrum(&params, &ctx, &a.grid.grid()?)?;
    let h = build_hierarchy(&precision(&f)?, ctx.stages(), a.r_star, a.ridge_fallback)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("cannot create {}", a.out_dir.display()))?;
    write_json(&a.out_dir.join("ladder.json"), &serde_json::json!({ "xi": h.ladder.xi }))?;
    for (r, (s, p)) in h.spectra.iter().zip(&h.precisions).enumerate() {
        let r = r + 1;
        io::write_field_csv(io::create(&a.out_dir.join(format!("spectrum_r{r}.csv")))?, s)?;
        io::write_field_csv(io::create(&a.out_dir.join(format!("precision_r{r}.csv")))?, p)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct GfevdOutput<'a> {
    nodes: &'a [String],
    dates: usize,
    #[serde(flatten)]
    result: &'a gnarspec::gfevd::GfevdResult,
}

fn cmd_gfevd(a: &GfevdArgs) -> Result<()> {
    let data = io::read_ohlc_csv(io::open(&a.ohlc)?)?;
    let x = log_volatility_panel(&data.bars)?;
    let opts = GfevdOptions {
        p_max: a.p_max,
        horizon: a.horizon,
        start: match a.horizon_start {
            StartArg::One => HorizonStart::One,
            StartArg::Zero => HorizonStart::Zero,
        },
        ..GfevdOptions::default()
    };
    let res = gfevd_pipeline(&x, &opts)?;
    log::info!("lag {} threshold {:.4} with {} edges", res.lag_order, res.tau_star, res.edges.len());
    write_json(
        &a.out,
        &GfevdOutput {
            nodes: &data.nodes,
            dates: data.dates.len(),
            result: &res,
        },
    )?;
    if let Some(path) = &a.edges {
        let mut w = csv::Writer::from_writer(io::create(path)?);
        w.write_record(["source", "target", "weight"])?;
        for &(i, j, wt) in &res.edges {
            w.write_record([data.nodes[i].as_str(), data.nodes[j].as_str(), &wt.to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs, seed: Option<u64>) -> Result<()> {
    let mut spec: ExperimentSpec = match (&a.spec, a.preset) {
        (Some(p), _) => serde_json::from_reader(io::open(p)?).map_err(Error::from)?,
        (None, Some(Preset::Trend)) => serde_json::from_str(PRESET_TREND)?,
        (None, Some(Preset::Misspec)) => serde_json::from_str(PRESET_MISSPEC)?,
        (None, None) => bail!(Error::InvalidInput("give --spec or --preset".into())),
    };
    if let Some(r) = a.replicates {
        spec.replicates = r;
    }
    if let Some(l) = &a.lengths {
        spec.lengths = l.clone();
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    let report = run_experiment(&spec)?;
    io::write_report_csv(io::create(&a.out)?, &report)?;
    if let Some(path) = &a.json {
        write_json(path, &report)?;
    }
    if let Some(r_star) = a.hierarchy {
        let rows = run_hierarchy_experiment(&spec, r_star, LadderChoice::Estimated)?;
        let path = a.out.with_file_name(format!(
            "{}_hierarchy.csv",
            a.out.file_stem().and_then(|s| s.to_str()).unwrap_or("bench")
        ));
        io::write_hierarchy_csv(io::create(&path)?, &rows)?;
    }
    Ok(())
}

/// 1 for estimation failures on valid input, 2 for bad input.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::NotPositiveDefinite(_)
            | Error::SingularTransfer { .. }
            | Error::IllConditioned { .. }
            | Error::SingularAt(_)
            | Error::RankDeficient(_)
            | Error::NonPositiveDiagonal { .. }
            | Error::NoConvergence { .. }
            | Error::DegenerateSeries(_)
            | Error::NoConnectedThreshold,
        ) => 1,
        _ => 2,
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, cli.seed.unwrap_or(DEFAULT_SEED)),
        Command::Fit(a) => cmd_fit(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::NpSpectrum(a) => cmd_np_spectrum(a),
        Command::Hierarchy(a) => cmd_hierarchy(a),
        Command::Gfevd(a) => cmd_gfevd(a),
        Command::Bench(a) => cmd_bench(a, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
