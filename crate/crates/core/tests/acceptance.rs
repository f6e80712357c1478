//! Acceptance suite. Prints one PASS/FAIL line per criterion and a
//! summary. Criteria that fail are reported, not hidden; set
//! `ACCEPTANCE_STRICT=1` to turn any failure into a nonzero exit.

mod common;

use std::time::{Duration, Instant};

use gnarspec::bench::{
    builtin_model, builtin_models, run_experiment, run_hierarchy_experiment, ExperimentSpec, LadderChoice, Method, Mode,
    Target,
};
use gnarspec::datasets::{five_node_network, synthetic_ohlc, ten_node_network, volatility_generator};
use gnarspec::gfevd::{
    default_candidates, gfevd_pipeline, log_volatility_panel, threshold_by_bisection, threshold_by_scan, GfevdOptions,
};
use gnarspec::gnar::{fit_ols, simulate, var_coefficients};
use gnarspec::graph::NetworkContext;
use gnarspec::hierarchy::build_hierarchy;
use gnarspec::periodogram::{augment, constrained_mle};
use gnarspec::spectra::{gnar_spectrum, precision, var_spectrum, FrequencyGrid};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn contexts() -> [(&'static str, NetworkContext); 2] {
    [
        ("five", NetworkContext::new(five_node_network())),
        ("ten", NetworkContext::new(ten_node_network())),
    ]
}

/// Spectrum built straight from the network form `I - Σ_k (α_k I + Σ_r β_kr W_r) z^k`,
/// with the stage weights recomputed from the distance matrices.
fn network_form_spectrum(params: &gnarspec::gnar::GnarParams, ctx: &NetworkContext, omega: f64) -> DMatrix<Complex64> {
    let d = ctx.node_count();
    let mut u = DMatrix::<Complex64>::identity(d, d);
    for (k, (&a, betas)) in params.alpha().iter().zip(params.beta()).enumerate() {
        let z = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (k + 1) as f64 * omega);
        let mut phi = DMatrix::<f64>::identity(d, d) * a;
        for (r, &b) in betas.iter().enumerate() {
            let adj = ctx.stages().stage(r + 1);
            for i in 0..d {
                let n: f64 = adj.row(i).sum();
                for j in 0..d {
                    if adj[(i, j)] != 0.0 {
                        phi[(i, j)] += b / n;
                    }
                }
            }
        }
        u -= phi.map(|x| Complex64::new(x, 0.0)) * z;
    }
    let inv = u.try_inverse().expect("stationary transfer matrix");
    let v = params.innovation_cov().map(|x| Complex64::new(x, 0.0));
    &inv * v * inv.adjoint()
}

fn criterion_1() -> Outcome {
    let grid = FrequencyGrid::uniform(64).unwrap();
    let mut worst = 0.0f64;
    for (_, ctx) in contexts() {
        for (_, params) in builtin_models(ctx.node_count()) {
            let direct = gnar_spectrum(&params, &ctx, &grid).unwrap();
            let via_var = var_spectrum(&var_coefficients(&params, &ctx).unwrap(), params.innovation_cov(), &grid).unwrap();
            for ((omega, a), b) in direct.iter().zip(via_var.matrices()) {
                let oracle = network_form_spectrum(&params, &ctx, omega);
                for (x, y) in a.iter().zip(b.iter()) {
                    worst = worst.max((x - y).norm());
                }
                for (x, y) in a.iter().zip(oracle.iter()) {
                    worst = worst.max((x - y).norm());
                }
            }
        }
    }
    outcome(worst <= 1e-12, format!("max entrywise gap {worst:.2e} over M1-M5, both networks, 64 frequencies"))
}

/// `Σ_{|h|<=H} Γ(h) e^{-2πihω}` with `Γ(h) = (1/T) Σ_t x_{t+h} x_tᵀ` (series centred).
fn lag_window_spectrum(x: &DMatrix<f64>, max_lag: usize, omega: f64) -> DMatrix<Complex64> {
    let (t, d) = x.shape();
    let mean = x.row_mean();
    let xc = DMatrix::from_fn(t, d, |i, j| x[(i, j)] - mean[j]);
    let mut f = DMatrix::<Complex64>::zeros(d, d);
    for h in 0..=max_lag {
        let a = xc.rows(h, t - h);
        let b = xc.rows(0, t - h);
        let gamma = a.transpose() * b / t as f64;
        let z = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * h as f64 * omega);
        f += gamma.map(|v| Complex64::new(v, 0.0)) * z;
        if h > 0 {
            f += gamma.transpose().map(|v| Complex64::new(v, 0.0)) * z.conj();
        }
    }
    f
}

fn criterion_2() -> Outcome {
    let ctx = NetworkContext::new(five_node_network());
    let params = builtin_model("M1", 5).unwrap();
    let x = simulate(&params, &ctx, 200_000, 500, &mut ChaCha8Rng::seed_from_u64(2024)).unwrap();
    let freqs = [0.05, 0.2, 0.4];
    let grid = FrequencyGrid::new(freqs.to_vec()).unwrap();
    let f = gnar_spectrum(&params, &ctx, &grid).unwrap();
    let mut errs = Vec::new();
    // sampling noise alone: Var f̂_ij ≈ (2H+1)/T f_ii f_jj
    let mut noise = Vec::new();
    for (omega, m) in f.iter() {
        let est = lag_window_spectrum(&x, 60, omega);
        errs.push((&est - m).norm() / m.norm());
        let tr = m.trace().re;
        noise.push((121.0 / 200_000.0 * tr * tr).sqrt() / m.norm());
    }
    let worst = errs.iter().copied().fold(0.0, f64::max);
    let fmt = |v: &[f64]| v.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>();
    outcome(
        worst <= 0.02,
        format!(
            "relative Frobenius errors {:?} at ω = {freqs:?}; expected sampling error of the oracle {:?}",
            fmt(&errs),
            fmt(&noise)
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut worst = 0.0f64;
    let mut zeros_ok = true;
    for _ in 0..50 {
        let d = rng.gen_range(2..=6);
        let m = common::random_hermitian_pd(d, &mut rng);
        let s = augment(&m).unwrap();
        let mut a = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in (i + 1)..d {
                if rng.gen_bool(0.5) {
                    a[(i, j)] = 1.0;
                    a[(j, i)] = 1.0;
                }
            }
        }
        let mask = gnarspec::graph::augment_mask(&a);
        let fit = constrained_mle(&s, &mask).unwrap();
        let n = 2 * d;
        for i in 0..n {
            for j in 0..n {
                if i == j || mask[(i, j)] != 0.0 {
                    worst = worst.max((fit.sigma[(i, j)] - s[(i, j)]).abs());
                } else if fit.theta[(i, j)] != 0.0 {
                    zeros_ok = false;
                }
            }
        }
    }
    let s = DMatrix::from_row_slice(3, 3, &[2.0, 0.6, 0.3, 0.6, 1.5, -0.4, 0.3, -0.4, 1.0]);
    let chain = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
    let fit = constrained_mle(&s, &chain).unwrap();
    let closed = s[(0, 1)] * s[(1, 2)] / s[(1, 1)];
    let chain_err = (fit.sigma[(0, 2)] - closed).abs();
    outcome(
        worst <= 1e-8 && zeros_ok && chain_err <= 1e-8,
        format!("free-entry gap {worst:.2e}, exact off-mask zeros {zeros_ok}, chain closed-form gap {chain_err:.2e}"),
    )
}

fn criterion_4() -> Outcome {
    let models = ["M1", "M2", "M3", "M4", "M5"];
    let lengths = [100, 200, 500, 1000];
    let mut spec = ExperimentSpec::new(&models, &["five", "ten"], &lengths);
    spec.replicates = 100;
    spec.seed = 4;
    let report = run_experiment(&spec).unwrap();
    let mut ordering_failures = Vec::new();
    let mut trend_failures = Vec::new();
    let mut coherence_t100 = Vec::new();
    for net in ["five", "ten"] {
        for m in models {
            for &t in &lengths {
                for target in Target::ALL {
                    let em1 = report.get(net, m, Method::EM1, t, target).unwrap().rmse;
                    let others_min = Method::ALL[1..]
                        .iter()
                        .map(|&me| report.get(net, m, me, t, target).unwrap().rmse)
                        .fold(f64::INFINITY, f64::min);
                    if !(em1 < others_min) {
                        ordering_failures.push(format!("{net}/{m}/T={t}/{target}"));
                    }
                }
            }
            for target in Target::ALL {
                let seq: Vec<f64> = lengths.iter().map(|&t| report.get(net, m, Method::EM1, t, target).unwrap().rmse).collect();
                if !seq.windows(2).all(|w| w[1] < w[0]) {
                    trend_failures.push(format!("{net}/{m}/{target}"));
                }
            }
            coherence_t100.push(100.0 * report.get(net, m, Method::EM1, 100, Target::Coherence).unwrap().rmse);
        }
    }
    let lo = coherence_t100.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = coherence_t100.iter().copied().fold(0.0, f64::max);
    let range_ok = lo >= 0.3 && hi <= 3.0;
    let excluded: usize = report.rows.iter().map(|r| r.excluded).sum();
    outcome(
        ordering_failures.is_empty() && trend_failures.is_empty() && range_ok,
        format!(
            "(a) EM1 strictly best in {}/120 cells x targets{}; (b) EM1 decreasing in T in {}/30 series{}; \
             (c) EM1 coherence RMSE x100 at T=100 spans [{lo:.2}, {hi:.2}] vs required [0.3, 3.0]; {excluded} excluded fits",
            120 - ordering_failures.len(),
            if ordering_failures.is_empty() { String::new() } else { format!(" (fails: {})", ordering_failures.join(", ")) },
            30 - trend_failures.len(),
            if trend_failures.is_empty() { String::new() } else { format!(" (fails: {})", trend_failures.join(", ")) },
        ),
    )
}

fn criterion_5() -> Outcome {
    let models = ["M1", "M2", "M3", "M4", "M5"];
    let mut spec = ExperimentSpec::new(&models, &["five", "ten"], &[1000]);
    spec.replicates = 100;
    spec.methods = vec![Method::EM1];
    spec.seed = 5;
    let known = run_experiment(&spec).unwrap();
    spec.mode = Mode::BicMisspec;
    let bic = run_experiment(&spec).unwrap();
    let mut worst_ratio = 0.0f64;
    for (a, b) in known.rows.iter().zip(&bic.rows) {
        worst_ratio = worst_ratio.max(b.rmse / a.rmse);
    }
    let m1: Vec<_> = bic.order_recovery.iter().filter(|o| o.model == "M1").collect();
    let min_rate = m1.iter().map(|o| o.hits as f64 / o.replicates as f64).fold(1.0, f64::min);
    let rates: Vec<String> = m1.iter().map(|o| format!("{} {}/{}", o.network, o.hits, o.replicates)).collect();
    outcome(
        worst_ratio <= 2.0 && min_rate >= 0.9,
        format!("worst BIC/known EM1 RMSE ratio {worst_ratio:.3}; M1 order recovered {}", rates.join(", ")),
    )
}

fn criterion_6() -> Outcome {
    let mut spec = ExperimentSpec::new(&["M3"], &["ten"], &[1000]);
    spec.replicates = 100;
    spec.seed = 6;
    let rows = run_hierarchy_experiment(&spec, 3, LadderChoice::Estimated).unwrap();
    let rmse: Vec<f64> = rows.iter().map(|r| r.rmse_truth).collect();
    let monotone = rmse.windows(2).all(|w| w[1] <= w[0]);

    // support nesting and diagonal preservation on individual replicates
    let ctx = NetworkContext::new(ten_node_network());
    let params = builtin_model("M3", 10).unwrap();
    let grid = FrequencyGrid::fourier(1000).unwrap();
    let mut nesting_violations = 0usize;
    let mut checked = 0usize;
    let mut diag_gap = 0.0f64;
    for seed in 0..20 {
        let x = simulate(&params, &ctx, 1000, 500, &mut ChaCha8Rng::seed_from_u64(600 + seed)).unwrap();
        let fit = fit_ols(&x, &params.order(), &ctx).unwrap();
        let s = precision(&gnar_spectrum(&fit.params, &ctx, &grid).unwrap()).unwrap();
        let h = build_hierarchy(&s, ctx.stages(), 3, true).unwrap();
        for l in 0..grid.len() {
            checked += 1;
            let sup = |r: usize, i: usize, j: usize| h.precisions[r].matrices()[l][(i, j)].norm() != 0.0;
            let mut ok = true;
            for i in 0..10 {
                for r in 0..3 {
                    diag_gap = diag_gap.max((h.precisions[r].matrices()[l][(i, i)] - s.matrices()[l][(i, i)]).norm());
                }
                for j in 0..10 {
                    if (sup(0, i, j) && !sup(1, i, j)) || (sup(1, i, j) && !sup(2, i, j)) {
                        ok = false;
                    }
                }
            }
            if !ok {
                nesting_violations += 1;
            }
        }
    }
    outcome(
        monotone && nesting_violations == 0 && diag_gap <= 1e-10,
        format!(
            "RMSE x100 by r = {:?}; nesting violated at {nesting_violations}/{checked} frequencies; diagonal gap {diag_gap:.2e}",
            rmse.iter().map(|v| format!("{:.3}", 100.0 * v)).collect::<Vec<_>>()
        ),
    )
}

fn criterion_7() -> Outcome {
    let (_, truth_edges) = volatility_generator();
    let mut worst_row = 0.0f64;
    let mut bisection_matches = true;
    let mut jaccards = Vec::new();
    for seed in 0..20 {
        let (bars, _) = synthetic_ohlc(1000, &mut ChaCha8Rng::seed_from_u64(700 + seed)).unwrap();
        let x = log_volatility_panel(&bars).unwrap();
        let res = gfevd_pipeline(&x, &GfevdOptions::default()).unwrap();
        let psi = DMatrix::from_fn(6, 6, |i, j| res.psi[i][j]);
        for i in 0..6 {
            worst_row = worst_row.max((psi.row(i).sum() - 1.0).abs());
        }
        let c = default_candidates(&psi);
        let bis = threshold_by_bisection(&psi, &c).unwrap();
        if bis != threshold_by_scan(&psi, &c).unwrap() || bis != res.tau_star {
            bisection_matches = false;
        }
        let found: Vec<(usize, usize)> = res.edges.iter().map(|&(i, j, _)| (i, j)).collect();
        let inter = found.iter().filter(|e| truth_edges.contains(e)).count();
        let union = found.len() + truth_edges.len() - inter;
        jaccards.push(inter as f64 / union as f64);
    }
    let mean = jaccards.iter().sum::<f64>() / jaccards.len() as f64;
    let min = jaccards.iter().copied().fold(1.0, f64::min);
    outcome(
        worst_row <= 1e-10 && bisection_matches && mean >= 0.6,
        format!("row-sum gap {worst_row:.2e}; bisection = scan {bisection_matches}; Jaccard mean {mean:.3}, min {min:.3} over 20 seeds"),
    )
}

fn criterion_8() -> Outcome {
    let mut failed = Vec::new();
    for &(name, check, cases) in common::ALL_CHECKS {
        if let Err(e) = check(&mut common::runner(cases)) {
            failed.push(format!("{name}: {e}"));
        }
    }
    outcome(
        failed.is_empty(),
        format!("{}/{} invariant groups hold{}", common::ALL_CHECKS.len() - failed.len(), common::ALL_CHECKS.len(),
            if failed.is_empty() { String::new() } else { format!(" (fails: {})", failed.join("; ")) }),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 8] = [
        ("1 embedding identity", criterion_1, Some(Duration::from_secs(1))),
        ("2 spectral oracle", criterion_2, Some(Duration::from_secs(120))),
        ("3 estimating equations", criterion_3, Some(Duration::from_secs(30))),
        ("4 table trends", criterion_4, Some(Duration::from_secs(20 * 60))),
        ("5 misspecification", criterion_5, Some(Duration::from_secs(10 * 60))),
        ("6 hierarchy", criterion_6, None),
        ("7 volatility network", criterion_7, Some(Duration::from_secs(120))),
        ("8 property suite", criterion_8, Some(Duration::from_secs(60))),
    ];
    // ACCEPTANCE_ONLY=2,7 runs a subset
    let only: Option<Vec<String>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').map(|s| s.trim().to_string()).collect());
    let mut passed = 0;
    let mut ran = 0;
    for (name, run, budget) in criteria {
        let number = name.split(' ').next().unwrap_or_default();
        if only.as_ref().is_some_and(|o| !o.iter().any(|s| s == number)) {
            continue;
        }
        ran += 1;
        let started = Instant::now();
        let res = run();
        let elapsed = started.elapsed();
        let pass = res.pass && budget.map_or(true, |b| elapsed <= b);
        if pass {
            passed += 1;
        }
        println!(
            "{} criterion {name}: {} [{:.1}s, {}]",
            if pass { "PASS" } else { "FAIL" },
            res.detail,
            elapsed.as_secs_f64(),
            budget.map_or("no time budget".to_string(), |b| format!("budget {}s", b.as_secs()))
        );
    }
    println!("acceptance: {passed}/{ran} criteria passed");
    if passed < ran && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
