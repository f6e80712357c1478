//! Randomised invariants shared by the property tests and the acceptance
//! harness. Each check drives a deterministic proptest runner.

#![allow(dead_code)]

use gnarspec::bench::rmse;
use gnarspec::gfevd::{build_network, gfevd, ma_coefficients, threshold_by_scan, default_candidates, HorizonStart};
use gnarspec::gnar::{gnar_recursion, simulate, var_coefficients, GnarParams};
use gnarspec::graph::{compute_stages, Network, NetworkContext};
use gnarspec::hierarchy::{soft_threshold, threshold_matrix};
use gnarspec::linalg::{hermitian_deviation, min_eigenvalue_hermitian};
use gnarspec::periodogram::{augment, constrained_mle, de_augment, dft, smoothed_periodogram, SmoothingSpec};
use gnarspec::spectra::{coherence, gnar_spectrum, partial_coherence, precision, FieldKind, FrequencyGrid, SpectralField};
use gnarspec::var::{draw_innovations, var_recursion};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(Config { cases, failure_persistence: None, ..Config::default() }, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

pub fn random_network(d: usize, rng: &mut ChaCha8Rng) -> Network {
    let mut edges = Vec::new();
    for i in 1..d {
        edges.push((rng.gen_range(0..i), i));
    }
    for i in 0..d {
        for j in (i + 1)..d {
            if rng.gen_bool(0.15) && !edges.contains(&(i, j)) {
                edges.push((i, j));
            }
        }
    }
    Network::new(d, &edges).unwrap()
}

pub fn random_pd(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d + 2, |_, _| rng.gen_range(-1.0..1.0));
    &a * a.transpose() / (d + 2) as f64 + DMatrix::identity(d, d) * 0.2
}

pub fn random_hermitian_pd(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let a = DMatrix::from_fn(d, d + 2, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let m = &a * a.adjoint() / Complex64::new((d + 2) as f64, 0.0) + DMatrix::identity(d, d) * Complex64::new(0.2, 0.0);
    (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Stationary parameters with coefficient sum at most 0.9.
pub fn random_params(ctx: &NetworkContext, rng: &mut ChaCha8Rng) -> GnarParams {
    let p = rng.gen_range(1..=3);
    let s_cap = ctx.r_max().min(2);
    let mut alpha: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut beta: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..rng.gen_range(0..=s_cap)).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let total: f64 = alpha.iter().map(|a| a.abs()).sum::<f64>() + beta.iter().flatten().map(|b| b.abs()).sum::<f64>();
    let scale = rng.gen_range(0.1..0.9) / total;
    alpha.iter_mut().for_each(|a| *a *= scale);
    beta.iter_mut().flatten().for_each(|b| *b *= scale);
    GnarParams::new(alpha, beta, random_pd(ctx.node_count(), rng)).unwrap()
}

fn random_model(d: usize, seed: u64) -> (NetworkContext, GnarParams, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ctx = NetworkContext::new(random_network(d, &mut rng));
    let params = random_params(&ctx, &mut rng);
    (ctx, params, rng)
}

fn field_from(ms: Vec<DMatrix<Complex64>>, kind: FieldKind) -> SpectralField {
    let n = ms.len();
    SpectralField::new(FrequencyGrid::uniform(n).unwrap(), ms, kind).unwrap()
}

type Check = std::result::Result<(), String>;

fn finish(r: std::result::Result<(), proptest::test_runner::TestError<impl std::fmt::Debug>>) -> Check {
    r.map_err(|e| e.to_string())
}

/// Stage matrices partition the off-diagonal pairs of a connected graph
/// and stage weights are row-stochastic on nonempty stages.
pub fn stages_partition(runner: &mut TestRunner) -> Check {
    finish(runner.run(&(2usize..9, any::<u64>()), |(d, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(d, &mut rng);
        let stages = compute_stages(&net);
        let total = stages.stages().iter().fold(DMatrix::<f64>::identity(d, d), |acc, a| acc + a);
        prop_assert_eq!(total, DMatrix::from_element(d, d, 1.0));
        let ctx = NetworkContext::new(net);
        for r in 1..=ctx.r_max() {
            let a = ctx.stages().stage(r);
            prop_assert_eq!(a, &a.transpose());
            let w = ctx.operator(r);
            for i in 0..d {
                let s: f64 = w.row(i).sum();
                if ctx.stages().stage_size(i, r) > 0 {
                    prop_assert!((s - 1.0).abs() < 1e-12);
                } else {
                    prop_assert_eq!(s, 0.0);
                }
            }
        }
        Ok(())
    }))
}

/// The network recursion and its VAR embedding agree on shared innovations.
pub fn var_embedding_matches_recursion(runner: &mut TestRunner) -> Check {
    finish(runner.run(&(2usize..8, any::<u64>()), |(d, seed)| {
        let (ctx, params, mut rng) = random_model(d, seed);
        let eps = draw_innovations(params.innovation_cov(), 80, &mut rng).unwrap();
        let a = gnar_recursion(&params, &ctx, &eps, 10);
        let b = var_recursion(&var_coefficients(&params, &ctx).unwrap(), &eps, 10);
        prop_assert!((a - b).abs().max() < 1e-10);
        Ok(())
    }))
}

/// Model spectra are Hermitian and positive definite.
pub fn spectrum_hermitian_pd(runner: &mut TestRunner) -> Check {
    finish(runner.run(&(1usize..8, any::<u64>()), |(d, seed)| {
        let (ctx, params, _) = random_model(d, seed);
        let f = gnar_spectrum(&params, &ctx, &FrequencyGrid::uniform(16).unwrap()).unwrap();
        for m in f.matrices() {
            prop_assert!(hermitian_deviation(m) < 1e-12);
            prop_assert!(min_eigenvalue_hermitian(m) > 0.0);
        }
        Ok(())
    }))
}

/// Smoothed periodograms are Hermitian and positive semidefinite.
pub fn smoothed_periodogram_hermitian_psd(runner: &mut TestRunner) -> Check {
    finish(runner.run(&(1usize..6, 20usize..120, any::<u64>()), |(d, t, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(t, d, |_, _| rng.gen_range(-1.0..1.0));
        let f = smoothed_periodogram(&x, &SmoothingSpec::default_for(t)).unwrap();
        for m in f.matrices() {
            prop_assert!(hermitian_deviation(m) < 1e-12);
            prop_assert!(min_eigenvalue_hermitian(m) > -1e-12);
        }
        Ok(())
    }))
}

/// Coherence and partial coherence lie in `[0, 1]` with unit diagonal.
pub fn coherence_bounds(runner: &mut TestRunner) -> Check {
    finish(runner.run(&(1usize..8, any::<u64>()), |(d, seed)| {
        let (ctx, params, _) = random_model(d, seed);
        let f = gnar_spectrum(&params, &ctx, &FrequencyGrid::uniform(12).unwrap()).unwrap();
        let c = coherence(&f).unwrap();
        let pc = partial_coherence(&precision(&f).unwrap()).unwrap();
        for field in [&c, &pc] {
            for m in field.matrices() {
                for i in 0..d {
                    prop_assert_eq!(m[(i, i)], Complex64::new(1.0, 0.0));
                    for j in 0..d {
                        prop_assert!(m[(i, j)].im == 0.0 && (0.0..=1.0).contains(&m[(i, j)].re));
                        prop_assert_eq!(m[(i, j)], m[(j, i)]);
                    }
                }
            }
        }
        Ok(())
    }))
}

/// With two nodes, coherence and partial coherence coincide.
pub fn bivariate_coherence_identity(runner: &mut TestRunner) -> Check {
    finish(runner.run(&any::<u64>(), |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ms: Vec<_> = (0..5).map(|_| random_hermitian_pd(2, &mut rng)).collect();
        let f = field_from(ms, FieldKind::Spectrum);
        let c = coherence(&f).unwrap();
        let pc = partial_coherence(&precision(&f).unwrap()).unwrap();
        for (a, b) in c.matrices().iter().zip(pc.matrices()) {
            prop_assert!((a[(0, 1)].re - b[(0, 1)].re).abs() < 1e-10);
        }
        Ok(())
    }))
}

/// `Σ_l |J(ω_l)|² = Σ_t |x_t|²` for the unitary DFT.
pub fn parseval(runner: &mut TestRunner) -> Check {
    finish(runner.run(&(1usize..5, 2usize..200, any::<u64>()), |(d, t, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(t, d, |_, _| rng.gen_range(-3.0..3.0));
        let j = dft(&x).unwrap();
        let freq: f64 = j.iter().map(|v| v.norm_squared()).sum();
        let time = x.norm_squared();
        prop_assert!((freq - time).abs() <= 1e-10 * time.max(1.0));
        Ok(())
    }))
}

/// Soft-thresholding shrinks the modulus by exactly `ρ` (floored at zero)
/// and keeps the phase of survivors.
pub fn soft_threshold_shrinks(runner: &mut TestRunner) -> Check {
    finish(runner.run(&(-5.0f64..5.0, -5.0f64..5.0, 0.0f64..4.0), |(re, im, rho)| {
        let z = Complex64::new(re, im);
        let out = soft_threshold(z, rho);
        prop_assert!(out.norm() <= z.norm() + 1e-15);
        prop_assert!((out.norm() - (z.norm() - rho).max(0.0)).abs() < 1e-12);
        if out.norm() > 1e-9 {
            let dphase = (out / z).arg();
            prop_assert!(dphase.abs() < 1e-12);
        }
        Ok(())
    }))
}

/// Thresholded precisions stay Hermitian, keep their diagonal and have
/// nested supports as the level decreases.
pub fn threshold_support_nesting(runner: &mut TestRunner) -> Check {
    finish(runner.run(&(2usize..7, any::<u64>(), 0.0f64..1.0, 0.0f64..1.0), |(d, seed, a, b)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_hermitian_pd(d, &mut rng);
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        let big = threshold_matrix(&s, hi);
        let small = threshold_matrix(&s, lo);
        prop_assert!(hermitian_deviation(&big) < 1e-15);
        for i in 0..d {
            prop_assert!((big[(i, i)] - s[(i, i)]).norm() < 1e-10);
            for j in 0..d {
                if big[(i, j)].norm() != 0.0 {
                    prop_assert!(small[(i, j)].norm() != 0.0);
                }
            }
        }
        Ok(())
    }))
}

/// Augmentation is inverted exactly by de-augmentation.
pub fn augmentation_round_trip(runner: &mut TestRunner) -> Check {
    finish(runner.run(&(1usize..7, any::<u64>()), |(d, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_hermitian_pd(d, &mut rng);
        let big = augment(&m).unwrap();
        prop_assert_eq!(&big, &big.transpose());
        let back = de_augment(&big);
        prop_assert!((back - m).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-14);
        Ok(())
    }))
}

/// Covariance selection matches the input on free entries and leaves
/// exact zeros in the precision elsewhere.
pub fn covariance_selection_equations(runner: &mut TestRunner) -> Check {
    finish(runner.run(&(2usize..10, any::<u64>()), |(n, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_pd(n, &mut rng);
        let mut mask = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen_bool(0.4) {
                    mask[(i, j)] = 1.0;
                    mask[(j, i)] = 1.0;
                }
            }
        }
        let fit = constrained_mle(&s, &mask).unwrap();
        for i in 0..n {
            for j in 0..n {
                if i == j || mask[(i, j)] != 0.0 {
                    prop_assert!((fit.sigma[(i, j)] - s[(i, j)]).abs() < 1e-8);
                } else {
                    prop_assert_eq!(fit.theta[(i, j)], 0.0);
                }
            }
        }
        Ok(())
    }))
}

/// Decomposition rows are shares summing to one; bisection agrees with
/// a linear scan and yields a connected graph.
pub fn gfevd_rows_and_threshold(runner: &mut TestRunner) -> Check {
    finish(runner.run(&(2usize..7, 1usize..3, 1usize..12, any::<u64>()), |(d, p, h, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pi: Vec<_> = (0..p)
            .map(|_| DMatrix::from_fn(d, d, |_, _| rng.gen_range(-0.4..0.4) / d as f64))
            .collect();
        let v = random_pd(d, &mut rng);
        let b = ma_coefficients(&pi, h);
        let psi = gfevd(&b, &v, h, HorizonStart::Zero).unwrap();
        for i in 0..d {
            prop_assert!((psi.row(i).sum() - 1.0).abs() < 1e-10);
            prop_assert!(psi.row(i).iter().all(|&x| x >= 0.0));
        }
        let net = build_network(&psi, None).unwrap();
        prop_assert_eq!(net.tau_star, threshold_by_scan(&psi, &default_candidates(&psi)).unwrap());
        prop_assert!(net.to_network(d).unwrap().is_connected());
        Ok(())
    }))
}

/// RMSE is nonnegative and zero exactly when estimates equal the truth.
pub fn rmse_nonnegative(runner: &mut TestRunner) -> Check {
    finish(runner.run(&(1usize..5, 1usize..4, any::<u64>()), |(d, r, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = field_from((0..4).map(|_| random_hermitian_pd(d, &mut rng)).collect(), FieldKind::Spectrum);
        let ests: Vec<_> = (0..r)
            .map(|_| field_from((0..4).map(|_| random_hermitian_pd(d, &mut rng)).collect(), FieldKind::Spectrum))
            .collect();
        prop_assert!(rmse(&ests, &truth).unwrap() >= 0.0);
        prop_assert_eq!(rmse(&[truth.clone()], &truth).unwrap(), 0.0);
        Ok(())
    }))
}

/// Same seed, same panel.
pub fn simulation_deterministic(runner: &mut TestRunner) -> Check {
    finish(runner.run(&(2usize..7, any::<u64>()), |(d, seed)| {
        let (ctx, params, _) = random_model(d, seed);
        let a = simulate(&params, &ctx, 50, 20, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = simulate(&params, &ctx, 50, 20, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(a, b);
        Ok(())
    }))
}

pub type NamedCheck = (&'static str, fn(&mut TestRunner) -> Check, u32);

/// Every invariant with its case count.
pub const ALL_CHECKS: &[NamedCheck] = &[
    ("stage partition and weights", stages_partition, 64),
    ("VAR embedding matches recursion", var_embedding_matches_recursion, 64),
    ("spectrum Hermitian positive definite", spectrum_hermitian_pd, 64),
    ("smoothed periodogram Hermitian PSD", smoothed_periodogram_hermitian_psd, 48),
    ("coherence bounds", coherence_bounds, 64),
    ("bivariate coherence equals partial coherence", bivariate_coherence_identity, 64),
    ("Parseval", parseval, 64),
    ("soft threshold shrinkage and phase", soft_threshold_shrinks, 256),
    ("threshold support nesting", threshold_support_nesting, 128),
    ("augmentation round trip", augmentation_round_trip, 64),
    ("covariance selection estimating equations", covariance_selection_equations, 48),
    ("decomposition rows and threshold", gfevd_rows_and_threshold, 64),
    ("RMSE nonnegative", rmse_nonnegative, 64),
    ("simulation deterministic", simulation_deterministic, 32),
];
