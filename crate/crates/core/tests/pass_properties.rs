use nalgebra::DMatrix;
use passreg::baselines::{fit_lasso_supervised, fit_plasso, PlassoOptions, PlassoVariant};
use passreg::data::LabeledData;
use passreg::eval::{make_folds, CvOptions};
use passreg::pass::{fit_pass, tune_pass_with_folds, PassTuning};
use passreg::simgen::standard_normal;
use passreg::solver::SolverConfig;
use passreg::surrogate::AlphaFit;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64, n: usize, p: usize) -> (LabeledData, AlphaFit) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| standard_normal(&mut rng));
    let mut alpha: Vec<f64> = (0..p)
        .map(|j| if j < p / 2 { rng.random_range(-1.0..1.0) } else { 0.0 })
        .collect();
    alpha[0] = 0.9;
    let s: Vec<f64> = (0..n)
        .map(|i| (0..p).map(|j| x[(i, j)] * alpha[j]).sum::<f64>() + standard_normal(&mut rng))
        .collect();
    let mut y: Vec<f64> = (0..n)
        .map(|i| {
            let eta = -0.2 + 0.6 * s[i] + 0.5 * x[(i, p - 1)];
            f64::from(u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp())))
        })
        .collect();
    y[0] = 1.0;
    y[1] = 0.0;
    (LabeledData::new(x, s, y).unwrap(), AlphaFit::from_direction(alpha))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shrinkage_toward_prior_grows_with_lambda(seed in any::<u64>(), kappa in prop::sample::select(vec![0.25, 0.5, 1.0, 2.0, 4.0])) {
        let (data, alpha) = instance(seed, 100, 10);
        let cfg = SolverConfig::default();
        let mut previous = f64::INFINITY;
        for k in 0..12 {
            let lambda1 = 0.002 * 1.6f64.powi(k);
            let fit = fit_pass(&data, &alpha, lambda1, kappa, &cfg).unwrap();
            let l1: f64 = fit.delta.iter().map(|d| d.abs()).sum();
            prop_assert!(l1 <= previous + 1e-6, "λ₁={lambda1}: {l1} > {previous}");
            prop_assert!(fit.diagnostics.kkt_max_violation <= 1e-6);
            previous = l1;
        }
    }

    #[test]
    fn rescaled_prior_rescales_rho_only(seed in any::<u64>(), c in 0.2f64..5.0) {
        let (data, alpha) = instance(seed, 90, 8);
        let cfg = SolverConfig::default();
        let a = fit_pass(&data, &alpha, 0.02, 1.0, &cfg).unwrap();
        let b = fit_pass(&data, &alpha.scaled(c), 0.02, 1.0, &cfg).unwrap();
        for (u, v) in a.beta.iter().zip(&b.beta) {
            prop_assert!((u - v).abs() <= 1e-5);
        }
        prop_assert!((a.rho - c * b.rho).abs() <= 1e-5 * (1.0 + a.rho.abs()));
    }
}

#[test]
fn single_point_grid_equals_direct_fit() {
    let (data, alpha) = instance(11, 80, 6);
    let cfg = SolverConfig::default();
    let folds = make_folds(&data.y, 5, 11, true).unwrap();
    let tuning = PassTuning {
        kappa_grid: vec![2.0],
        lambda1_grid: Some(vec![0.03]),
        ..PassTuning::default()
    };
    let tuned = tune_pass_with_folds(&data, &alpha, &tuning, &folds, &cfg).unwrap();
    let direct = fit_pass(&data, &alpha, 0.03, 2.0, &cfg).unwrap();
    for (a, b) in tuned.beta.iter().zip(&direct.beta) {
        assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
    }
    assert_eq!(tuned.lambda1, 0.03);
    assert_eq!(tuned.kappa, 2.0);
}

#[test]
fn duplicated_grid_entries_select_identically() {
    let (data, alpha) = instance(12, 80, 6);
    let cfg = SolverConfig::default();
    let folds = make_folds(&data.y, 5, 12, true).unwrap();
    let base = PassTuning {
        kappa_grid: vec![0.5, 2.0],
        lambda1_grid: Some(vec![0.1, 0.03, 0.01]),
        ..PassTuning::default()
    };
    let doubled = PassTuning {
        kappa_grid: vec![0.5, 0.5, 2.0, 2.0],
        lambda1_grid: Some(vec![0.1, 0.1, 0.03, 0.03, 0.01, 0.01]),
        ..PassTuning::default()
    };
    let a = tune_pass_with_folds(&data, &alpha, &base, &folds, &cfg).unwrap();
    let b = tune_pass_with_folds(&data, &alpha, &doubled, &folds, &cfg).unwrap();
    assert_eq!((a.lambda1, a.kappa), (b.lambda1, b.kappa));
    assert_eq!(a.beta, b.beta);
}

#[test]
fn zero_mixing_weight_reduces_prior_lasso_to_lasso() {
    let (data, alpha) = instance(13, 120, 10);
    let cfg = SolverConfig::default();
    let cv = CvOptions {
        n_folds: 5,
        ..CvOptions::default()
    };
    let folds = make_folds(&data.y, 5, 13, true).unwrap();
    let only_zero = PlassoOptions { mixing_grid: vec![0.0] };
    let lasso = fit_lasso_supervised(&data, &cv, &folds, &cfg).unwrap();
    for variant in [PlassoVariant::Support, PlassoVariant::SsPrior] {
        let plasso = fit_plasso(&data, &alpha, variant, &only_zero, &cv, &folds, &cfg).unwrap();
        for (a, b) in plasso.beta.iter().zip(&lasso.beta) {
            assert!((a - b).abs() <= 1e-6);
        }
        assert!((plasso.zeta - lasso.zeta).abs() <= 1e-6);
    }
}
