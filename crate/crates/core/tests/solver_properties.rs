use approx::assert_relative_eq;
use nalgebra::DMatrix;
use passreg::solver::{
    fit_logistic_newton, fit_weighted_l1_linear, fit_weighted_l1_logistic, kkt_check, regularization_path,
    soft_threshold, GlmProblem, LossKind, PathOptions, PenaltySpec, SolverConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    passreg::simgen::standard_normal(rng)
}

fn design(seed: u64, n: usize, p: usize) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, p, |_, _| normal(&mut rng))
}

fn responses(seed: u64, x: &DMatrix<f64>, loss: LossKind) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    let c: Vec<f64> = (0..x.ncols()).map(|j| if j < 3 { 1.0 - 0.5 * j as f64 } else { 0.0 }).collect();
    let mut y: Vec<f64> = (0..x.nrows())
        .map(|i| {
            let eta: f64 = 0.3 + (0..x.ncols()).map(|j| x[(i, j)] * c[j]).sum::<f64>();
            match loss {
                LossKind::Linear => eta + normal(&mut rng),
                LossKind::Logistic => f64::from(u8::from(rng.random::<f64>() < sigmoid(eta))),
            }
        })
        .collect();
    if loss == LossKind::Logistic {
        y[0] = 1.0;
        y[1] = 0.0;
    }
    y
}

fn penalized_objective(x: &DMatrix<f64>, y: &[f64], b0: f64, c: &[f64], lambda: f64, w: &[f64]) -> f64 {
    let n = x.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let eta = b0 + (0..x.ncols()).map(|j| x[(i, j)] * c[j]).sum::<f64>();
        total += (1.0 + eta.exp()).ln() - y[i] * eta;
    }
    total / n as f64 + lambda * c.iter().zip(w).map(|(a, b)| a.abs() * b).sum::<f64>()
}

/// Accelerated proximal gradient for weighted-L1 logistic regression with an
/// intercept, run until the iterates stop moving at 1e-12.
fn proximal_oracle(x: &DMatrix<f64>, y: &[f64], lambda: f64, w: &[f64]) -> (f64, Vec<f64>) {
    let (n, p) = x.shape();
    let step = 4.0 * n as f64 / (x.iter().map(|v| v * v).sum::<f64>() + n as f64);
    let mut theta = vec![0.0; p + 1];
    let mut prev = theta.clone();
    let mut t: f64 = 1.0;
    for _ in 0..1_000_000 {
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let z: Vec<f64> = theta.iter().zip(&prev).map(|(a, b)| a + (t - 1.0) / t_next * (a - b)).collect();
        let mut g = vec![0.0; p + 1];
        for i in 0..n {
            let eta = z[0] + (0..p).map(|j| x[(i, j)] * z[j + 1]).sum::<f64>();
            let r = sigmoid(eta) - y[i];
            g[0] += r / n as f64;
            for j in 0..p {
                g[j + 1] += r * x[(i, j)] / n as f64;
            }
        }
        let mut next = vec![z[0] - step * g[0]];
        for j in 0..p {
            let u = z[j + 1] - step * g[j + 1];
            next.push(soft_threshold(u, step * lambda * w[j]));
        }
        let f_new = penalized_objective(x, y, next[0], &next[1..], lambda, w);
        let f_old = penalized_objective(x, y, theta[0], &theta[1..], lambda, w);
        let moved = next.iter().zip(&theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prev = std::mem::replace(&mut theta, next);
        t = if f_new > f_old { 1.0 } else { t_next };
        if moved < 1e-12 {
            break;
        }
    }
    (theta[0], theta[1..].to_vec())
}

#[test]
fn single_standardized_covariate_is_soft_thresholded() {
    let n = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let raw: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let m = raw.iter().sum::<f64>() / n as f64;
    let sd = (raw.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt();
    let x = DMatrix::from_iterator(n, 1, raw.iter().map(|v| (v - m) / sd));
    let y: Vec<f64> = (0..n).map(|i| 0.7 * x[(i, 0)] + normal(&mut rng)).collect();
    let xty = (0..n).map(|i| x[(i, 0)] * y[i]).sum::<f64>() / n as f64;
    for (lambda, w) in [(0.1, 1.0), (0.4, 2.0), (2.0, 1.0)] {
        let fit = fit_weighted_l1_linear(&x, &y, &PenaltySpec::new(lambda, vec![w]).unwrap(), false).unwrap();
        // The squared-error loss carries no 1/2, so the threshold is λw/2.
        let closed = soft_threshold(xty, lambda * w / 2.0);
        assert_relative_eq!(fit.coefficients[0], closed, epsilon = 1e-9);
        let scalar_obj = |c: f64| -> f64 {
            (0..n).map(|i| (y[i] - c * x[(i, 0)]).powi(2)).sum::<f64>() / n as f64 + lambda * w * c.abs()
        };
        let best = (-20_000..=20_000)
            .map(|k| k as f64 * 1e-4)
            .min_by(|a, b| scalar_obj(*a).total_cmp(&scalar_obj(*b)))
            .unwrap();
        assert!((best - closed).abs() <= 1e-4, "grid {best} vs closed form {closed}");
    }
}

#[test]
fn zero_penalty_logistic_matches_newton() {
    let x = design(21, 120, 1);
    let y = responses(21, &x, LossKind::Logistic);
    let fit = fit_weighted_l1_logistic(&x, &y, &PenaltySpec::new(0.0, vec![1.0]).unwrap(), true).unwrap();
    let newton = fit_logistic_newton(&x, &y, &SolverConfig::default()).unwrap();
    assert!((fit.intercept - newton.intercept).abs() <= 1e-5);
    assert!((fit.coefficients[0] - newton.coefficients[0]).abs() <= 1e-5);
}

#[test]
fn mixed_weights_match_proximal_oracle() {
    for seed in 0..5 {
        let x = design(100 + seed, 150, 3);
        let y = responses(100 + seed, &x, LossKind::Logistic);
        let w = [1.0, 0.0, 2.0];
        let fit = fit_weighted_l1_logistic(&x, &y, &PenaltySpec::new(0.05, w.to_vec()).unwrap(), true).unwrap();
        let (b0, c) = proximal_oracle(&x, &y, 0.05, &w);
        assert!((fit.intercept - b0).abs() <= 1e-4);
        for j in 0..3 {
            assert!((fit.coefficients[j] - c[j]).abs() <= 1e-4, "seed {seed} coordinate {j}");
        }
        assert!(fit.coefficients[1] != 0.0);
    }
}

#[test]
fn warm_path_matches_cold_fits() {
    let cfg = SolverConfig::default();
    for loss in [LossKind::Linear, LossKind::Logistic] {
        let x = design(31, 100, 15);
        let y = responses(31, &x, loss);
        let problem = GlmProblem::new(&x, &y, loss, true).unwrap();
        let w = vec![1.0; 15];
        let path = regularization_path(
            &problem,
            &w,
            &PathOptions {
                n_lambda: 50,
                lambda_min_ratio: 1e-2,
            },
            &cfg,
        )
        .unwrap();
        assert_eq!(path.len(), 50);
        for (lambda, warm) in &path {
            let cold = problem.fit(&PenaltySpec::new(*lambda, w.clone()).unwrap(), &cfg, None).unwrap();
            let gap = warm
                .coefficients
                .iter()
                .zip(&cold.coefficients)
                .map(|(a, b)| (a - b).abs())
                .fold((warm.intercept - cold.intercept).abs(), f64::max);
            assert!(gap <= 1e-4, "{loss:?} λ={lambda}: gap {gap}");
        }
    }
}

#[test]
fn unpenalized_coordinates_survive_heavy_penalty() {
    let x = design(41, 200, 6);
    let y = responses(41, &x, LossKind::Logistic);
    let w = vec![0.0, 1.0, 0.0, 1.0, 1.0, 1.0];
    let fit = fit_weighted_l1_logistic(&x, &y, &PenaltySpec::new(1e3, w).unwrap(), true).unwrap();
    let restricted = x.select_columns(&[0, 2]);
    let newton = fit_logistic_newton(&restricted, &y, &SolverConfig::default()).unwrap();
    assert!((fit.intercept - newton.intercept).abs() <= 1e-5);
    assert!((fit.coefficients[0] - newton.coefficients[0]).abs() <= 1e-5);
    assert!((fit.coefficients[2] - newton.coefficients[1]).abs() <= 1e-5);
    assert!([1, 3, 4, 5].iter().all(|&j| fit.coefficients[j] == 0.0));
}

fn loss_strategy() -> impl Strategy<Value = LossKind> {
    prop_oneof![Just(LossKind::Linear), Just(LossKind::Logistic)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn converged_fits_certify_kkt(
        seed in 0u64..10_000,
        p in 1usize..=20,
        extra in 0usize..=150,
        ratio in 0.02f64..0.95,
        loss in loss_strategy(),
    ) {
        let n = (p + 30 + extra).min(200);
        let x = design(seed, n, p);
        let y = responses(seed, &x, loss);
        let problem = GlmProblem::new(&x, &y, loss, true).unwrap();
        let w = vec![1.0; p];
        let cfg = SolverConfig::default();
        let (lmax, _) = problem.lambda_max(&w, &cfg).unwrap();
        let pen = PenaltySpec::new(lmax * ratio, w).unwrap();
        let fit = problem.fit(&pen, &cfg, None).unwrap();
        prop_assert!(fit.converged);
        let v = kkt_check(&fit, &x, &y, &pen, loss).unwrap();
        prop_assert!(v <= 1e-6, "violation {v}");
    }

    #[test]
    fn objective_trace_never_increases(
        seed in 0u64..10_000,
        p in 2usize..=15,
        ratio in 0.02f64..0.9,
        loss in loss_strategy(),
    ) {
        let x = design(seed, 80, p);
        let y = responses(seed, &x, loss);
        let problem = GlmProblem::new(&x, &y, loss, true).unwrap();
        let cfg = SolverConfig { record_trace: true, ..SolverConfig::default() };
        let w = vec![1.0; p];
        let (lmax, _) = problem.lambda_max(&w, &cfg).unwrap();
        let fit = problem.fit(&PenaltySpec::new(lmax * ratio, w).unwrap(), &cfg, None).unwrap();
        prop_assert!(!fit.trace.is_empty());
        for pair in fit.trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12, "{} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn linear_fit_is_scale_equivariant(
        seed in 0u64..10_000,
        p in 1usize..=10,
        c in 0.1f64..10.0,
        lambda in 0.01f64..0.5,
    ) {
        let x = design(seed, 60, p);
        let y = responses(seed, &x, LossKind::Linear);
        let yc: Vec<f64> = y.iter().map(|v| v * c).collect();
        let w = vec![1.0; p];
        let base = fit_weighted_l1_linear(&x, &y, &PenaltySpec::new(lambda, w.clone()).unwrap(), true).unwrap();
        let scaled = fit_weighted_l1_linear(&x, &yc, &PenaltySpec::new(lambda * c, w).unwrap(), true).unwrap();
        for (a, b) in base.coefficients.iter().zip(&scaled.coefficients) {
            prop_assert!((a * c - b).abs() <= 1e-5 * (1.0 + b.abs()), "{} vs {}", a * c, b);
        }
        prop_assert!((base.intercept * c - scaled.intercept).abs() <= 1e-5 * (1.0 + scaled.intercept.abs()));
    }
}
