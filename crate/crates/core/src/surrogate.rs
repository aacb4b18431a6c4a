//! Surrogate-direction estimation on all N rows: LASSO least squares of S on
//! X tuned by BIC, followed by an adaptive-LASSO refit also tuned by BIC.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::solver::{regularization_path, GlmFit, GlmProblem, LossKind, PathOptions, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaOptions {
    /// Exponent of the adaptive weights |α_init|^-ν.
    pub nu: f64,
    pub path: PathOptions,
}

impl Default for AlphaOptions {
    fn default() -> Self {
        AlphaOptions {
            nu: 1.0,
            path: PathOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaFit {
    pub alpha: Vec<f64>,
    pub tau: f64,
    pub alpha_init: Vec<f64>,
    pub tau_init: f64,
    /// Indices of the nonzero entries of `alpha`.
    pub support: Vec<usize>,
    pub mu_init: f64,
    pub mu: f64,
    pub bic_init: f64,
    pub bic: f64,
    pub nu: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl AlphaFit {
    /// An empty direction (α̂ = 0), e.g. when no feature tracks the surrogate.
    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// The same fit with α̂ multiplied by `c`; the support is unchanged for c ≠ 0.
    pub fn scaled(&self, c: f64) -> AlphaFit {
        let mut out = self.clone();
        out.alpha.iter_mut().for_each(|a| *a *= c);
        out.support = support_of(&out.alpha);
        out
    }

    /// Build a fit around a given direction, bypassing estimation.
    pub fn from_direction(alpha: Vec<f64>) -> AlphaFit {
        let support = support_of(&alpha);
        AlphaFit {
            alpha_init: alpha.clone(),
            alpha,
            tau: 0.0,
            tau_init: 0.0,
            support,
            mu_init: 0.0,
            mu: 0.0,
            bic_init: f64::NAN,
            bic: f64::NAN,
            nu: 1.0,
            warnings: Vec::new(),
        }
    }
}

pub fn support_of(v: &[f64]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, &a)| a != 0.0)
        .map(|(j, _)| j)
        .collect()
}

/// N·ln(RSS/N) + df·ln(N), with df the number of nonzero slopes. A perfect fit
/// (RSS = 0) gives -∞.
pub fn bic_linear(fit: &GlmFit, x: &DMatrix<f64>, y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let eta = fit.linear_predictor(x);
    let rss: f64 = y.iter().zip(&eta).map(|(a, b)| (a - b) * (a - b)).sum();
    let df = fit.coefficients.iter().filter(|&&c| c != 0.0).count() as f64;
    if rss <= 0.0 {
        log::warn!("zero residual sum of squares; BIC is -inf");
        return f64::NEG_INFINITY;
    }
    n * (rss / n).ln() + df * n.ln()
}

/// Minimum-BIC point of a weighted-L1 least-squares path of S on X.
/// Returns (λ, fit, BIC); ties keep the larger λ.
fn bic_path(ds: &Dataset, weights: &[f64], path: &PathOptions) -> Result<(f64, GlmFit, f64)> {
    let problem = GlmProblem::new(&ds.features, &ds.surrogate, LossKind::Linear, true)?;
    let fits = regularization_path(&problem, weights, path, &SolverConfig::default())?;
    let mut best: Option<(f64, GlmFit, f64)> = None;
    for (lambda, fit) in fits {
        let b = bic_linear(&fit, &ds.features, &ds.surrogate);
        if best.as_ref().is_none_or(|(_, _, bb)| b < *bb) {
            best = Some((lambda, fit, b));
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("empty regularization path".into()))
}

/// LASSO stage: returns (τ_init, α_init, μ_init, BIC).
pub fn fit_alpha_init(ds: &Dataset, path: &PathOptions) -> Result<(f64, Vec<f64>, f64, f64)> {
    if ds.n_obs() < 2 {
        return Err(Error::InvalidArgument("surrogate stage needs at least 2 rows".into()));
    }
    let weights = vec![1.0; ds.n_features()];
    let (mu, fit, bic) = bic_path(ds, &weights, path)?;
    Ok((fit.intercept, fit.coefficients, mu, bic))
}

/// Adaptive stage with weights |α_init,j|^-ν (infinite where α_init,j = 0).
pub fn fit_alpha_alasso(ds: &Dataset, alpha_init: &[f64], opts: &AlphaOptions) -> Result<AlphaFit> {
    if alpha_init.len() != ds.n_features() {
        return Err(Error::Dimension(format!(
            "alpha_init has {} entries for {} features",
            alpha_init.len(),
            ds.n_features()
        )));
    }
    let weights: Vec<f64> = alpha_init
        .iter()
        .map(|&a| if a == 0.0 { f64::INFINITY } else { a.abs().powf(-opts.nu) })
        .collect();
    let mut warnings = Vec::new();
    let (tau, alpha, mu, bic) = if weights.iter().all(|w| w.is_infinite()) {
        let msg = "initial surrogate fit is empty; direction estimate is zero".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
        let mean = ds.surrogate.iter().sum::<f64>() / ds.n_obs() as f64;
        let null = GlmFit {
            coefficients: vec![0.0; ds.n_features()],
            intercept: mean,
            has_intercept: true,
            loss_value: f64::NAN,
            objective: f64::NAN,
            n_iterations: 0,
            converged: true,
            kkt_max_violation: 0.0,
            eta_clamped: false,
            trace: Vec::new(),
        };
        let b = bic_linear(&null, &ds.features, &ds.surrogate);
        (mean, null.coefficients, 0.0, b)
    } else {
        let (mu, fit, bic) = bic_path(ds, &weights, &opts.path)?;
        (fit.intercept, fit.coefficients, mu, bic)
    };
    let support = support_of(&alpha);
    if support.is_empty() && warnings.is_empty() {
        let msg = "adaptive surrogate fit selected an empty support".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(AlphaFit {
        alpha,
        tau,
        alpha_init: alpha_init.to_vec(),
        tau_init: f64::NAN,
        support,
        mu_init: f64::NAN,
        mu,
        bic_init: f64::NAN,
        bic,
        nu: opts.nu,
        warnings,
    })
}

/// Both stages on all rows of `ds` (labels are ignored).
pub fn fit_alpha(ds: &Dataset, opts: &AlphaOptions) -> Result<AlphaFit> {
    let (tau_init, alpha_init, mu_init, bic_init) = fit_alpha_init(ds, &opts.path)?;
    let mut fit = fit_alpha_alasso(ds, &alpha_init, opts)?;
    fit.tau_init = tau_init;
    fit.mu_init = mu_init;
    fit.bic_init = bic_init;
    Ok(fit)
}

/// Ordinary least squares of y on (1, X); returns (intercept, slopes).
pub fn ols(x: &DMatrix<f64>, y: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Dimension("response length differs from row count".into()));
    }
    let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let gram = design.tr_mul(&design);
    let rhs = design.tr_mul(&DVector::from_column_slice(y));
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Degenerate("design is rank deficient".into()))?;
    let coef = chol.solve(&rhs);
    Ok((coef[0], coef.iter().skip(1).copied().collect()))
}

/// |cos| of the angle between two vectors; 0 when either is zero.
pub fn abs_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(x: DMatrix<f64>, s: Vec<f64>) -> Dataset {
        let names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        Dataset::new(x, s, None, names, None).unwrap()
    }

    fn noise(rng: &mut ChaCha8Rng) -> f64 {
        // sum of uniforms, mean 0, variance 1
        (0..12).map(|_| rng.random::<f64>()).sum::<f64>() - 6.0
    }

    #[test]
    fn bic_of_null_fit() {
        let x = DMatrix::from_fn(4, 1, |i, _| i as f64);
        let y = [1.0, -1.0, 1.0, -1.0];
        let fit = GlmFit {
            coefficients: vec![0.0],
            intercept: 0.0,
            has_intercept: true,
            loss_value: 0.0,
            objective: 0.0,
            n_iterations: 0,
            converged: true,
            kkt_max_violation: 0.0,
            eta_clamped: false,
            trace: vec![],
        };
        assert_eq!(bic_linear(&fit, &x, &y), 0.0);
        let mut one = fit.clone();
        one.coefficients = vec![1e-12];
        assert!((bic_linear(&one, &x, &y) - 4f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn zero_initial_fit_gives_empty_direction() {
        let x = DMatrix::from_fn(20, 3, |i, j| ((i * 7 + j * 3) % 5) as f64);
        let s: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ds = dataset(x, s);
        let fit = fit_alpha_alasso(&ds, &[0.0; 3], &AlphaOptions::default()).unwrap();
        assert!(fit.is_empty());
        assert_eq!(fit.alpha, vec![0.0; 3]);
        assert_eq!(fit.warnings.len(), 1);
    }

    #[test]
    fn recovers_single_strong_feature() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, p) = (2000, 5);
        let x = DMatrix::from_fn(n, p, |_, _| noise(&mut rng));
        let s: Vec<f64> = (0..n).map(|i| 2.0 * x[(i, 0)] + noise(&mut rng)).collect();
        let ds = dataset(x.clone(), s.clone());
        let fit = fit_alpha(&ds, &AlphaOptions::default()).unwrap();
        assert_eq!(fit.support, vec![0]);
        let (_, slope) = ols(&x.columns(0, 1).into_owned(), &s).unwrap();
        assert!((fit.alpha[0] - slope[0]).abs() < 0.05 * slope[0].abs());
        for j in 1..p {
            if fit.alpha_init[j] == 0.0 {
                assert_eq!(fit.alpha[j], 0.0);
            }
        }
    }

    #[test]
    fn ols_matches_exact_line() {
        let x = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let (b0, b) = ols(&x, &[1.0, 3.0, 5.0, 7.0]).unwrap();
        assert!((b0 - 1.0).abs() < 1e-12 && (b[0] - 2.0).abs() < 1e-12);
        assert!((abs_cosine(&[1.0, 0.0], &[-2.0, 0.0]) - 1.0).abs() < 1e-15);
    }
}
