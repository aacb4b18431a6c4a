//! The PASS estimator.
//!
//! The outcome model is fitted on the labeled rows with design
//! `[S, Xα̂, X]` and coefficients `(γ, ρ, δ)`, so that `β = δ + ρα̂`. The
//! penalty is `λ₁ Σ_{j∈Â} |δⱼ| + κλ₁ Σ_{j∉Â} |δⱼ|` where `Â = supp(α̂)`; the
//! intercept, γ and ρ are free. A large λ₁ forces β onto the direction of α̂,
//! a small one leaves β unconstrained.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::baselines::{Coefficients, MethodTag};
use crate::data::LabeledData;
use crate::error::{Error, Result};
use crate::eval::{cv_linear_predictors, make_folds, CvCriterion, FoldAssignment};
use crate::solver::{geometric_grid, logistic_loss, GlmFit, GlmProblem, LossKind, PathOptions, SolverConfig};
use crate::surrogate::AlphaFit;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PassDiagnostics {
    pub objective: f64,
    pub kkt_max_violation: f64,
    pub converged: bool,
    pub eta_clamped: bool,
    /// True when α̂ was empty and the fit fell back to the supervised LASSO.
    pub supervised_fallback: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv_score: Option<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassFit {
    pub zeta: f64,
    pub gamma: f64,
    pub rho: f64,
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
    /// The α̂ the fit was built on.
    pub alpha: Vec<f64>,
    pub lambda1: f64,
    pub kappa: f64,
    pub diagnostics: PassDiagnostics,
}

impl PassFit {
    pub fn to_coefficients(&self) -> Coefficients {
        Coefficients {
            zeta: self.zeta,
            gamma: Some(self.gamma),
            beta: self.beta.clone(),
            method: MethodTag::Pass,
            lambda: Some(self.lambda1),
            warnings: self.diagnostics.warnings.clone(),
        }
    }

    pub fn predict_prob(&self, s: f64, x: &[f64]) -> f64 {
        predict_prob(self.zeta, self.gamma, &self.beta, s, x)
    }
}

/// π(ζ + γs + xᵀβ).
pub fn predict_prob(zeta: f64, gamma: f64, beta: &[f64], s: f64, x: &[f64]) -> f64 {
    let eta = zeta + gamma * s + x.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
    crate::solver::sigmoid(eta)
}

/// The n x (p+2) matrix with columns S, Xα̂, then the columns of X.
pub fn build_augmented_design(x: &DMatrix<f64>, s: &[f64], alpha: &[f64]) -> Result<DMatrix<f64>> {
    let (n, p) = x.shape();
    if alpha.len() != p {
        return Err(Error::Dimension(format!("alpha has {} entries for {p} features", alpha.len())));
    }
    if s.len() != n {
        return Err(Error::Dimension(format!("surrogate has {} entries for {n} rows", s.len())));
    }
    let mut design = DMatrix::zeros(n, p + 2);
    design.column_mut(0).copy_from_slice(s);
    let prior = x * nalgebra::DVector::from_column_slice(alpha);
    design.column_mut(1).copy_from(&prior);
    design.columns_mut(2, p).copy_from(x);
    Ok(design)
}

/// The design actually handed to the solver and its penalty weights. With an
/// empty α̂ the prior column is dropped and every feature gets weight κ.
fn problem_layout(data: &LabeledData, alpha: &AlphaFit, kappa: f64) -> Result<(DMatrix<f64>, Vec<f64>, bool)> {
    let p = data.p();
    if alpha.alpha.len() != p {
        return Err(Error::Dimension(format!(
            "alpha has {} entries for {p} features",
            alpha.alpha.len()
        )));
    }
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidArgument(format!("kappa must be positive, got {kappa}")));
    }
    if alpha.is_empty() {
        let mut design = DMatrix::zeros(data.n(), p + 1);
        design.column_mut(0).copy_from_slice(&data.s);
        design.columns_mut(1, p).copy_from(&data.x);
        let mut w = vec![kappa; p + 1];
        w[0] = 0.0;
        return Ok((design, w, true));
    }
    let design = build_augmented_design(&data.x, &data.s, &alpha.alpha)?;
    Ok((design, pass_weights(&alpha.alpha, kappa), false))
}

/// Weights over [γ, ρ, δ₁..δ_p]: 0, 0, then 1 on supp(α̂) and κ elsewhere.
pub fn pass_weights(alpha: &[f64], kappa: f64) -> Vec<f64> {
    let mut w = Vec::with_capacity(alpha.len() + 2);
    w.extend([0.0, 0.0]);
    w.extend(alpha.iter().map(|&a| if a != 0.0 { 1.0 } else { kappa }));
    w
}

const FALLBACK_WARNING: &str = "surrogate direction is empty; PASS reduces to the supervised LASSO";

fn assemble(fit: &GlmFit, alpha: &AlphaFit, lambda1: f64, kappa: f64, fallback: bool) -> PassFit {
    let (gamma, rho, delta) = if fallback {
        (fit.coefficients[0], 0.0, fit.coefficients[1..].to_vec())
    } else {
        (fit.coefficients[0], fit.coefficients[1], fit.coefficients[2..].to_vec())
    };
    let beta = delta.iter().zip(&alpha.alpha).map(|(d, a)| d + rho * a).collect();
    let mut warnings = alpha.warnings.clone();
    if fallback {
        warnings.push(FALLBACK_WARNING.to_string());
    }
    PassFit {
        zeta: fit.intercept,
        gamma,
        rho,
        beta,
        delta,
        alpha: alpha.alpha.clone(),
        lambda1,
        kappa,
        diagnostics: PassDiagnostics {
            objective: fit.objective,
            kkt_max_violation: fit.kkt_max_violation,
            converged: fit.converged,
            eta_clamped: fit.eta_clamped,
            supervised_fallback: fallback,
            cv_score: None,
            warnings,
        },
    }
}

/// PASS at a single (λ₁, κ).
pub fn fit_pass(data: &LabeledData, alpha: &AlphaFit, lambda1: f64, kappa: f64, cfg: &SolverConfig) -> Result<PassFit> {
    let (design, weights, fallback) = problem_layout(data, alpha, kappa)?;
    if fallback {
        log::warn!("{FALLBACK_WARNING}");
    }
    let problem = GlmProblem::new(&design, &data.y, LossKind::Logistic, true)?;
    let penalty = crate::solver::PenaltySpec::new(lambda1, weights)?;
    let fit = problem.fit(&penalty, cfg, None)?;
    Ok(assemble(&fit, alpha, lambda1, kappa, fallback))
}

/// PASS along a λ₁ grid (in the given order, warm-started) at fixed κ.
pub fn fit_pass_path(
    data: &LabeledData,
    alpha: &AlphaFit,
    kappa: f64,
    lambda1_grid: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<PassFit>> {
    let (design, weights, fallback) = problem_layout(data, alpha, kappa)?;
    let problem = GlmProblem::new(&design, &data.y, LossKind::Logistic, true)?;
    let fits = problem.fit_grid(&weights, lambda1_grid, cfg)?;
    Ok(fits
        .iter()
        .zip(lambda1_grid)
        .map(|(f, &l)| assemble(f, alpha, l, kappa, fallback))
        .collect())
}

/// The PASS objective written directly in (ζ, γ, ρ, β):
/// (1/n)Σℓ(Y, ζ + γS + Xβ) + λ₁‖(β - ρα̂)_Â‖₁ + κλ₁‖β_Âᶜ‖₁,
/// with the linear predictor clamped to ±`eta_cap` like the solver's loss.
#[allow(clippy::too_many_arguments)]
pub fn direct_objective(
    data: &LabeledData,
    alpha: &[f64],
    lambda1: f64,
    kappa: f64,
    zeta: f64,
    gamma: f64,
    rho: f64,
    beta: &[f64],
    eta_cap: f64,
) -> f64 {
    let n = data.n();
    let mut loss = 0.0;
    for i in 0..n {
        let xb: f64 = (0..data.p()).map(|j| data.x[(i, j)] * beta[j]).sum();
        let eta = (zeta + gamma * data.s[i] + xb).clamp(-eta_cap, eta_cap);
        loss += logistic_loss(data.y[i], eta);
    }
    let penalty: f64 = alpha
        .iter()
        .zip(beta)
        .map(|(&a, &b)| if a != 0.0 { (b - rho * a).abs() } else { kappa * b.abs() })
        .sum();
    loss / n as f64 + lambda1 * penalty
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PassTuning {
    pub kappa_grid: Vec<f64>,
    /// λ₁ grid per κ, anchored at that κ's λ_max on the full labeled data.
    pub path: PathOptions,
    /// Explicit λ₁ grid, used for every κ instead of `path` when set.
    pub lambda1_grid: Option<Vec<f64>>,
    pub criterion: CvCriterion,
}

impl Default for PassTuning {
    fn default() -> Self {
        PassTuning {
            kappa_grid: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            path: PathOptions {
                n_lambda: 30,
                lambda_min_ratio: 1e-2,
            },
            lambda1_grid: None,
            criterion: CvCriterion::Deviance,
        }
    }
}

/// Cross-validated PASS with `n_folds` stratified folds drawn from `seed`.
pub fn tune_pass(
    data: &LabeledData,
    alpha: &AlphaFit,
    tuning: &PassTuning,
    n_folds: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<PassFit> {
    let folds = make_folds(&data.y, n_folds, seed, true)?;
    tune_pass_with_folds(data, alpha, tuning, &folds, cfg)
}

/// Cross-validated PASS on a given fold assignment. Selects the (λ₁, κ) with
/// the best pooled out-of-fold score (ties: smallest λ₁, then smallest κ) and
/// refits on all labeled rows.
pub fn tune_pass_with_folds(
    data: &LabeledData,
    alpha: &AlphaFit,
    tuning: &PassTuning,
    folds: &FoldAssignment,
    cfg: &SolverConfig,
) -> Result<PassFit> {
    if tuning.kappa_grid.is_empty() {
        return Err(Error::InvalidArgument("empty kappa grid".into()));
    }
    if data.n() < 2 * folds.n_folds {
        return Err(Error::InvalidArgument(format!(
            "{} labeled rows are too few for {}-fold cross-validation",
            data.n(),
            folds.n_folds
        )));
    }
    // (score, λ₁, κ, grid, index in grid)
    let mut best: Option<(f64, f64, f64, Vec<f64>, usize)> = None;
    for &kappa in &tuning.kappa_grid {
        let (design, weights, _) = problem_layout(data, alpha, kappa)?;
        let grid = match &tuning.lambda1_grid {
            Some(g) if g.is_empty() => return Err(Error::InvalidArgument("empty lambda1 grid".into())),
            Some(g) => {
                let mut g = g.clone();
                g.sort_by(|a, b| b.total_cmp(a));
                g
            }
            None => {
                let problem = GlmProblem::new(&design, &data.y, LossKind::Logistic, true)?;
                let (lmax, _) = problem.lambda_max(&weights, cfg)?;
                if lmax > 0.0 {
                    geometric_grid(lmax, tuning.path.n_lambda, tuning.path.lambda_min_ratio)
                } else {
                    vec![0.0]
                }
            }
        };
        let preds = cv_linear_predictors(&design, &data.y, &weights, &grid, folds, cfg)?;
        for (k, eta) in preds.iter().enumerate() {
            let score = tuning.criterion.score(eta, &data.y);
            let better = match &best {
                None => true,
                Some((bs, bl, bk, _, _)) => {
                    score < *bs || (score == *bs && (grid[k] < *bl || (grid[k] == *bl && kappa < *bk)))
                }
            };
            if better {
                best = Some((score, grid[k], kappa, grid.clone(), k));
            }
        }
    }
    let (score, _, kappa, grid, index) = best.expect("nonempty grids");
    let mut fits = fit_pass_path(data, alpha, kappa, &grid[..=index], cfg)?;
    let mut fit = fits.pop().expect("grid prefix is nonempty");
    fit.diagnostics.cv_score = Some(score);
    if fit.diagnostics.supervised_fallback {
        log::warn!("{FALLBACK_WARNING}");
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> LabeledData {
        let x = DMatrix::from_row_slice(6, 2, &[1.0, 0.5, -1.0, 2.0, 0.3, -0.7, 2.0, 1.0, -0.5, -1.5, 0.8, 0.1]);
        LabeledData::new(x, vec![1.0, 2.0, 0.5, 3.0, 0.0, 1.5], vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn augmented_design_columns() {
        let d = toy();
        let a = build_augmented_design(&d.x, &d.s, &[1.0, -1.0]).unwrap();
        assert_eq!(a.shape(), (6, 4));
        for i in 0..6 {
            assert_eq!(a[(i, 0)], d.s[i]);
            assert_eq!(a[(i, 1)], d.x[(i, 0)] - d.x[(i, 1)]);
            assert_eq!(a[(i, 3)], d.x[(i, 1)]);
        }
        let zero = build_augmented_design(&d.x, &d.s, &[0.0, 0.0]).unwrap();
        assert!(zero.column(1).iter().all(|&v| v == 0.0));
        let unit = build_augmented_design(&d.x, &d.s, &[1.0, 0.0]).unwrap();
        assert_eq!(unit.column(1), d.x.column(0));
        assert!(build_augmented_design(&d.x, &d.s, &[1.0]).is_err());
    }

    #[test]
    fn weights_layout() {
        assert_eq!(pass_weights(&[0.3, 0.0, -1.0], 2.0), vec![0.0, 0.0, 1.0, 2.0, 1.0]);
    }

    #[test]
    fn predict_prob_examples() {
        assert_eq!(predict_prob(0.0, 0.0, &[0.0, 0.0], 3.0, &[1.0, 2.0]), 0.5);
        assert_eq!(predict_prob(-4.0, 0.5, &[0.0], 8.0, &[5.0]), 0.5);
        let p = predict_prob(1.0, 2.0, &[1.0, -1.0], 0.5, &[1.0, 1.0]);
        assert!((p - 0.8807970779778823).abs() < 1e-15);
    }

    #[test]
    fn large_lambda_gives_prior_direction() {
        let d = toy();
        let alpha = AlphaFit::from_direction(vec![0.7, -0.2]);
        let fit = fit_pass(&d, &alpha, 1e4, 1.0, &SolverConfig::default()).unwrap();
        assert_eq!(fit.delta, vec![0.0, 0.0]);
        assert_eq!(fit.beta, vec![fit.rho * 0.7, fit.rho * -0.2]);
    }

    #[test]
    fn empty_prior_falls_back() {
        let d = toy();
        let alpha = AlphaFit::from_direction(vec![0.0, 0.0]);
        let fit = fit_pass(&d, &alpha, 0.05, 2.0, &SolverConfig::default()).unwrap();
        assert!(fit.diagnostics.supervised_fallback);
        assert_eq!(fit.rho, 0.0);
        assert!(fit.diagnostics.warnings.iter().any(|w| w.contains("supervised")));
    }
}
