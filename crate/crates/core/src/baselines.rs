//! Comparison estimators: supervised LASSO and adaptive LASSO, the two-step
//! SS^prior fit, prior LASSO (two pseudo-label variants), unsupervised LASSO
//! on extreme surrogate values, and its two-step refit SS^ULASSO.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabeledData};
use crate::error::{Error, Result};
use crate::eval::{cv_path, make_folds, refit_at, CvOptions, FoldAssignment};
use crate::solver::{fit_logistic_newton, sigmoid, GlmFit, SolverConfig};
use crate::surrogate::AlphaFit;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodTag {
    Lasso,
    Alasso,
    SsPrior,
    Plasso1,
    Plasso2,
    Ulasso,
    SsUlasso,
    Pass,
}

impl MethodTag {
    pub const ALL: [MethodTag; 8] = [
        MethodTag::Lasso,
        MethodTag::Alasso,
        MethodTag::SsPrior,
        MethodTag::Plasso1,
        MethodTag::Plasso2,
        MethodTag::Ulasso,
        MethodTag::SsUlasso,
        MethodTag::Pass,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodTag::Lasso => "lasso",
            MethodTag::Alasso => "alasso",
            MethodTag::SsPrior => "ss_prior",
            MethodTag::Plasso1 => "plasso1",
            MethodTag::Plasso2 => "plasso2",
            MethodTag::Ulasso => "ulasso",
            MethodTag::SsUlasso => "ss_ulasso",
            MethodTag::Pass => "pass",
        }
    }

    /// Whether the method uses the unlabeled rows.
    pub fn is_semi_supervised(self) -> bool {
        !matches!(self, MethodTag::Lasso | MethodTag::Alasso | MethodTag::Ulasso)
    }

    pub fn needs_alpha(self) -> bool {
        matches!(
            self,
            MethodTag::SsPrior | MethodTag::Plasso1 | MethodTag::Plasso2 | MethodTag::Pass
        )
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodTag::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

/// A fitted outcome model π(ζ + γS + xᵀβ); `gamma` is absent for models
/// that do not use S.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub zeta: f64,
    pub gamma: Option<f64>,
    pub beta: Vec<f64>,
    #[serde(rename = "method_tag")]
    pub method: MethodTag,
    /// Selected penalty level, for penalized fits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Coefficients {
    pub fn linear_predictor(&self, x: &DMatrix<f64>, s: &[f64]) -> Vec<f64> {
        let xb = x * DVector::from_column_slice(&self.beta);
        let g = self.gamma.unwrap_or(0.0);
        xb.iter().zip(s).map(|(v, si)| self.zeta + g * si + v).collect()
    }

    pub fn predict_prob(&self, s: f64, x: &[f64]) -> f64 {
        crate::pass::predict_prob(self.zeta, self.gamma.unwrap_or(0.0), &self.beta, s, x)
    }

    /// Coefficients from a fit on the design [S, X].
    fn from_s_x_fit(fit: &GlmFit, method: MethodTag, lambda: f64) -> Self {
        Coefficients {
            zeta: fit.intercept,
            gamma: Some(fit.coefficients[0]),
            beta: fit.coefficients[1..].to_vec(),
            method,
            lambda: Some(lambda),
            warnings: Vec::new(),
        }
    }
}

/// [S, X] with S first.
fn s_x_design(data: &LabeledData) -> DMatrix<f64> {
    let (n, p) = data.x.shape();
    let mut d = DMatrix::zeros(n, p + 1);
    d.column_mut(0).copy_from_slice(&data.s);
    d.columns_mut(1, p).copy_from(&data.x);
    d
}

fn check_labeled(data: &LabeledData, folds: &FoldAssignment) -> Result<()> {
    if folds.fold.len() != data.n() {
        return Err(Error::Dimension("fold assignment does not match labeled rows".into()));
    }
    if !data.has_both_classes() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// CV-tuned weighted-L1 logistic fit of `y_fit` on [S, X] scored against
/// `data.y`; `feature_weights` apply to X, S is unpenalized.
fn cv_fit_s_x(
    data: &LabeledData,
    y_fit: &[f64],
    feature_weights: &[f64],
    cv: &CvOptions,
    folds: &FoldAssignment,
    cfg: &SolverConfig,
) -> Result<(GlmFit, f64, f64)> {
    let design = s_x_design(data);
    let mut w = Vec::with_capacity(feature_weights.len() + 1);
    w.push(0.0);
    w.extend_from_slice(feature_weights);
    let path = cv_path(&design, y_fit, &data.y, &w, &cv.path, folds, cv.criterion, cfg)?;
    let k = path.best();
    let fit = refit_at(&design, y_fit, &w, &path.grid, k, cfg)?;
    Ok((fit, path.grid[k], path.scores[k]))
}

/// Logistic LASSO of Y on (1, S, X) with S unpenalized, λ by cross-validation.
pub fn fit_lasso_supervised(
    data: &LabeledData,
    cv: &CvOptions,
    folds: &FoldAssignment,
    cfg: &SolverConfig,
) -> Result<Coefficients> {
    check_labeled(data, folds)?;
    let (fit, lambda, _) = cv_fit_s_x(data, &data.y, &vec![1.0; data.p()], cv, folds, cfg)?;
    Ok(Coefficients::from_s_x_fit(&fit, MethodTag::Lasso, lambda))
}

/// Adaptive LASSO: a CV-tuned LASSO, then a CV-tuned refit with weights
/// |β_init|^-ν (features zeroed in the first stage stay zero).
pub fn fit_alasso_supervised(
    data: &LabeledData,
    nu: f64,
    cv: &CvOptions,
    folds: &FoldAssignment,
    cfg: &SolverConfig,
) -> Result<Coefficients> {
    let init = fit_lasso_supervised(data, cv, folds, cfg)?;
    alasso_from_initial(data, &init.beta, nu, cv, folds, cfg)
}

/// Second stage of [`fit_alasso_supervised`] from a given initial β.
pub fn alasso_from_initial(
    data: &LabeledData,
    beta_init: &[f64],
    nu: f64,
    cv: &CvOptions,
    folds: &FoldAssignment,
    cfg: &SolverConfig,
) -> Result<Coefficients> {
    check_labeled(data, folds)?;
    if beta_init.iter().all(|&b| b == 0.0) {
        let msg = "initial LASSO fit is empty; adaptive LASSO reduces to the intercept and S".to_string();
        log::warn!("{msg}");
        let s_only = DMatrix::from_column_slice(data.n(), 1, &data.s);
        let fit = fit_logistic_newton(&s_only, &data.y, cfg)?;
        return Ok(Coefficients {
            zeta: fit.intercept,
            gamma: Some(fit.coefficients[0]),
            beta: vec![0.0; data.p()],
            method: MethodTag::Alasso,
            lambda: None,
            warnings: vec![msg],
        });
    }
    let weights: Vec<f64> = beta_init
        .iter()
        .map(|&b| if b == 0.0 { f64::INFINITY } else { b.abs().powf(-nu) })
        .collect();
    let (fit, lambda, _) = cv_fit_s_x(data, &data.y, &weights, cv, folds, cfg)?;
    Ok(Coefficients::from_s_x_fit(&fit, MethodTag::Alasso, lambda))
}

/// Unpenalized logistic fit of Y on (1, S, Xᵀd); returns (ζ, γ, scale) with
/// β = scale · d.
fn two_step(data: &LabeledData, direction: &[f64], cfg: &SolverConfig) -> Result<(f64, f64, f64)> {
    if direction.len() != data.p() {
        return Err(Error::Dimension("direction length differs from feature count".into()));
    }
    let score = &data.x * DVector::from_column_slice(direction);
    let mut design = DMatrix::zeros(data.n(), 2);
    design.column_mut(0).copy_from_slice(&data.s);
    design.column_mut(1).copy_from(&score);
    let fit = fit_logistic_newton(&design, &data.y, cfg)?;
    Ok((fit.intercept, fit.coefficients[0], fit.coefficients[1]))
}

/// SS^prior: Y on (1, S, Xᵀα̂) without penalty, β = ρ̂α̂.
pub fn fit_ss_prior(data: &LabeledData, alpha: &AlphaFit, cfg: &SolverConfig) -> Result<Coefficients> {
    if alpha.is_empty() {
        return Err(Error::Degenerate("SS^prior is undefined for an empty surrogate direction".into()));
    }
    let (zeta, gamma, rho) = two_step(data, &alpha.alpha, cfg)?;
    Ok(Coefficients {
        zeta,
        gamma: Some(gamma),
        beta: alpha.alpha.iter().map(|a| rho * a).collect(),
        method: MethodTag::SsPrior,
        lambda: None,
        warnings: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlassoVariant {
    /// Pseudo-labels from a logistic fit leaving supp(α̂) unpenalized.
    Support = 1,
    /// Pseudo-labels from the SS^prior fit.
    SsPrior = 2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlassoOptions {
    /// Candidate weights of the pseudo-label likelihood.
    pub mixing_grid: Vec<f64>,
}

impl Default for PlassoOptions {
    fn default() -> Self {
        PlassoOptions {
            mixing_grid: vec![0.0, 0.25, 0.5, 1.0, 2.0],
        }
    }
}

/// Pseudo-label probabilities on the labeled rows.
pub fn plasso_pseudo_labels(
    data: &LabeledData,
    alpha: &AlphaFit,
    variant: PlassoVariant,
    cv: &CvOptions,
    folds: &FoldAssignment,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    let coefs = match variant {
        PlassoVariant::Support => {
            if alpha.support.len() >= data.n() {
                return Err(Error::Degenerate(format!(
                    "prior LASSO needs fewer than n = {} prior features, got {}",
                    data.n(),
                    alpha.support.len()
                )));
            }
            let w: Vec<f64> = alpha.alpha.iter().map(|&a| if a != 0.0 { 0.0 } else { 1.0 }).collect();
            let (fit, lambda, _) = cv_fit_s_x(data, &data.y, &w, cv, folds, cfg)?;
            Coefficients::from_s_x_fit(&fit, MethodTag::Plasso1, lambda)
        }
        PlassoVariant::SsPrior => fit_ss_prior(data, alpha, cfg)?,
    };
    Ok(coefs
        .linear_predictor(&data.x, &data.s)
        .into_iter()
        .map(sigmoid)
        .collect())
}

/// Prior LASSO. Minimizes (1/n)Σ[ℓ(Yᵢ, ηᵢ) + m·ℓ(Yᵖᵢ, ηᵢ)] + λ‖β‖₁ over
/// (ζ, γ, β). Since ℓ is linear in its label this equals (1+m) times the
/// ordinary LASSO objective on Ỹ = (Y + mYᵖ)/(1+m) with penalty λ/(1+m), which
/// is how it is solved. (m, λ) are chosen jointly by cross-validation against
/// the true labels; ties keep the earlier m in the grid.
pub fn fit_plasso(
    data: &LabeledData,
    alpha: &AlphaFit,
    variant: PlassoVariant,
    opts: &PlassoOptions,
    cv: &CvOptions,
    folds: &FoldAssignment,
    cfg: &SolverConfig,
) -> Result<Coefficients> {
    check_labeled(data, folds)?;
    if opts.mixing_grid.is_empty() || opts.mixing_grid.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
        return Err(Error::InvalidArgument("mixing grid must hold finite nonnegative values".into()));
    }
    let pseudo = plasso_pseudo_labels(data, alpha, variant, cv, folds, cfg)?;
    let ones = vec![1.0; data.p()];
    let mut best: Option<(f64, f64, GlmFit, f64)> = None;
    for &m in &opts.mixing_grid {
        let y_mix: Vec<f64> = data.y.iter().zip(&pseudo).map(|(y, q)| (y + m * q) / (1.0 + m)).collect();
        let (fit, lambda_scaled, score) = cv_fit_s_x(data, &y_mix, &ones, cv, folds, cfg)?;
        if best.as_ref().is_none_or(|(s, ..)| score < *s) {
            best = Some((score, m, fit, lambda_scaled * (1.0 + m)));
        }
    }
    let (_, _, fit, lambda) = best.expect("nonempty mixing grid");
    let tag = match variant {
        PlassoVariant::Support => MethodTag::Plasso1,
        PlassoVariant::SsPrior => MethodTag::Plasso2,
    };
    Ok(Coefficients::from_s_x_fit(&fit, tag, lambda))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UlassoOptions {
    pub q_upper: f64,
    pub q_lower: f64,
}

impl Default for UlassoOptions {
    fn default() -> Self {
        UlassoOptions {
            q_upper: 0.9,
            q_lower: 0.1,
        }
    }
}

/// Sample quantile with linear interpolation between order statistics
/// (h = (n-1)q).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Unsupervised LASSO: logistic LASSO of I(S > c_u) on X over the rows with
/// S > c_u or S < c_l, where the cutoffs are quantiles of S over all rows.
/// Never reads the labels. The returned model has no S term.
pub fn fit_ulasso(
    ds: &Dataset,
    opts: &UlassoOptions,
    cv: &CvOptions,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<Coefficients> {
    let c_u = quantile(&ds.surrogate, opts.q_upper);
    let c_l = quantile(&ds.surrogate, opts.q_lower);
    if c_u <= c_l {
        return Err(Error::Degenerate(format!(
            "surrogate cutoffs do not separate: upper {c_u} <= lower {c_l}"
        )));
    }
    let rows: Vec<usize> = (0..ds.n_obs())
        .filter(|&i| ds.surrogate[i] > c_u || ds.surrogate[i] < c_l)
        .collect();
    let y: Vec<f64> = rows.iter().map(|&i| f64::from(u8::from(ds.surrogate[i] > c_u))).collect();
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == y.len() {
        return Err(Error::Degenerate("extreme-surrogate subset has a single class".into()));
    }
    let x = ds.features.select_rows(&rows);
    let folds = make_folds(&y, cv.n_folds, seed, true)?;
    let w = vec![1.0; ds.n_features()];
    let path = cv_path(&x, &y, &y, &w, &cv.path, &folds, cv.criterion, cfg)?;
    let k = path.best();
    let fit = refit_at(&x, &y, &w, &path.grid, k, cfg)?;
    Ok(Coefficients {
        zeta: fit.intercept,
        gamma: None,
        beta: fit.coefficients,
        method: MethodTag::Ulasso,
        lambda: Some(path.grid[k]),
        warnings: Vec::new(),
    })
}

/// SS^ULASSO: Y on (1, S, Xᵀβ̃) without penalty, β = scale · β̃.
pub fn fit_ss_ulasso(data: &LabeledData, ulasso_beta: &[f64], cfg: &SolverConfig) -> Result<Coefficients> {
    if ulasso_beta.iter().all(|&b| b == 0.0) {
        return Err(Error::Degenerate("SS^ULASSO is undefined for a zero ULASSO direction".into()));
    }
    let (zeta, gamma, scale) = two_step(data, ulasso_beta, cfg)?;
    Ok(Coefficients {
        zeta,
        gamma: Some(gamma),
        beta: ulasso_beta.iter().map(|b| scale * b).collect(),
        method: MethodTag::SsUlasso,
        lambda: None,
        warnings: Vec::new(),
    })
}
