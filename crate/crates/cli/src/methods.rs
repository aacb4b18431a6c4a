//! Fits the configured estimators on one training draw.

use passreg::baselines::{
    fit_alasso_supervised, fit_lasso_supervised, fit_plasso, fit_ss_prior, fit_ss_ulasso, fit_ulasso, Coefficients,
    MethodTag, PlassoVariant,
};
use passreg::data::{Dataset, LabeledData};
use passreg::eval::FoldAssignment;
use passreg::pass::{tune_pass_with_folds, PassFit};
use passreg::surrogate::{fit_alpha, AlphaFit};
use passreg::{Error, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

/// A fitted model as written to disk: PASS keeps its full diagnostics.
#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum FittedModel {
    Pass(Box<PassFit>),
    Other(Coefficients),
}

impl FittedModel {
    pub fn coefficients(&self) -> Coefficients {
        match self {
            FittedModel::Pass(f) => f.to_coefficients(),
            FittedModel::Other(c) => c.clone(),
        }
    }
}

/// Everything one round of fits shares. `folds` is the single fold assignment
/// every cross-validated method uses, which makes comparisons paired.
pub struct FitContext<'a> {
    pub cfg: &'a ExperimentConfig,
    pub train: &'a Dataset,
    pub labeled: &'a LabeledData,
    pub alpha: Option<&'a AlphaFit>,
    pub folds: &'a FoldAssignment,
    /// Seed for the folds ULASSO draws on its own pseudo-labeled subset.
    pub seed: u64,
}

/// Whether `train` has rows without labels.
pub fn has_unlabeled(train: &Dataset) -> bool {
    train.n_labeled() < train.n_obs()
}

/// Rejects methods that need rows the data does not have.
pub fn check_method_data(method: MethodTag, train: &Dataset) -> Result<()> {
    let needs_unlabeled = method.is_semi_supervised() || method == MethodTag::Ulasso;
    if needs_unlabeled && !has_unlabeled(train) {
        return Err(Error::InvalidArgument(format!(
            "method {method} needs unlabeled rows but every training row is labeled"
        )));
    }
    Ok(())
}

pub fn needs_alpha(methods: &[MethodTag]) -> bool {
    methods.iter().any(|m| m.needs_alpha())
}

pub fn estimate_alpha(cfg: &ExperimentConfig, train: &Dataset) -> Result<AlphaFit> {
    fit_alpha(train, &cfg.alpha)
}

/// Fits each method in order. A failure is returned for that method only.
pub fn fit_methods(methods: &[MethodTag], ctx: &FitContext) -> Vec<(MethodTag, Result<FittedModel>)> {
    let mut ulasso: Option<Result<Coefficients>> = None;
    let mut out = Vec::with_capacity(methods.len());
    for &m in methods {
        let res = check_method_data(m, ctx.train).and_then(|()| fit_one(m, ctx, &mut ulasso));
        out.push((m, res));
    }
    out
}

fn alpha_for<'a>(ctx: &FitContext<'a>, m: MethodTag) -> Result<&'a AlphaFit> {
    ctx.alpha
        .ok_or_else(|| Error::InvalidArgument(format!("method {m} needs a surrogate direction")))
}

fn fit_one(m: MethodTag, ctx: &FitContext, ulasso: &mut Option<Result<Coefficients>>) -> Result<FittedModel> {
    let cfg = ctx.cfg;
    let solver = &cfg.solver;
    let model = match m {
        MethodTag::Lasso => FittedModel::Other(fit_lasso_supervised(ctx.labeled, &cfg.cv, ctx.folds, solver)?),
        MethodTag::Alasso => FittedModel::Other(fit_alasso_supervised(
            ctx.labeled,
            cfg.alasso_nu,
            &cfg.cv,
            ctx.folds,
            solver,
        )?),
        MethodTag::SsPrior => FittedModel::Other(fit_ss_prior(ctx.labeled, alpha_for(ctx, m)?, solver)?),
        MethodTag::Plasso1 | MethodTag::Plasso2 => {
            let variant = if m == MethodTag::Plasso1 {
                PlassoVariant::Support
            } else {
                PlassoVariant::SsPrior
            };
            FittedModel::Other(fit_plasso(
                ctx.labeled,
                alpha_for(ctx, m)?,
                variant,
                &cfg.plasso,
                &cfg.cv,
                ctx.folds,
                solver,
            )?)
        }
        MethodTag::Ulasso => FittedModel::Other(ulasso_fit(ctx, ulasso)?),
        MethodTag::SsUlasso => {
            let u = ulasso_fit(ctx, ulasso)?;
            FittedModel::Other(fit_ss_ulasso(ctx.labeled, &u.beta, solver)?)
        }
        MethodTag::Pass => FittedModel::Pass(Box::new(tune_pass_with_folds(
            ctx.labeled,
            alpha_for(ctx, m)?,
            &cfg.pass,
            ctx.folds,
            solver,
        )?)),
    };
    Ok(model)
}

fn ulasso_fit(ctx: &FitContext, memo: &mut Option<Result<Coefficients>>) -> Result<Coefficients> {
    memo.get_or_insert_with(|| fit_ulasso(ctx.train, &ctx.cfg.ulasso, &ctx.cfg.cv, ctx.seed, &ctx.cfg.solver))
        .as_ref()
        .map(Clone::clone)
        .map_err(|e| Error::Degenerate(format!("ULASSO stage failed: {e}")))
}
