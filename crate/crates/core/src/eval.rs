//! Prediction metrics, fold assignment and Monte-Carlo aggregation.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::Coefficients;
use crate::data::LabeledData;
use crate::error::{Error, Result};
use crate::simgen::TruthOracle;
use crate::solver::{
    geometric_grid, logistic_loss, sigmoid, GlmFit, GlmProblem, LossKind, PathOptions, SolverConfig,
};

/// Area under the ROC curve: the probability that a random positive scores
/// above a random negative, ties counted 1/2. Mid-rank Mann-Whitney form.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores"));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Ranks are doubled so tied mid-ranks stay integral.
    let mut pos_rank_sum2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1, doubled mid-rank = i + j + 2
        let mid2 = (i + j + 2) as u64;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k] == 1.0).count() as u64;
        pos_rank_sum2 += mid2 * pos_in_group;
        i = j + 1;
    }
    let (p, q) = (n_pos as u64, n_neg as u64);
    let u2 = pos_rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * q) as f64)
}

fn predictions(fit: &Coefficients, data: &LabeledData) -> Result<Vec<f64>> {
    if data.p() != fit.beta.len() {
        return Err(Error::Dimension(format!(
            "model has {} features, data has {}",
            fit.beta.len(),
            data.p()
        )));
    }
    Ok(fit.linear_predictor(&data.x, &data.s))
}

fn truth_predictor(oracle: &TruthOracle, data: &LabeledData) -> Result<Vec<f64>> {
    (0..data.n())
        .map(|i| {
            let x: Vec<f64> = data.x.row(i).iter().copied().collect();
            oracle.true_linear_predictor(data.s[i], &x)
        })
        .collect()
}

/// Mean over test rows of ℓ(Y, η̂) - ℓ(Y, η₀).
pub fn excess_risk(fit: &Coefficients, test: &LabeledData, oracle: &TruthOracle) -> Result<f64> {
    let eta_hat = predictions(fit, test)?;
    let eta0 = truth_predictor(oracle, test)?;
    Ok(excess_risk_from_predictors(&test.y, &eta_hat, &eta0))
}

pub fn excess_risk_from_predictors(y: &[f64], eta_hat: &[f64], eta0: &[f64]) -> f64 {
    let total: f64 = y
        .iter()
        .zip(eta_hat.iter().zip(eta0))
        .map(|(&y, (&a, &b))| logistic_loss(y, a) - logistic_loss(y, b))
        .sum();
    total / y.len() as f64
}

/// Mean of (π(η̂) - π(η₀))² over test rows.
pub fn mse_p(fit: &Coefficients, test: &LabeledData, oracle: &TruthOracle) -> Result<f64> {
    let eta_hat = predictions(fit, test)?;
    let eta0 = truth_predictor(oracle, test)?;
    let p_hat: Vec<f64> = eta_hat.iter().map(|&e| sigmoid(e)).collect();
    let p0: Vec<f64> = eta0.iter().map(|&e| sigmoid(e)).collect();
    Ok(mse_between(&p_hat, &p0))
}

pub fn mse_between(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Brier skill score 1 - E[(Y - p)²] / E[(Y - Ȳ)²] on a validation sample.
pub fn bss(fit: &Coefficients, validation: &LabeledData) -> Result<f64> {
    let eta = predictions(fit, validation)?;
    let probs: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
    bss_from_probabilities(&probs, &validation.y)
}

pub fn bss_from_probabilities(probs: &[f64], y: &[f64]) -> Result<f64> {
    if probs.len() != y.len() {
        return Err(Error::Dimension("probabilities and labels differ in length".into()));
    }
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let denom: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    if denom == 0.0 {
        return Err(Error::SingleClass);
    }
    let num: f64 = y.iter().zip(probs).map(|(v, p)| (v - p) * (v - p)).sum();
    Ok(1.0 - num / denom)
}

/// Metrics of one fitted model on one evaluation sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub er: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mse_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bss: Option<f64>,
    pub n_eval: usize,
}

impl MetricsReport {
    /// (name, value) for every metric that is present, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        [("auc", self.auc), ("er", self.er), ("mse_p", self.mse_p), ("bss", self.bss)]
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k, v)))
            .collect()
    }
}

/// AUC always (when both classes are present), BSS likewise, ER and MSE-P when
/// a truth oracle is supplied.
pub fn evaluate(fit: &Coefficients, test: &LabeledData, oracle: Option<&TruthOracle>) -> Result<MetricsReport> {
    let eta = predictions(fit, test)?;
    let both = test.has_both_classes();
    let auc_v = if both { Some(auc(&eta, &test.y)?) } else { None };
    let bss_v = if both {
        let probs: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        Some(bss_from_probabilities(&probs, &test.y)?)
    } else {
        None
    };
    let (er, mse) = match oracle {
        Some(o) => {
            let eta0 = truth_predictor(o, test)?;
            let p_hat: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
            let p0: Vec<f64> = eta0.iter().map(|&e| sigmoid(e)).collect();
            (
                Some(excess_risk_from_predictors(&test.y, &eta, &eta0)),
                Some(mse_between(&p_hat, &p0)),
            )
        }
        None => (None, None),
    };
    Ok(MetricsReport {
        auc: auc_v,
        er,
        mse_p: mse,
        bss: bss_v,
        n_eval: test.n(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    /// Standard error of the mean (sample sd with divisor R-1, over √R);
    /// `None` for a single replicate.
    pub se: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub n_replicates: usize,
    pub auc: Option<MeanSe>,
    pub er: Option<MeanSe>,
    pub mse_p: Option<MeanSe>,
    pub bss: Option<MeanSe>,
    pub replicates: Vec<MetricsReport>,
}

pub fn mean_se(values: &[f64]) -> MeanSe {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    let se = (values.len() > 1).then(|| {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1.0);
        (var / r).sqrt()
    });
    MeanSe { mean, se }
}

/// Per-metric mean and standard error across replicates.
pub fn aggregate_replicates(reports: &[MetricsReport]) -> Result<MetricsSummary> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidArgument("no replicates to aggregate".into()))?;
    let shape = |r: &MetricsReport| (r.auc.is_some(), r.er.is_some(), r.mse_p.is_some(), r.bss.is_some());
    if reports.iter().any(|r| shape(r) != shape(first)) {
        return Err(Error::InvalidArgument("replicates report different metric sets".into()));
    }
    let collect = |get: fn(&MetricsReport) -> Option<f64>| -> Option<MeanSe> {
        get(first)?;
        let v: Vec<f64> = reports.iter().filter_map(get).collect();
        Some(mean_se(&v))
    };
    Ok(MetricsSummary {
        n_replicates: reports.len(),
        auc: collect(|r| r.auc),
        er: collect(|r| r.er),
        mse_p: collect(|r| r.mse_p),
        bss: collect(|r| r.bss),
        replicates: reports.to_vec(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    /// Fold index of each labeled row.
    pub fold: Vec<usize>,
    pub n_folds: usize,
    pub seed: u64,
    pub stratified: bool,
}

impl FoldAssignment {
    /// (training rows, held-out rows) for fold `k`.
    pub fn split(&self, k: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.fold.iter().enumerate() {
            if f == k {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

/// Seeded partition of the labeled rows into `n_folds` folds. Stratified
/// assignment deals each class (shuffled) round-robin across folds, continuing
/// the rotation from one class to the next so fold sizes differ by at most one.
pub fn make_folds(labels: &[f64], n_folds: usize, seed: u64, stratified: bool) -> Result<FoldAssignment> {
    if n_folds < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    if labels.len() < n_folds {
        return Err(Error::InvalidArgument(format!(
            "{} rows cannot fill {n_folds} folds",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ones: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1.0).collect();
    let zeros: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 1.0).collect();
    let mut stratified = stratified;
    if stratified && (ones.len() < n_folds || zeros.len() < n_folds) {
        log::warn!(
            "class sizes ({}, {}) below {n_folds} folds; falling back to unstratified folds",
            zeros.len(),
            ones.len()
        );
        stratified = false;
    }
    let groups: Vec<Vec<usize>> = if stratified {
        vec![zeros, ones]
    } else {
        vec![(0..labels.len()).collect()]
    };
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for mut g in groups {
        g.shuffle(&mut rng);
        for i in g {
            fold[i] = next % n_folds;
            next += 1;
        }
    }
    Ok(FoldAssignment {
        fold,
        n_folds,
        seed,
        stratified,
    })
}

/// Model-selection score for cross-validation; lower is better.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvCriterion {
    /// Mean binomial deviance (1/n)Σℓ of the pooled out-of-fold predictions.
    #[default]
    Deviance,
    /// Negated AUC of the pooled out-of-fold predictions.
    Auc,
}

impl CvCriterion {
    pub fn score(self, eta: &[f64], y: &[f64]) -> f64 {
        match self {
            CvCriterion::Deviance => {
                y.iter().zip(eta).map(|(&y, &e)| logistic_loss(y, e)).sum::<f64>() / y.len() as f64
            }
            CvCriterion::Auc => auc(eta, y).map_or(f64::INFINITY, |a| -a),
        }
    }
}

/// Out-of-fold linear predictors of a weighted-L1 logistic fit for every λ in
/// `grid`, pooled over folds: entry `[k][i]` is the prediction for row `i` from
/// the fit at `grid[k]` that did not see row `i`. `y_fit` may hold fractional
/// responses.
pub fn cv_linear_predictors(
    x: &DMatrix<f64>,
    y_fit: &[f64],
    weights: &[f64],
    grid: &[f64],
    folds: &FoldAssignment,
    cfg: &SolverConfig,
) -> Result<Vec<Vec<f64>>> {
    if folds.fold.len() != x.nrows() {
        return Err(Error::Dimension("fold assignment length differs from row count".into()));
    }
    let cfg = cfg.for_selection();
    let mut out = vec![vec![0.0; x.nrows()]; grid.len()];
    for k in 0..folds.n_folds {
        let (train, test) = folds.split(k);
        if test.is_empty() {
            continue;
        }
        let xt = x.select_rows(&train);
        let yt: Vec<f64> = train.iter().map(|&i| y_fit[i]).collect();
        let xv = x.select_rows(&test);
        let problem = GlmProblem::new(&xt, &yt, LossKind::Logistic, true)?;
        let fits = problem.fit_grid(weights, grid, &cfg)?;
        for (g, fit) in fits.iter().enumerate() {
            let eta = fit.linear_predictor(&xv);
            for (&row, e) in test.iter().zip(eta) {
                out[g][row] = e;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvOptions {
    pub n_folds: usize,
    /// λ grid: `n_lambda` geometric points from the full-data λ_max down to
    /// `lambda_min_ratio · λ_max`.
    pub path: PathOptions,
    pub criterion: CvCriterion,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            n_folds: 10,
            path: PathOptions {
                n_lambda: 50,
                lambda_min_ratio: 1e-2,
            },
            criterion: CvCriterion::Deviance,
        }
    }
}

/// Cross-validation scores along a λ grid for one weight vector.
#[derive(Clone, Debug, PartialEq)]
pub struct CvPath {
    pub grid: Vec<f64>,
    pub scores: Vec<f64>,
}

impl CvPath {
    /// Index of the best score; ties go to the smallest λ.
    pub fn best(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.scores.iter().enumerate() {
            let b = self.scores[best];
            if v < b || (v == b && self.grid[k] < self.grid[best]) {
                best = k;
            }
        }
        best
    }
}

/// Builds the λ grid on the full data (fitting `y_fit`), then scores pooled
/// out-of-fold predictions against `y_eval` at every grid point.
#[allow(clippy::too_many_arguments)]
pub fn cv_path(
    x: &DMatrix<f64>,
    y_fit: &[f64],
    y_eval: &[f64],
    weights: &[f64],
    path: &PathOptions,
    folds: &FoldAssignment,
    criterion: CvCriterion,
    cfg: &SolverConfig,
) -> Result<CvPath> {
    let problem = GlmProblem::new(x, y_fit, LossKind::Logistic, true)?;
    let (lmax, _) = problem.lambda_max(weights, cfg)?;
    let grid = if lmax > 0.0 {
        geometric_grid(lmax, path.n_lambda, path.lambda_min_ratio)
    } else {
        vec![0.0]
    };
    let preds = cv_linear_predictors(x, y_fit, weights, &grid, folds, cfg)?;
    let scores = preds.iter().map(|eta| criterion.score(eta, y_eval)).collect();
    Ok(CvPath { grid, scores })
}

/// Full-data fit at `grid[index]`, reached along the warm-started grid so it
/// matches the fits the cross-validation scored.
pub fn refit_at(
    x: &DMatrix<f64>,
    y: &[f64],
    weights: &[f64],
    grid: &[f64],
    index: usize,
    cfg: &SolverConfig,
) -> Result<GlmFit> {
    let problem = GlmProblem::new(x, y, LossKind::Logistic, true)?;
    let mut fits = problem.fit_grid(weights, &grid[..=index], cfg)?;
    Ok(fits.pop().expect("grid prefix is nonempty"))
}
