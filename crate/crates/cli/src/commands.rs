//! The four subcommands. Each validates its configuration before doing any
//! work and writes a manifest next to its outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use passreg::baselines::{Coefficients, MethodTag};
use passreg::data::{load_csv, CsvSchema, Dataset, TransformLog};
use passreg::eval::{evaluate, make_folds, MetricsReport};
use passreg::pass::PassFit;
use passreg::simgen::TruthOracle;
use serde::Serialize;

use crate::bench::{load_real, resolve_truth, run_real_data, run_simulation, simulate_with, BenchOutcome};
use crate::config::ExperimentConfig;
use crate::error::{usage, CliError, Result};
use crate::methods::{check_method_data, fit_methods, needs_alpha, FitContext, FittedModel};
use crate::output::{
    canonical_json, create_dir, failures_csv, folds_csv, metric_boxplots, results_csv, FoldRow, Manifest,
    SummaryEntry,
};
use crate::preprocess::load_alpha_cached;

pub const SURROGATE_NAME: &str = "S";
pub const LABEL_NAME: &str = "Y";

/// Schema of the CSV files `simulate` writes.
pub fn simulated_schema() -> CsvSchema {
    CsvSchema {
        surrogate_col: SURROGATE_NAME.into(),
        label_col: Some(LABEL_NAME.into()),
        utilization_col: None,
    }
}

/// Writes train.csv, test.csv, truth.json and manifest.json into `cfg.out`.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<PathBuf> {
    if cfg.scenario.is_none() {
        return Err(usage("simulate needs a scenario"));
    }
    cfg.validate()?;
    let truth = resolve_truth(cfg)?;
    let sim = simulate_with(cfg, cfg.seed, truth)?;
    let dir = &cfg.out;
    create_dir(dir)?;
    let mut manifest = Manifest::new("simulate", cfg);
    for (name, ds) in [("train.csv", &sim.train), ("test.csv", &sim.test)] {
        passreg::data::write_csv(ds, dir.join(name), SURROGATE_NAME, LABEL_NAME)?;
        manifest.record(dir, name)?;
    }
    manifest.emit(dir, "truth.json", canonical_json(&sim.oracle).as_bytes())?;
    manifest.finish(dir)?;
    log::info!("wrote simulated data to {}", dir.display());
    Ok(dir.clone())
}

/// Models fitted by `fit`, in the configured method order.
#[derive(Debug)]
pub struct FitOutcome {
    pub models: Vec<(MethodTag, FittedModel)>,
    /// Whether the surrogate direction came from the cache; `None` when no
    /// method needed it.
    pub alpha_cache_hit: Option<bool>,
    pub files: Vec<PathBuf>,
}

fn fit_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    match (&cfg.real_data, cfg.scenario) {
        (Some(rd), _) => load_real(rd),
        (None, Some(_)) => {
            let truth = resolve_truth(cfg)?;
            Ok(simulate_with(cfg, cfg.seed, truth)?.train)
        }
        (None, None) => Err(usage("fit needs a scenario or real data")),
    }
}

/// Fits every configured method on one training set and writes
/// model_<method>.json (plus transforms.json for real data).
pub fn cmd_fit(cfg: &ExperimentConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    let train = fit_data(cfg)?;
    for &m in &cfg.methods {
        check_method_data(m, &train)?;
    }
    let (alpha, hit) = if needs_alpha(&cfg.methods) {
        let (a, hit) = load_alpha_cached(cfg, &train)?;
        (Some(a), Some(hit))
    } else {
        (None, None)
    };
    let labeled = train.labeled()?;
    let folds = make_folds(&labeled.y, cfg.cv.n_folds, cfg.seed, true)?;
    let ctx = FitContext {
        cfg,
        train: &train,
        labeled: &labeled,
        alpha: alpha.as_ref(),
        folds: &folds,
        seed: cfg.seed,
    };
    let dir = &cfg.out;
    create_dir(dir)?;
    let mut manifest = Manifest::new("fit", cfg);
    let mut models = Vec::new();
    let mut files = Vec::new();
    for (m, res) in fit_methods(&cfg.methods, &ctx) {
        let model = res?;
        let name = format!("model_{m}.json");
        files.push(manifest.emit(dir, &name, canonical_json(&model).as_bytes())?);
        models.push((m, model));
    }
    if !train.log.steps.is_empty() {
        files.push(manifest.emit(dir, "transforms.json", train.log.to_json()?.as_bytes())?);
    }
    manifest.finish(dir)?;
    Ok(FitOutcome {
        models,
        alpha_cache_hit: hit,
        files,
    })
}

/// Reads a model written by `fit` (a PASS fit or plain coefficients).
pub fn read_model(path: &Path) -> Result<Coefficients> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let json_err = |source| CliError::Json {
        path: path.to_path_buf(),
        source,
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(json_err)?;
    if value.get("method_tag").is_some() {
        serde_json::from_value(value).map_err(json_err)
    } else {
        let fit: PassFit = serde_json::from_value(value).map_err(json_err)?;
        Ok(fit.to_coefficients())
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Inputs of `evaluate`.
#[derive(Clone, Debug)]
pub struct EvaluateArgs {
    pub model: PathBuf,
    pub test: PathBuf,
    pub schema: CsvSchema,
    /// Truth oracle JSON; enables excess risk and MSE-P.
    pub truth: Option<PathBuf>,
    /// Transform log to replay on the test features before scoring.
    pub transforms: Option<PathBuf>,
}

/// Scores a saved model on a labeled CSV and writes metrics.json.
pub fn cmd_evaluate(cfg: &ExperimentConfig, args: &EvaluateArgs) -> Result<MetricsReport> {
    let model = read_model(&args.model)?;
    let raw = load_csv(&args.test, &args.schema)?;
    let ds = match &args.transforms {
        Some(p) => read_json::<TransformLog>(p)?.replay(&raw)?,
        None => raw,
    };
    let oracle: Option<TruthOracle> = args.truth.as_deref().map(read_json).transpose()?;
    let report = evaluate(&model, &ds.labeled()?, oracle.as_ref())?;
    let dir = &cfg.out;
    create_dir(dir)?;
    let mut manifest = Manifest::new("evaluate", cfg);
    manifest.emit(dir, "metrics.json", canonical_json(&report).as_bytes())?;
    manifest.finish(dir)?;
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct BenchSummary {
    pub n_replicates: usize,
    pub failed_replicates: usize,
    /// Every cross-validated method saw the same folds within each
    /// (replicate, n).
    pub paired_folds: bool,
    pub entries: Vec<SummaryEntry>,
}

/// True when all fold hashes within each (replicate, n) agree.
pub fn folds_are_paired(rows: &[FoldRow]) -> bool {
    let mut seen: BTreeMap<(usize, usize), &str> = BTreeMap::new();
    rows.iter()
        .all(|r| *seen.entry((r.replicate, r.n)).or_insert(&r.fold_sha256) == r.fold_sha256)
}

/// Runs every replicate and writes results.csv, failures.csv, folds.csv,
/// summary.json, boxplot_<metric>.svg and manifest.json. Fails with
/// [`CliError::ReplicateFailures`] after writing when too many replicates
/// failed.
pub fn cmd_bench(cfg: &ExperimentConfig) -> Result<BenchOutcome> {
    cfg.validate()?;
    let outcome = if cfg.real_data.is_some() {
        run_real_data(cfg)?
    } else {
        run_simulation(cfg)?
    };
    let dir = &cfg.out;
    create_dir(dir)?;
    let mut manifest = Manifest::new("bench", cfg);
    manifest.emit(dir, "results.csv", results_csv(&outcome.rows).as_bytes())?;
    manifest.emit(dir, "failures.csv", failures_csv(&outcome.failures).as_bytes())?;
    manifest.emit(dir, "folds.csv", folds_csv(&outcome.folds).as_bytes())?;
    let summary = BenchSummary {
        n_replicates: outcome.n_replicates,
        failed_replicates: outcome.failed_replicates,
        paired_folds: folds_are_paired(&outcome.folds),
        entries: outcome.summary(),
    };
    manifest.emit(dir, "summary.json", canonical_json(&summary).as_bytes())?;
    if cfg.plots && !outcome.rows.is_empty() {
        let (title, base_n) = match (&cfg.real_data, cfg.scenario) {
            (None, Some(id)) => (format!("Scenario {id}"), Some(cfg.n)),
            _ => ("Real data".to_string(), None),
        };
        for (name, svg) in metric_boxplots(&outcome.rows, base_n, &title) {
            manifest.emit(dir, &name, svg.as_bytes())?;
        }
    }
    manifest.finish(dir)?;
    let rate = outcome.failed_replicates as f64 / outcome.n_replicates.max(1) as f64;
    if rate > cfg.max_failure_rate {
        return Err(CliError::ReplicateFailures {
            failed: outcome.failed_replicates,
            total: outcome.n_replicates,
        });
    }
    Ok(outcome)
}
