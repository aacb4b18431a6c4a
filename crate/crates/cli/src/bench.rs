//! Replicated benchmarks: simulated scenarios and the real-data resampling
//! protocol. Replicates run on a worker pool and are gathered in index order.

use passreg::baselines::MethodTag;
use passreg::data::{load_csv, Dataset, LabeledData, Labels};
use passreg::eval::{evaluate, make_folds, mean_se, FoldAssignment, MetricsReport};
use passreg::simgen::{gen_main, gen_mis_with_truth, mis_truth, mis_truth_cached, MisTruth, SimData, TruthOracle};
use passreg::surrogate::AlphaFit;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, RealDataConfig};
use crate::error::{usage, Result};
use crate::methods::{estimate_alpha, fit_methods, needs_alpha, FitContext};
use crate::output::{block_means, folds_hash, summarize, FailureRow, FoldRow, ResultRow, SummaryEntry};
use crate::preprocess::{load_alpha_cached, preprocess};

/// Rows produced by one replicate (or one resampling unit).
#[derive(Clone, Debug, Default)]
pub struct ReplicateOutcome {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<FailureRow>,
    pub folds: Vec<FoldRow>,
}

/// All replicates, concatenated in replicate order.
#[derive(Clone, Debug, Default)]
pub struct BenchOutcome {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<FailureRow>,
    pub folds: Vec<FoldRow>,
    pub n_replicates: usize,
    pub failed_replicates: usize,
    /// Replicates averaged together before the mean and standard error are
    /// taken: each replicate alone for simulations, each repeat of the fold
    /// split for real data.
    pub block_size: usize,
}

impl BenchOutcome {
    fn gather(outcomes: Vec<ReplicateOutcome>, block_size: usize) -> Self {
        let n_replicates = outcomes.len();
        let mut out = BenchOutcome {
            n_replicates,
            block_size,
            ..Default::default()
        };
        for o in outcomes {
            if !o.failures.is_empty() {
                out.failed_replicates += 1;
            }
            out.rows.extend(o.rows);
            out.failures.extend(o.failures);
            out.folds.extend(o.folds);
        }
        out
    }

    /// Mean and standard error of `metric` for (method, n) across blocks.
    pub fn mean_se(&self, method: MethodTag, n: usize, metric: &str) -> Option<passreg::eval::MeanSe> {
        let values = self.block_means(method, n, metric);
        (!values.is_empty()).then(|| mean_se(&values))
    }

    pub fn mean(&self, method: MethodTag, n: usize, metric: &str) -> Option<f64> {
        self.mean_se(method, n, metric).map(|m| m.mean)
    }

    fn block_means(&self, method: MethodTag, n: usize, metric: &str) -> Vec<f64> {
        let values: Vec<(usize, f64)> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.n == n && r.metric == metric)
            .map(|r| (r.replicate, r.value))
            .collect();
        block_means(&values, self.block_size)
    }

    pub fn summary(&self) -> Vec<SummaryEntry> {
        summarize(&self.rows, self.block_size)
    }
}

/// Methods that draw on the shared fold assignment.
fn uses_shared_folds(m: MethodTag) -> bool {
    matches!(
        m,
        MethodTag::Lasso | MethodTag::Alasso | MethodTag::Plasso1 | MethodTag::Plasso2 | MethodTag::Pass
    )
}

/// Runs `f` over `0..count` on the configured pool, keeping index order.
fn run_pool<T: Send>(threads: Option<usize>, count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Result<Vec<T>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| usage(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(f).collect()))
}

/// The large-sample truth for misspecified scenarios, resolved once before
/// the replicates start.
pub fn resolve_truth(cfg: &ExperimentConfig) -> Result<Option<&'static MisTruth>> {
    let Some(id) = cfg.scenario.filter(|id| id.is_misspecified()) else {
        return Ok(None);
    };
    let truth = match &cfg.cache_dir {
        Some(dir) => {
            crate::output::create_dir(dir)?;
            mis_truth_cached(id, &dir.join(format!("truth_{id}.json")))?
        }
        None => mis_truth(id)?,
    };
    Ok(Some(truth))
}

pub fn simulate_with(cfg: &ExperimentConfig, seed: u64, truth: Option<&MisTruth>) -> Result<SimData> {
    let spec = cfg.scenario_spec(seed)?;
    let data = if spec.id.is_misspecified() {
        gen_mis_with_truth(&spec, truth)?
    } else {
        gen_main(&spec)?
    };
    Ok(data)
}

/// Fits and evaluates `methods` on one training set; appends to `out`.
#[allow(clippy::too_many_arguments)]
fn fit_and_score(
    cfg: &ExperimentConfig,
    methods: &[MethodTag],
    train: &Dataset,
    alpha: Option<&AlphaFit>,
    test: &LabeledData,
    oracle: Option<&TruthOracle>,
    row: &ResultRow,
    fold_seed: u64,
    out: &mut ReplicateOutcome,
) {
    let fail = |out: &mut ReplicateOutcome, method: Option<MethodTag>, e: &dyn std::fmt::Display| {
        log::warn!("replicate {} n={}: {}", row.replicate, row.n, e);
        out.failures.push(FailureRow {
            replicate: row.replicate,
            method,
            n: row.n,
            error: e.to_string(),
        });
    };
    let labeled = match train.labeled() {
        Ok(l) => l,
        Err(e) => return fail(out, None, &e),
    };
    let folds: FoldAssignment = match make_folds(&labeled.y, cfg.cv.n_folds, fold_seed, true) {
        Ok(f) => f,
        Err(e) => return fail(out, None, &e),
    };
    let hash = folds_hash(&folds);
    let ctx = FitContext {
        cfg,
        train,
        labeled: &labeled,
        alpha,
        folds: &folds,
        seed: fold_seed,
    };
    for (m, res) in fit_methods(methods, &ctx) {
        let report: passreg::Result<MetricsReport> = res.and_then(|fit| evaluate(&fit.coefficients(), test, oracle));
        match report {
            Ok(rep) => {
                for (metric, value) in rep.entries() {
                    out.rows.push(ResultRow {
                        method: m,
                        metric,
                        value,
                        ..row.clone()
                    });
                }
                if uses_shared_folds(m) {
                    out.folds.push(FoldRow {
                        replicate: row.replicate,
                        method: m,
                        n: row.n,
                        fold_sha256: hash.clone(),
                    });
                }
            }
            Err(e) => fail(out, Some(m), &e),
        }
    }
}

fn sim_replicate(cfg: &ExperimentConfig, r: usize, truth: Option<&MisTruth>) -> ReplicateOutcome {
    let seed = cfg.seed.wrapping_add(r as u64);
    let mut out = ReplicateOutcome::default();
    let template = ResultRow {
        replicate: r,
        method: MethodTag::Lasso,
        metric: "",
        value: f64::NAN,
        n: cfg.n,
        n_total: cfg.n_total,
        p: cfg.p,
        scenario: cfg.scenario.map_or_else(String::new, |s| s.to_string()),
        seed,
    };
    let sim = match simulate_with(cfg, seed, truth) {
        Ok(s) => s,
        Err(e) => {
            out.failures.push(FailureRow {
                replicate: r,
                method: None,
                n: cfg.n,
                error: e.to_string(),
            });
            return out;
        }
    };
    let test = match sim.test_labeled() {
        Ok(t) => t,
        Err(e) => {
            out.failures.push(FailureRow {
                replicate: r,
                method: None,
                n: cfg.n,
                error: e.to_string(),
            });
            return out;
        }
    };
    let alpha = if needs_alpha(&cfg.methods) {
        match estimate_alpha(cfg, &sim.train) {
            Ok(a) => Some(a),
            Err(e) => {
                log::warn!("replicate {r}: surrogate stage failed: {e}");
                None
            }
        }
    } else {
        None
    };
    fit_and_score(
        cfg,
        &cfg.methods,
        &sim.train,
        alpha.as_ref(),
        &test,
        Some(&sim.oracle),
        &template,
        seed,
        &mut out,
    );
    for &m in &cfg.extra_lasso_n {
        let row = ResultRow { n: m, ..template.clone() };
        match sim.relabel_first(m) {
            Ok(d) => fit_and_score(
                cfg,
                &[MethodTag::Lasso],
                &d.train,
                None,
                &test,
                Some(&sim.oracle),
                &row,
                seed,
                &mut out,
            ),
            Err(e) => out.failures.push(FailureRow {
                replicate: r,
                method: Some(MethodTag::Lasso),
                n: m,
                error: e.to_string(),
            }),
        }
    }
    out
}

/// Simulation bench: replicates 1..=reps with seeds seed+r.
pub fn run_simulation(cfg: &ExperimentConfig) -> Result<BenchOutcome> {
    let truth = resolve_truth(cfg)?;
    let outcomes = run_pool(cfg.threads, cfg.reps, |i| {
        let r = i + 1;
        log::info!("replicate {r}/{}", cfg.reps);
        sim_replicate(cfg, r, truth)
    })?;
    Ok(BenchOutcome::gather(outcomes, 1))
}

/// SplitMix64 finalizer applied to `seed` offset by `k`; decorrelates the
/// seeds of nested loops.
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Real-data bench. The labeled rows are split into `outer_folds` folds,
/// `repeats` times. For each held-out fold, `resamples` labeled training sets
/// of every size in `train_sizes` are drawn from the other folds; all other
/// rows stay in the training data unlabeled. The surrogate direction is
/// estimated once from every row.
pub fn run_real_data(cfg: &ExperimentConfig) -> Result<BenchOutcome> {
    let rd = cfg
        .real_data
        .as_ref()
        .ok_or_else(|| usage("real-data bench needs a real_data section"))?;
    let ds = load_real(rd)?;
    let labels = ds
        .labels
        .clone()
        .ok_or_else(|| usage("real-data training file has no labeled rows"))?;
    let alpha = if needs_alpha(&cfg.methods) {
        Some(load_alpha_cached(cfg, &ds)?.0)
    } else {
        None
    };
    let y_all: Vec<f64> = labels.values.iter().map(|&v| f64::from(v)).collect();
    let splits: Vec<FoldAssignment> = (0..rd.repeats)
        .map(|t| make_folds(&y_all, rd.outer_folds, derive_seed(cfg.seed, t as u64), true))
        .collect::<passreg::Result<_>>()?;
    let per_repeat = rd.outer_folds * rd.resamples;
    let total = rd.repeats * per_repeat;
    let outcomes = run_pool(cfg.threads, total, |i| {
        let t = i / per_repeat;
        let v = (i % per_repeat) / rd.resamples;
        log::info!("unit {}/{total}", i + 1);
        real_unit(cfg, rd, &ds, &labels, alpha.as_ref(), &splits[t], v, i + 1)
    })?;
    Ok(BenchOutcome::gather(outcomes, per_repeat))
}

pub fn load_real(rd: &RealDataConfig) -> Result<Dataset> {
    let raw = load_csv(&rd.train, &rd.schema)?;
    preprocess(&rd.preprocess, &raw)
}

#[allow(clippy::too_many_arguments)]
fn real_unit(
    cfg: &ExperimentConfig,
    rd: &RealDataConfig,
    ds: &Dataset,
    labels: &Labels,
    alpha: Option<&AlphaFit>,
    split: &FoldAssignment,
    held_out: usize,
    unit: usize,
) -> ReplicateOutcome {
    let seed = derive_seed(cfg.seed, 1_000_000 + unit as u64);
    let mut out = ReplicateOutcome::default();
    let (pool, valid) = split.split(held_out);
    let valid_rows: Vec<usize> = valid.iter().map(|&k| labels.rows[k]).collect();
    let test = LabeledData {
        x: ds.features.select_rows(&valid_rows),
        s: valid_rows.iter().map(|&i| ds.surrogate[i]).collect(),
        y: valid.iter().map(|&k| f64::from(labels.values[k])).collect(),
    };
    for &m in &rd.train_sizes {
        let row = ResultRow {
            replicate: unit,
            method: MethodTag::Lasso,
            metric: "",
            value: f64::NAN,
            n: m,
            n_total: ds.n_obs(),
            p: ds.n_features(),
            scenario: "real".into(),
            seed,
        };
        if m > pool.len() {
            out.failures.push(FailureRow {
                replicate: unit,
                method: None,
                n: m,
                error: format!("training size {m} exceeds the {} labeled rows available", pool.len()),
            });
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, m as u64));
        let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, pool.len(), m)
            .into_iter()
            .map(|j| pool[j])
            .collect();
        chosen.sort_by_key(|&k| labels.rows[k]);
        let sub = Labels {
            rows: chosen.iter().map(|&k| labels.rows[k]).collect(),
            values: chosen.iter().map(|&k| labels.values[k]).collect(),
        };
        match ds.with_labels(Some(sub)) {
            Ok(train) => fit_and_score(cfg, &cfg.methods, &train, alpha, &test, None, &row, seed, &mut out),
            Err(e) => out.failures.push(FailureRow {
                replicate: unit,
                method: None,
                n: m,
                error: e.to_string(),
            }),
        }
    }
    out
}
