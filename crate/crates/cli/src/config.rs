//! Experiment configuration: a JSON file whose keys may be overridden by flags.

use std::path::{Path, PathBuf};

use passreg::baselines::{MethodTag, PlassoOptions, UlassoOptions};
use passreg::data::CsvSchema;
use passreg::eval::CvOptions;
use passreg::pass::PassTuning;
use passreg::simgen::{ScenarioId, ScenarioSpec};
use passreg::solver::SolverConfig;
use passreg::surrogate::AlphaOptions;
use serde::{Deserialize, Serialize};

use crate::error::{usage, CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Option<ScenarioId>,
    pub methods: Vec<MethodTag>,
    /// Labeled training rows.
    pub n: usize,
    /// Total training rows.
    #[serde(rename = "N")]
    pub n_total: usize,
    pub p: usize,
    pub test_size: usize,
    pub reps: usize,
    pub seed: u64,
    /// Additional supervised LASSO fits per replicate with this many labels
    /// (the first rows of the same training draw).
    pub extra_lasso_n: Vec<usize>,
    pub alasso_nu: f64,
    pub solver: SolverConfig,
    pub alpha: AlphaOptions,
    pub cv: CvOptions,
    pub pass: PassTuning,
    pub plasso: PlassoOptions,
    pub ulasso: UlassoOptions,
    /// Worker threads for replicates; `None` uses every core.
    pub threads: Option<usize>,
    pub out: PathBuf,
    /// Where fitted surrogate directions and large-sample truths are cached.
    pub cache_dir: Option<PathBuf>,
    pub plots: bool,
    /// Share of failed replicates above which `bench` exits with an error.
    pub max_failure_rate: f64,
    pub real_data: Option<RealDataConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: None,
            methods: vec![
                MethodTag::Lasso,
                MethodTag::Alasso,
                MethodTag::SsPrior,
                MethodTag::Plasso1,
                MethodTag::Plasso2,
                MethodTag::Pass,
            ],
            n: 100,
            n_total: 2000,
            p: 200,
            test_size: 2000,
            reps: 50,
            seed: 1,
            extra_lasso_n: Vec::new(),
            alasso_nu: 1.0,
            solver: SolverConfig::default(),
            alpha: AlphaOptions::default(),
            cv: CvOptions::default(),
            pass: PassTuning::default(),
            plasso: PlassoOptions::default(),
            ulasso: UlassoOptions::default(),
            threads: None,
            out: PathBuf::from("passreg-out"),
            cache_dir: None,
            plots: true,
            max_failure_rate: 0.1,
            real_data: None,
        }
    }
}

/// A labeled CSV study evaluated by repeated fold splitting: the labeled rows
/// are split into `outer_folds` folds; each fold in turn is the validation
/// set while `resamples` training sets of each size in `train_sizes` are
/// drawn from the remaining folds. The whole procedure is repeated `repeats`
/// times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RealDataConfig {
    pub train: PathBuf,
    pub schema: CsvSchema,
    pub preprocess: Preprocess,
    pub train_sizes: Vec<usize>,
    pub outer_folds: usize,
    pub resamples: usize,
    pub repeats: usize,
}

impl Default for RealDataConfig {
    fn default() -> Self {
        RealDataConfig {
            train: PathBuf::new(),
            schema: CsvSchema::default(),
            preprocess: Preprocess::default(),
            train_sizes: vec![50],
            outer_folds: 4,
            resamples: 20,
            repeats: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Preprocess {
    /// ln(1 + x) on every feature and the surrogate.
    pub log1p: bool,
    /// Residualize features (not the surrogate) on the utilization column.
    pub orthogonalize: bool,
    pub standardize: bool,
}

impl Default for Preprocess {
    fn default() -> Self {
        Preprocess {
            log1p: true,
            orthogonalize: true,
            standardize: false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn scenario_spec(&self, seed: u64) -> Result<ScenarioSpec> {
        let id = self
            .scenario
            .ok_or_else(|| usage("no scenario given (use --scenario or the config key)"))?;
        Ok(ScenarioSpec {
            id,
            n: self.n,
            n_total: self.n_total,
            p: self.p,
            seed,
            test_size: self.test_size,
        })
    }

    /// Checks everything that can be checked before any work starts.
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(usage("no methods selected"));
        }
        if self.reps == 0 {
            return Err(usage("reps must be positive"));
        }
        if self.threads == Some(0) {
            return Err(usage("threads must be positive"));
        }
        if self.cv.n_folds < 2 {
            return Err(usage("cv.n_folds must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            return Err(usage("max_failure_rate must lie in [0, 1]"));
        }
        if let Some(id) = self.scenario {
            let spec = self.scenario_spec(self.seed)?;
            spec.validate().map_err(|e| usage(format!("scenario {id}: {e}")))?;
            for &m in &self.extra_lasso_n {
                if m == 0 || m > self.n_total {
                    return Err(usage(format!("extra_lasso_n entry {m} is outside 1..=N")));
                }
            }
        }
        if let Some(rd) = &self.real_data {
            if rd.outer_folds < 2 || rd.resamples == 0 || rd.repeats == 0 || rd.train_sizes.is_empty() {
                return Err(usage("real_data needs outer_folds >= 2 and positive resamples, repeats and train_sizes"));
            }
            if rd.schema.surrogate_col.is_empty() {
                return Err(usage("real_data.schema.surrogate_col is required"));
            }
            if rd.preprocess.orthogonalize && rd.schema.utilization_col.is_none() {
                return Err(usage("orthogonalization needs real_data.schema.utilization_col"));
            }
        }
        if self.scenario.is_none() && self.real_data.is_none() {
            return Err(usage("either a scenario or real data must be given"));
        }
        Ok(())
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.out.join("cache"))
    }
}
