//! Simulation designs and their truth oracles.
//!
//! Scenarios `I`..`VI` draw count-like features `X = h(Z)`, `h(t) = ln(1 + [eᵗ])`
//! with `Z ~ N(0, Σ)`, `Σᵢⱼ = 4·0.5^|i-j|`, a surrogate from a single-index
//! model `S = h(1 + Xᵀα₀ + ε)`, `ε ~ N(0, 4)`, and a correctly specified
//! logistic outcome `logit P(Y = 1) = -4 + 0.5S + Xᵀβ₀`.
//!
//! Scenarios `i`..`iii` draw `X = 2Φ(Z) - 1` with a block-diagonal AR(0.5)
//! correlation (blocks of 20 and p - 20 columns), a probit-style outcome
//! `Y = I{(0.8, 1, -1, 0.8, 0.4, 0)ᵀX + ε_y ≥ 0}` and a surrogate
//! `S = μY + η₁ᵀX + Yη₂ᵀX + ε_s`. The logistic model is misspecified there, so
//! the truth used for excess risk is the best logistic approximation, computed
//! from a large sample.
//!
//! Randomness comes from ChaCha8 seeded with the spec seed: stream 0 for the
//! training rows, stream 1 for the test rows. Normals are drawn by inverting
//! the normal CDF at a 53-bit uniform, so draws are identical on every
//! platform.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{Dataset, LabeledData, Labels};
use crate::error::{Error, Result};
use crate::solver::{fit_logistic_newton, sigmoid, SolverConfig};

pub const A1: [f64; 5] = [0.5, 1.0, -0.8, 0.6, 0.2];
pub const D1: [f64; 5] = [-0.05, -0.5, 1.4, 0.5, -0.6];
pub const A2: [f64; 5] = [0.1, -0.2, -0.2, 0.2, 0.7];
pub const D2: [f64; 5] = [0.02, 0.05, 0.02, -0.02, -0.05];
pub const A3: [f64; 5] = [0.6, -0.4, 0.4, 0.5, -0.5];
pub const D3: [f64; 5] = [0.3, 0.4, 0.6, -0.5, -0.5];
/// Outcome coefficients of the latent-threshold model in scenarios i..iii.
pub const Y_LATENT: [f64; 5] = [0.8, 1.0, -1.0, 0.8, 0.4];

pub const MAIN_ZETA: f64 = -4.0;
pub const MAIN_GAMMA: f64 = 0.5;
/// Size of the first correlation block in scenarios i..iii.
pub const MIS_BLOCK: usize = 20;

/// Sample size and seed of the large-sample logistic fit that defines the
/// truth in scenarios i..iii.
pub const MIS_TRUTH_SAMPLES: usize = 500_000;
pub const MIS_TRUTH_SEED: u64 = 0x5eed_7a55;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioId {
    I,
    II,
    III,
    IV,
    V,
    VI,
    #[serde(rename = "i")]
    Mi,
    #[serde(rename = "ii")]
    Mii,
    #[serde(rename = "iii")]
    Miii,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 9] = [
        ScenarioId::I,
        ScenarioId::II,
        ScenarioId::III,
        ScenarioId::IV,
        ScenarioId::V,
        ScenarioId::VI,
        ScenarioId::Mi,
        ScenarioId::Mii,
        ScenarioId::Miii,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::I => "I",
            ScenarioId::II => "II",
            ScenarioId::III => "III",
            ScenarioId::IV => "IV",
            ScenarioId::V => "V",
            ScenarioId::VI => "VI",
            ScenarioId::Mi => "i",
            ScenarioId::Mii => "ii",
            ScenarioId::Miii => "iii",
        }
    }

    /// Scenarios i..iii, where the outcome model is misspecified.
    pub fn is_misspecified(self) -> bool {
        matches!(self, ScenarioId::Mi | ScenarioId::Mii | ScenarioId::Miii)
    }

    pub fn min_p(self) -> usize {
        match self {
            ScenarioId::III => 20,
            ScenarioId::VI => 15,
            ScenarioId::Mi | ScenarioId::Mii | ScenarioId::Miii => MIS_BLOCK,
            _ => 10,
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    /// Labeled training rows (the first `n` of the `n_total`).
    pub n: usize,
    /// Total training rows, labeled and unlabeled.
    #[serde(rename = "N")]
    pub n_total: usize,
    pub p: usize,
    pub seed: u64,
    pub test_size: usize,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p < self.id.min_p() {
            return Err(Error::InvalidArgument(format!(
                "scenario {} needs p >= {}, got {}",
                self.id,
                self.id.min_p(),
                self.p
            )));
        }
        if self.n > self.n_total {
            return Err(Error::InvalidArgument(format!(
                "n = {} exceeds N = {}",
                self.n, self.n_total
            )));
        }
        if self.n_total == 0 || self.test_size == 0 {
            return Err(Error::InvalidArgument("N and test_size must be positive".into()));
        }
        Ok(())
    }
}

fn stack(parts: &[&[f64]], p: usize, scale: f64) -> Vec<f64> {
    let mut v: Vec<f64> = parts.iter().flat_map(|s| s.iter().map(|x| scale * x)).collect();
    v.resize(p, 0.0);
    v
}

fn add(a: &[f64; 5], b: &[f64; 5]) -> [f64; 5] {
    std::array::from_fn(|k| a[k] + b[k])
}

/// (α₀, β₀) of scenarios I..VI at dimension `p`.
pub fn main_coefficients(id: ScenarioId, p: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if id.is_misspecified() {
        return Err(Error::InvalidArgument(format!("scenario {id} has no (alpha0, beta0) pair")));
    }
    if p < id.min_p() {
        return Err(Error::InvalidArgument(format!("scenario {id} needs p >= {}", id.min_p())));
    }
    let a1d1 = add(&A1, &D1);
    let a2d2 = add(&A2, &D2);
    let zero = [0.0; 5];
    let (alpha, beta) = match id {
        ScenarioId::I => (stack(&[&A1, &A2], p, 1.0), stack(&[&A1, &A2], p, 1.5)),
        ScenarioId::II => (stack(&[&A1, &A2], p, 1.0), stack(&[&a1d1, &a2d2], p, 1.5)),
        ScenarioId::III => (stack(&[&A1, &A2, &A2, &A2], p, 1.0), stack(&[&a1d1, &a2d2], p, 1.5)),
        ScenarioId::IV => (stack(&[&A1], p, 1.0), stack(&[&a1d1, &a2d2], p, 1.5)),
        ScenarioId::V => (stack(&[&A1, &A2], p, 1.0), stack(&[&A2, &A1], p, 1.5)),
        ScenarioId::VI => (stack(&[&A1, &A2], p, 1.0), stack(&[&A2, &zero, &A1], p, 1.5)),
        _ => unreachable!(),
    };
    Ok((alpha, beta))
}

/// Generative parameters of scenarios i..iii.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MisParams {
    pub mu: f64,
    pub eta1: Vec<f64>,
    pub eta2: Vec<f64>,
    pub y_latent: Vec<f64>,
}

pub fn mis_parameters(id: ScenarioId, p: usize) -> Result<MisParams> {
    if !id.is_misspecified() {
        return Err(Error::InvalidArgument(format!("scenario {id} is not a misspecified design")));
    }
    if p < MIS_BLOCK {
        return Err(Error::InvalidArgument(format!("scenario {id} needs p >= {MIS_BLOCK}")));
    }
    let (mu, eta1, eta2) = match id {
        ScenarioId::Mi => (1.0, vec![0.0; p], vec![0.0; p]),
        ScenarioId::Mii => (1.5, stack(&[&A3], p, 1.0), stack(&[&D3], p, 1.0)),
        ScenarioId::Miii => (2.0, stack(&[&A3, &A3, &A3], p, 1.0), stack(&[&D3, &D3, &D3], p, 1.0)),
        _ => unreachable!(),
    };
    Ok(MisParams {
        mu,
        eta1,
        eta2,
        y_latent: stack(&[&Y_LATENT], p, 1.0),
    })
}

/// The true outcome model π(ζ₀ + γ₀S + xᵀβ₀) of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthOracle {
    pub scenario: ScenarioId,
    pub zeta0: f64,
    pub gamma0: f64,
    pub beta0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mis: Option<MisParams>,
    /// True when (ζ₀, γ₀, β₀) is a large-sample best logistic approximation
    /// rather than the generating model.
    pub approximate: bool,
}

impl TruthOracle {
    pub fn true_linear_predictor(&self, s: f64, x: &[f64]) -> Result<f64> {
        if x.len() != self.beta0.len() {
            return Err(Error::Dimension(format!(
                "oracle has {} features, got {}",
                self.beta0.len(),
                x.len()
            )));
        }
        Ok(self.zeta0 + self.gamma0 * s + x.iter().zip(&self.beta0).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn true_probability(&self, s: f64, x: &[f64]) -> Result<f64> {
        self.true_linear_predictor(s, x).map(sigmoid)
    }

    pub fn main(id: ScenarioId, p: usize) -> Result<Self> {
        let (alpha0, beta0) = main_coefficients(id, p)?;
        Ok(TruthOracle {
            scenario: id,
            zeta0: MAIN_ZETA,
            gamma0: MAIN_GAMMA,
            beta0,
            alpha0: Some(alpha0),
            mis: None,
            approximate: false,
        })
    }

    /// Truth for scenarios i..iii from the cached large-sample fit.
    pub fn misspecified(id: ScenarioId, p: usize) -> Result<Self> {
        let truth = mis_truth(id)?;
        Self::from_mis_truth(truth, p)
    }

    pub fn from_mis_truth(truth: &MisTruth, p: usize) -> Result<Self> {
        let mut beta0 = truth.beta.clone();
        if p < beta0.len() {
            return Err(Error::InvalidArgument(format!("scenario {} needs p >= {MIS_BLOCK}", truth.scenario)));
        }
        beta0.resize(p, 0.0);
        Ok(TruthOracle {
            scenario: truth.scenario,
            zeta0: truth.zeta,
            gamma0: truth.gamma,
            beta0,
            alpha0: None,
            mis: Some(mis_parameters(truth.scenario, p)?),
            approximate: true,
        })
    }
}

/// Best logistic approximation of Y on (1, S, X₁..X₂₀) in scenarios i..iii.
/// The remaining features are independent of (Y, S), so their coefficients
/// are zero in the population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MisTruth {
    pub scenario: ScenarioId,
    pub n_samples: usize,
    pub seed: u64,
    pub zeta: f64,
    pub gamma: f64,
    pub beta: Vec<f64>,
}

pub fn compute_mis_truth(id: ScenarioId, n_samples: usize, seed: u64) -> Result<MisTruth> {
    let params = mis_parameters(id, MIS_BLOCK)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = CorrelatedNormal::new(&mis_covariance(MIS_BLOCK))?;
    let (x, s, y) = draw_mis(&params, &sampler, n_samples, &mut rng);
    let mut design = DMatrix::zeros(n_samples, MIS_BLOCK + 1);
    design.column_mut(0).copy_from_slice(&s);
    design.columns_mut(1, MIS_BLOCK).copy_from(&x);
    let fit = fit_logistic_newton(&design, &y, &SolverConfig::default())?;
    Ok(MisTruth {
        scenario: id,
        n_samples,
        seed,
        zeta: fit.intercept,
        gamma: fit.coefficients[0],
        beta: fit.coefficients[1..].to_vec(),
    })
}

static MIS_TRUTH: [OnceLock<MisTruth>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];

fn mis_slot(id: ScenarioId) -> Result<&'static OnceLock<MisTruth>> {
    match id {
        ScenarioId::Mi => Ok(&MIS_TRUTH[0]),
        ScenarioId::Mii => Ok(&MIS_TRUTH[1]),
        ScenarioId::Miii => Ok(&MIS_TRUTH[2]),
        _ => Err(Error::InvalidArgument(format!("scenario {id} is not a misspecified design"))),
    }
}

/// The default large-sample truth, computed once per process.
pub fn mis_truth(id: ScenarioId) -> Result<&'static MisTruth> {
    let slot = mis_slot(id)?;
    if let Some(t) = slot.get() {
        return Ok(t);
    }
    log::info!("computing approximate truth for scenario {id} from {MIS_TRUTH_SAMPLES} rows");
    let t = compute_mis_truth(id, MIS_TRUTH_SAMPLES, MIS_TRUTH_SEED)?;
    Ok(slot.get_or_init(|| t))
}

/// Like [`mis_truth`], but first looks for a JSON copy at `path` and writes
/// one there after computing.
pub fn mis_truth_cached(id: ScenarioId, path: &Path) -> Result<&'static MisTruth> {
    let slot = mis_slot(id)?;
    if let Some(t) = slot.get() {
        return Ok(t);
    }
    if let Ok(text) = std::fs::read_to_string(path) {
        match serde_json::from_str::<MisTruth>(&text) {
            Ok(t) if t.scenario == id && t.seed == MIS_TRUTH_SEED && t.n_samples == MIS_TRUTH_SAMPLES => {
                log::info!("loaded approximate truth for scenario {id} from {}", path.display());
                return Ok(slot.get_or_init(|| t));
            }
            _ => log::warn!("ignoring stale truth cache {}", path.display()),
        }
    }
    let t = mis_truth(id)?;
    let text = serde_json::to_string_pretty(t)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(t)
}

/// Standard normal by CDF inversion at a 53-bit uniform in (0, 1).
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
    std_normal().inverse_cdf(u)
}

fn std_normal() -> &'static Normal {
    static N: OnceLock<Normal> = OnceLock::new();
    N.get_or_init(Normal::standard)
}

/// Φ, the standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    std_normal().cdf(z)
}

/// Draws N(0, Σ) rows as L·e with L the lower Cholesky factor of Σ.
pub struct CorrelatedNormal {
    chol: DMatrix<f64>,
}

impl CorrelatedNormal {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Degenerate("covariance is not positive definite".into()))?
            .l();
        Ok(CorrelatedNormal { chol })
    }

    pub fn dim(&self) -> usize {
        self.chol.nrows()
    }

    /// One draw written into `out`; consumes `dim` normals in order.
    pub fn sample_into(&self, rng: &mut impl RngCore, e: &mut [f64], out: &mut [f64]) {
        for v in e.iter_mut() {
            *v = standard_normal(rng);
        }
        let p = self.dim();
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in 0..=i {
                acc += self.chol[(i, k)] * e[k];
            }
            *o = acc;
        }
        debug_assert_eq!(out.len(), p);
    }
}

/// Σᵢⱼ = 4·0.5^|i-j|.
pub fn main_covariance(p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| 4.0 * 0.5f64.powi(i.abs_diff(j) as i32))
}

/// 0.5^|i-j| within the blocks {1..20} and {21..p}, 0 across them.
pub fn mis_covariance(p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| {
        if (i < MIS_BLOCK) == (j < MIS_BLOCK) {
            0.5f64.powi(i.abs_diff(j) as i32)
        } else {
            0.0
        }
    })
}

/// h(t) = ln(1 + [eᵗ]), with [·] rounding half away from zero.
pub fn h(t: f64) -> f64 {
    (1.0 + t.exp().round()).ln()
}

/// Simulated training and test data with the truth that generated them.
#[derive(Clone, Debug)]
pub struct SimData {
    pub spec: ScenarioSpec,
    /// All N training rows; the first n carry labels.
    pub train: Dataset,
    /// Outcomes drawn for all N training rows, including the unlabeled ones.
    pub train_outcomes: Vec<f64>,
    /// Fully labeled test rows.
    pub test: Dataset,
    pub oracle: TruthOracle,
}

impl SimData {
    pub fn labeled(&self) -> Result<LabeledData> {
        self.train.labeled()
    }

    pub fn test_labeled(&self) -> Result<LabeledData> {
        self.test.labeled()
    }

    /// The same draw with only the first `n` training rows labeled.
    pub fn relabel_first(&self, n: usize) -> Result<SimData> {
        if n > self.train_outcomes.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot label {n} rows, only {} outcomes were drawn",
                self.train_outcomes.len()
            )));
        }
        let labels = Labels {
            rows: (0..n).collect(),
            values: self.train_outcomes[..n].iter().map(|&v| v as u8).collect(),
        };
        let mut out = self.clone();
        out.train = self.train.with_labels(Some(labels))?;
        out.spec.n = n;
        Ok(out)
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn column_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

fn dataset(x: DMatrix<f64>, s: Vec<f64>, y: &[f64], n_labeled: usize) -> Result<Dataset> {
    let labels = Labels {
        rows: (0..n_labeled).collect(),
        values: y[..n_labeled].iter().map(|&v| v as u8).collect(),
    };
    let p = x.ncols();
    Dataset::new(x, s, Some(labels), column_names(p), None)
}

/// Rows of scenarios I..VI: per row, p normals for Z, one for ε, one uniform
/// for Y.
fn draw_main(
    alpha0: &[f64],
    beta0: &[f64],
    sampler: &CorrelatedNormal,
    rows: usize,
    rng: &mut ChaCha8Rng,
) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let p = sampler.dim();
    let mut data = Vec::with_capacity(rows * p);
    let mut s = Vec::with_capacity(rows);
    let mut y = Vec::with_capacity(rows);
    let mut e = vec![0.0; p];
    let mut z = vec![0.0; p];
    for _ in 0..rows {
        sampler.sample_into(rng, &mut e, &mut z);
        let x: Vec<f64> = z.iter().map(|&t| h(t)).collect();
        let eps = 2.0 * standard_normal(rng);
        let xa: f64 = x.iter().zip(alpha0).map(|(a, b)| a * b).sum();
        let si = h(1.0 + xa + eps);
        let xb: f64 = x.iter().zip(beta0).map(|(a, b)| a * b).sum();
        let prob = sigmoid(MAIN_ZETA + MAIN_GAMMA * si + xb);
        let u: f64 = rng.random();
        y.push(if u < prob { 1.0 } else { 0.0 });
        s.push(si);
        data.extend_from_slice(&x);
    }
    (DMatrix::from_row_slice(rows, p, &data), s, y)
}

/// Rows of scenarios i..iii: per row, p normals for Z, one for ε_y, one for ε_s.
fn draw_mis(
    params: &MisParams,
    sampler: &CorrelatedNormal,
    rows: usize,
    rng: &mut ChaCha8Rng,
) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let p = sampler.dim();
    let mut data = Vec::with_capacity(rows * p);
    let mut s = Vec::with_capacity(rows);
    let mut y = Vec::with_capacity(rows);
    let mut e = vec![0.0; p];
    let mut z = vec![0.0; p];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    for _ in 0..rows {
        sampler.sample_into(rng, &mut e, &mut z);
        let x: Vec<f64> = z.iter().map(|&t| 2.0 * normal_cdf(t) - 1.0).collect();
        let eps_y = standard_normal(rng);
        let eps_s = standard_normal(rng);
        let yi = if dot(&params.y_latent, &x) + eps_y >= 0.0 { 1.0 } else { 0.0 };
        let si = params.mu * yi + dot(&params.eta1, &x) + yi * dot(&params.eta2, &x) + eps_s;
        y.push(yi);
        s.push(si);
        data.extend_from_slice(&x);
    }
    (DMatrix::from_row_slice(rows, p, &data), s, y)
}

/// Scenarios I..VI.
pub fn gen_main(spec: &ScenarioSpec) -> Result<SimData> {
    spec.validate()?;
    if spec.id.is_misspecified() {
        return Err(Error::InvalidArgument(format!("scenario {} is not a main design", spec.id)));
    }
    let oracle = TruthOracle::main(spec.id, spec.p)?;
    let alpha0 = oracle.alpha0.clone().expect("main oracle carries alpha0");
    let sampler = CorrelatedNormal::new(&main_covariance(spec.p))?;
    let (x, s, y) = draw_main(&alpha0, &oracle.beta0, &sampler, spec.n_total, &mut rng_for(spec.seed, 0));
    let train = dataset(x, s, &y, spec.n)?;
    let (xt, st, yt) = draw_main(&alpha0, &oracle.beta0, &sampler, spec.test_size, &mut rng_for(spec.seed, 1));
    let test = dataset(xt, st, &yt, spec.test_size)?;
    Ok(SimData {
        spec: spec.clone(),
        train,
        train_outcomes: y,
        test,
        oracle,
    })
}

/// Scenarios i..iii, with the truth oracle from `truth` (or the process-wide
/// cached large-sample fit when `None`).
pub fn gen_mis_with_truth(spec: &ScenarioSpec, truth: Option<&MisTruth>) -> Result<SimData> {
    spec.validate()?;
    let params = mis_parameters(spec.id, spec.p)?;
    let oracle = match truth {
        Some(t) if t.scenario == spec.id => TruthOracle::from_mis_truth(t, spec.p)?,
        Some(t) => {
            return Err(Error::InvalidArgument(format!(
                "truth for scenario {} used with scenario {}",
                t.scenario, spec.id
            )))
        }
        None => TruthOracle::misspecified(spec.id, spec.p)?,
    };
    let sampler = CorrelatedNormal::new(&mis_covariance(spec.p))?;
    let (x, s, y) = draw_mis(&params, &sampler, spec.n_total, &mut rng_for(spec.seed, 0));
    let train = dataset(x, s, &y, spec.n)?;
    let (xt, st, yt) = draw_mis(&params, &sampler, spec.test_size, &mut rng_for(spec.seed, 1));
    let test = dataset(xt, st, &yt, spec.test_size)?;
    Ok(SimData {
        spec: spec.clone(),
        train,
        train_outcomes: y,
        test,
        oracle,
    })
}

pub fn gen_mis(spec: &ScenarioSpec) -> Result<SimData> {
    gen_mis_with_truth(spec, None)
}

/// Dispatches on the scenario family.
pub fn generate(spec: &ScenarioSpec) -> Result<SimData> {
    if spec.id.is_misspecified() {
        gen_mis(spec)
    } else {
        gen_main(spec)
    }
}

/// Raw Z draws from the scenario I..VI covariance, for moment checks.
pub fn draw_main_latent(p: usize, rows: usize, seed: u64) -> Result<DMatrix<f64>> {
    let sampler = CorrelatedNormal::new(&main_covariance(p))?;
    let mut rng = rng_for(seed, 0);
    let mut data = Vec::with_capacity(rows * p);
    let mut e = vec![0.0; p];
    let mut z = vec![0.0; p];
    for _ in 0..rows {
        sampler.sample_into(&mut rng, &mut e, &mut z);
        data.extend_from_slice(&z);
    }
    Ok(DMatrix::from_row_slice(rows, p, &data))
}
