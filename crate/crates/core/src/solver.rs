//! Weighted-L1 penalized GLM solver for squared-error and logistic losses.
//!
//! Minimizes
//!
//! ```text
//! (1/n) Σ loss(yᵢ, b + xᵢᵀc) + λ Σⱼ wⱼ |cⱼ|
//! ```
//!
//! where `loss` is `(y - η)²` or `-yη + log(1 + e^η)`. A weight of 0 leaves a
//! coordinate unpenalized and a weight of `+∞` pins it to zero. The logistic
//! loss is minimized by an outer IRLS loop around cyclic coordinate descent on
//! the weighted quadratic approximation; the squared-error loss goes straight
//! to coordinate descent. Both use an active-set strategy: a full sweep, then
//! repeated sweeps over the nonzero coordinates until they settle.
//!
//! Every fit reports its KKT violation. A fit only counts as converged when the
//! coefficient changes are below tolerance *and* the violation is below
//! [`SolverConfig::kkt_tol`]; otherwise tolerances are tightened and the
//! iterations continue until the sweep budget runs out.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Linear,
    Logistic,
}

/// Per-coordinate penalty weights and the global λ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub lambda: f64,
    #[serde(with = "inf_weights")]
    pub weights: Vec<f64>,
}

impl PenaltySpec {
    pub fn new(lambda: f64, weights: Vec<f64>) -> Result<Self> {
        let spec = PenaltySpec { lambda, weights };
        spec.validate(None)?;
        Ok(spec)
    }

    /// Every coordinate penalized with weight 1.
    pub fn uniform(lambda: f64, width: usize) -> Self {
        PenaltySpec {
            lambda,
            weights: vec![1.0; width],
        }
    }

    pub fn validate(&self, width: Option<usize>) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidPenalty(format!("lambda = {}", self.lambda)));
        }
        if let Some(w) = width {
            if self.weights.len() != w {
                return Err(Error::InvalidPenalty(format!(
                    "{} weights for design width {w}",
                    self.weights.len()
                )));
            }
        }
        if let Some(bad) = self.weights.iter().find(|w| w.is_nan() || **w < 0.0) {
            return Err(Error::InvalidPenalty(format!("weight {bad}")));
        }
        Ok(())
    }

    /// λ Σ wⱼ|cⱼ| over coordinates with finite weight.
    pub fn value(&self, coefs: &[f64]) -> f64 {
        let s: f64 = self
            .weights
            .iter()
            .zip(coefs)
            .filter(|(w, c)| w.is_finite() && **w > 0.0 && **c != 0.0)
            .map(|(w, c)| w * c.abs())
            .sum();
        self.lambda * s
    }
}

/// JSON has no infinity; excluded coordinates are written as `null`.
mod inf_weights {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(w: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<Option<f64>> = w.iter().map(|x| x.is_finite().then_some(*x)).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Coordinate-descent stopping rule on max |Δcoef| within a sweep.
    pub inner_tol: f64,
    /// IRLS stopping rule on max |Δcoef| across an outer iteration.
    pub outer_tol: f64,
    pub max_outer: usize,
    /// Budget of coordinate sweeps summed over all outer iterations.
    pub max_inner_sweeps: usize,
    /// Linear predictors are clamped to [-eta_cap, eta_cap] in the logistic loss.
    pub eta_cap: f64,
    /// Floor on the IRLS working weights π(1-π).
    pub min_working_weight: f64,
    pub kkt_tol: f64,
    /// Record the penalized objective after every sweep (linear) or outer
    /// iteration (logistic).
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            inner_tol: 1e-7,
            outer_tol: 1e-6,
            max_outer: 100,
            max_inner_sweeps: 10_000,
            eta_cap: 30.0,
            min_working_weight: 1e-5,
            kkt_tol: 5e-7,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    /// Looser tolerances for the many fold fits of a cross-validation, where
    /// only out-of-fold predictions matter. The selected model is refit with
    /// the original settings.
    pub fn for_selection(&self) -> SolverConfig {
        SolverConfig {
            inner_tol: self.inner_tol.max(1e-5),
            outer_tol: self.outer_tol.max(1e-4),
            kkt_tol: self.kkt_tol.max(1e-4),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub has_intercept: bool,
    /// Smooth part of the objective, (1/n) Σ loss.
    pub loss_value: f64,
    /// loss_value plus the penalty.
    pub objective: f64,
    pub n_iterations: usize,
    pub converged: bool,
    pub kkt_max_violation: f64,
    /// Set when some linear predictor hit the clamp (quasi-separation).
    pub eta_clamped: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
}

impl GlmFit {
    pub fn linear_predictor(&self, x: &DMatrix<f64>) -> Vec<f64> {
        linear_predictor(x, self.intercept, &self.coefficients)
    }
}

/// Overflow-safe logistic function e^t / (1 + e^t).
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Negative log-likelihood -yη + log(1 + e^η), valid for any y in [0, 1].
pub fn logistic_loss(y: f64, eta: f64) -> f64 {
    if eta > 0.0 {
        (1.0 - y) * eta + (-eta).exp().ln_1p()
    } else {
        -y * eta + eta.exp().ln_1p()
    }
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

pub fn linear_predictor(x: &DMatrix<f64>, intercept: f64, coefs: &[f64]) -> Vec<f64> {
    let n = x.nrows();
    let xs = x.as_slice();
    let mut eta = vec![intercept; n];
    for (j, &c) in coefs.iter().enumerate() {
        if c != 0.0 {
            for (e, &v) in eta.iter_mut().zip(&xs[j * n..(j + 1) * n]) {
                *e += c * v;
            }
        }
    }
    eta
}

/// A design, a response and a loss: everything about a fit except the penalty.
#[derive(Clone, Debug)]
pub struct GlmProblem<'a> {
    pub x: &'a DMatrix<f64>,
    pub y: &'a [f64],
    pub loss: LossKind,
    pub fit_intercept: bool,
    gram: OnceLock<Option<Gram>>,
}

/// Centered cross-products for squared-error fits with many more rows than
/// columns: coordinate updates then cost O(p) instead of O(n).
#[derive(Clone, Debug)]
struct Gram {
    /// X̃ᵀX̃ / n with X̃ the (centered, if fitting an intercept) design.
    xtx: DMatrix<f64>,
    /// X̃ᵀỹ / n.
    xty: Vec<f64>,
    x_mean: Vec<f64>,
    y_mean: f64,
}

/// Largest width for which the Gram matrix is formed.
const GRAM_MAX_WIDTH: usize = 1000;

impl<'a> GlmProblem<'a> {
    /// Checks dimensions and finiteness. Logistic responses may be fractional
    /// in [0, 1]; use [`fit_weighted_l1_logistic`] to insist on 0/1.
    pub fn new(x: &'a DMatrix<f64>, y: &'a [f64], loss: LossKind, fit_intercept: bool) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::Dimension("design has zero rows".into()));
        }
        if y.len() != x.nrows() {
            return Err(Error::Dimension(format!(
                "response length {} != {} design rows",
                y.len(),
                x.nrows()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response"));
        }
        if loss == LossKind::Logistic && y.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::NonBinaryResponse);
        }
        Ok(GlmProblem {
            x,
            y,
            loss,
            fit_intercept,
            gram: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn width(&self) -> usize {
        self.x.ncols()
    }

    fn column(&self, j: usize) -> &'a [f64] {
        let n = self.n();
        &self.x.as_slice()[j * n..(j + 1) * n]
    }

    /// (1/n) Σ loss at the given linear predictor.
    pub fn loss_at(&self, eta: &[f64], eta_cap: f64) -> f64 {
        let n = self.n() as f64;
        match self.loss {
            LossKind::Linear => self.y.iter().zip(eta).map(|(y, e)| (y - e) * (y - e)).sum::<f64>() / n,
            LossKind::Logistic => {
                self.y
                    .iter()
                    .zip(eta)
                    .map(|(&y, &e)| logistic_loss(y, e.clamp(-eta_cap, eta_cap)))
                    .sum::<f64>()
                    / n
            }
        }
    }

    pub fn smooth_loss(&self, intercept: f64, coefs: &[f64], eta_cap: f64) -> f64 {
        self.loss_at(&linear_predictor(self.x, intercept, coefs), eta_cap)
    }

    /// Gradient of the (1/n)-scaled smooth loss: (d/d intercept, d/d coefs).
    pub fn smooth_gradient(&self, intercept: f64, coefs: &[f64], eta_cap: f64) -> (f64, Vec<f64>) {
        let n = self.n() as f64;
        let eta = linear_predictor(self.x, intercept, coefs);
        // m = derivative of the per-row loss with respect to η
        let m: Vec<f64> = match self.loss {
            LossKind::Linear => self.y.iter().zip(&eta).map(|(y, e)| -2.0 * (y - e)).collect(),
            LossKind::Logistic => self
                .y
                .iter()
                .zip(&eta)
                .map(|(y, e)| sigmoid(e.clamp(-eta_cap, eta_cap)) - y)
                .collect(),
        };
        let g0 = m.iter().sum::<f64>() / n;
        let g = (0..self.width())
            .map(|j| self.column(j).iter().zip(&m).map(|(a, b)| a * b).sum::<f64>() / n)
            .collect();
        (g0, g)
    }

    /// Max subgradient-optimality violation over all coordinates.
    pub fn kkt_violation(&self, intercept: f64, coefs: &[f64], penalty: &PenaltySpec, eta_cap: f64) -> f64 {
        let (g0, g) = self.smooth_gradient(intercept, coefs, eta_cap);
        let mut worst = if self.fit_intercept { g0.abs() } else { 0.0 };
        for ((&gj, &c), &w) in g.iter().zip(coefs).zip(&penalty.weights) {
            let v = if w.is_infinite() {
                if c == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                let t = penalty.lambda * w;
                if c == 0.0 {
                    (gj.abs() - t).max(0.0)
                } else {
                    (gj + t * c.signum()).abs()
                }
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Solves the penalized problem, optionally warm-started.
    pub fn fit(&self, penalty: &PenaltySpec, cfg: &SolverConfig, warm: Option<&GlmFit>) -> Result<GlmFit> {
        penalty.validate(Some(self.width()))?;
        if let Some(w) = warm {
            if w.coefficients.len() != self.width() {
                return Err(Error::Dimension("warm start width differs from design".into()));
            }
        }
        Ok(match self.loss {
            LossKind::Linear => self.solve_linear(penalty, cfg, warm),
            LossKind::Logistic => self.solve_logistic(penalty, cfg, warm),
        })
    }

    fn initial_state(&self, penalty: &PenaltySpec, cfg: &SolverConfig, warm: Option<&GlmFit>) -> (f64, Vec<f64>) {
        let excluded = |j: usize| penalty.weights[j].is_infinite();
        match warm {
            Some(w) => {
                let coefs = w
                    .coefficients
                    .iter()
                    .enumerate()
                    .map(|(j, &c)| if excluded(j) { 0.0 } else { c })
                    .collect();
                (if self.fit_intercept { w.intercept } else { 0.0 }, coefs)
            }
            None => {
                let b0 = if !self.fit_intercept {
                    0.0
                } else {
                    let ybar = self.y.iter().sum::<f64>() / self.n() as f64;
                    match self.loss {
                        LossKind::Linear => ybar,
                        LossKind::Logistic => logit(ybar).clamp(-cfg.eta_cap, cfg.eta_cap),
                    }
                };
                (b0, vec![0.0; self.width()])
            }
        }
    }

    fn finish(
        &self,
        penalty: &PenaltySpec,
        cfg: &SolverConfig,
        intercept: f64,
        coefs: Vec<f64>,
        n_iterations: usize,
        converged: bool,
        trace: Vec<f64>,
    ) -> GlmFit {
        let eta = linear_predictor(self.x, intercept, &coefs);
        let loss_value = self.loss_at(&eta, cfg.eta_cap);
        let eta_clamped = self.loss == LossKind::Logistic && eta.iter().any(|e| e.abs() >= cfg.eta_cap);
        let kkt = self.kkt_violation(intercept, &coefs, penalty, cfg.eta_cap);
        GlmFit {
            objective: loss_value + penalty.value(&coefs),
            coefficients: coefs,
            intercept,
            has_intercept: self.fit_intercept,
            loss_value,
            n_iterations,
            converged: converged && kkt <= cfg.kkt_tol,
            kkt_max_violation: kkt,
            eta_clamped,
            trace,
        }
    }

    fn gram(&self) -> Option<&Gram> {
        self.gram
            .get_or_init(|| {
                let (n, p) = self.x.shape();
                if p > GRAM_MAX_WIDTH || n < p {
                    return None;
                }
                let nf = n as f64;
                let (x_mean, y_mean) = if self.fit_intercept {
                    let xm: Vec<f64> = (0..p).map(|j| self.column(j).iter().sum::<f64>() / nf).collect();
                    (xm, self.y.iter().sum::<f64>() / nf)
                } else {
                    (vec![0.0; p], 0.0)
                };
                let mut xc = self.x.clone();
                for (j, mut col) in xc.column_iter_mut().enumerate() {
                    col.add_scalar_mut(-x_mean[j]);
                }
                let yc = DVector::from_iterator(n, self.y.iter().map(|v| v - y_mean));
                let xtx = xc.tr_mul(&xc) / nf;
                let xty = (xc.tr_mul(&yc) / nf).iter().copied().collect();
                Some(Gram {
                    xtx,
                    xty,
                    x_mean,
                    y_mean,
                })
            })
            .as_ref()
    }

    /// Squared-error coordinate descent on the Gram matrix. With an intercept
    /// the problem is solved on centered data and the intercept recovered as
    /// ȳ - x̄ᵀc, which is its exact minimizer for any c.
    fn solve_linear_gram(
        &self,
        gram: &Gram,
        penalty: &PenaltySpec,
        cfg: &SolverConfig,
        warm: Option<&GlmFit>,
    ) -> GlmFit {
        let p = self.width();
        let (_, mut coefs) = self.initial_state(penalty, cfg, warm);
        let thresholds = thresholds(penalty, 0.5);
        let g = &gram.xtx;
        // u = X̃ᵀ(ỹ - X̃c)/n
        let mut u = gram.xty.clone();
        for (k, &c) in coefs.iter().enumerate() {
            if c != 0.0 {
                for (j, uj) in u.iter_mut().enumerate() {
                    *uj -= g[(j, k)] * c;
                }
            }
        }
        let intercept_of = |c: &[f64]| {
            if self.fit_intercept {
                gram.y_mean - gram.x_mean.iter().zip(c).map(|(a, b)| a * b).sum::<f64>()
            } else {
                0.0
            }
        };
        let mut trace = Vec::new();
        let mut sweeps = 0;
        let mut tol = cfg.inner_tol;
        let mut converged = false;
        let sweep = |coefs: &mut [f64], u: &mut [f64], active_only: bool| -> f64 {
            let mut max_change = 0.0f64;
            for j in 0..p {
                let t = thresholds[j];
                if t.is_infinite() || (active_only && coefs[j] == 0.0 && t > 0.0) {
                    continue;
                }
                let a = g[(j, j)];
                if a <= 0.0 {
                    continue;
                }
                let old = coefs[j];
                let new = soft_threshold(u[j] + a * old, t) / a;
                let d = new - old;
                if d != 0.0 {
                    coefs[j] = new;
                    let col = g.column(j);
                    for (uk, gk) in u.iter_mut().zip(col.iter()) {
                        *uk -= d * gk;
                    }
                    max_change = max_change.max(d.abs());
                }
            }
            max_change
        };
        'outer: while sweeps < cfg.max_inner_sweeps {
            // full sweep, then active-set sweeps until they settle
            loop {
                let d = sweep(&mut coefs, &mut u, false);
                sweeps += 1;
                if cfg.record_trace {
                    trace.push(self.smooth_loss(intercept_of(&coefs), &coefs, cfg.eta_cap) + penalty.value(&coefs));
                }
                if d < tol {
                    break;
                }
                loop {
                    if sweeps >= cfg.max_inner_sweeps {
                        break 'outer;
                    }
                    let d = sweep(&mut coefs, &mut u, true);
                    sweeps += 1;
                    if cfg.record_trace {
                        trace.push(
                            self.smooth_loss(intercept_of(&coefs), &coefs, cfg.eta_cap) + penalty.value(&coefs),
                        );
                    }
                    if d < tol {
                        break;
                    }
                }
                if sweeps >= cfg.max_inner_sweeps {
                    break 'outer;
                }
            }
            if self.kkt_violation(intercept_of(&coefs), &coefs, penalty, cfg.eta_cap) <= cfg.kkt_tol {
                converged = true;
                break;
            }
            tol *= 0.1;
            if tol < 1e-15 {
                break;
            }
        }
        let b0 = intercept_of(&coefs);
        self.finish(penalty, cfg, b0, coefs, sweeps, converged, trace)
    }

    fn solve_linear(&self, penalty: &PenaltySpec, cfg: &SolverConfig, warm: Option<&GlmFit>) -> GlmFit {
        if let Some(gram) = self.gram() {
            return self.solve_linear_gram(gram, penalty, cfg, warm);
        }
        let n = self.n();
        let (mut b0, mut coefs) = self.initial_state(penalty, cfg, warm);
        let eta = linear_predictor(self.x, b0, &coefs);
        let mut r: Vec<f64> = self.y.iter().zip(&eta).map(|(y, e)| y - e).collect();
        // (1/n)Σr² + λΣw|c| = 2 * [(1/2n)Σr² + (λ/2)Σw|c|]
        let thresholds = thresholds(penalty, 0.5);
        let curv: Vec<f64> = (0..self.width())
            .map(|j| self.column(j).iter().map(|v| v * v).sum::<f64>() / n as f64)
            .collect();
        let mut cd = CoordinateDescent {
            problem: self,
            weights: None,
            weight_sum: n as f64,
            curvature: &curv,
            thresholds: &thresholds,
            intercept_cap: f64::INFINITY,
        };

        let mut trace = Vec::new();
        let mut on_sweep = |r: &[f64], coefs: &[f64]| {
            if cfg.record_trace {
                let loss = r.iter().map(|v| v * v).sum::<f64>() / n as f64;
                trace.push(loss + penalty.value(coefs));
            }
        };
        let mut sweeps = 0;
        let mut tol = cfg.inner_tol;
        let mut converged = false;
        while sweeps < cfg.max_inner_sweeps {
            let settled = cd.run(&mut b0, &mut coefs, &mut r, tol, cfg.max_inner_sweeps, &mut sweeps, &mut on_sweep);
            if !settled {
                break;
            }
            if self.kkt_violation(b0, &coefs, penalty, cfg.eta_cap) <= cfg.kkt_tol {
                converged = true;
                break;
            }
            tol *= 0.1;
            if tol < 1e-15 {
                break;
            }
        }
        self.finish(penalty, cfg, b0, coefs, sweeps, converged, trace)
    }

    fn solve_logistic(&self, penalty: &PenaltySpec, cfg: &SolverConfig, warm: Option<&GlmFit>) -> GlmFit {
        let n = self.n();
        let nf = n as f64;
        let (mut b0, mut coefs) = self.initial_state(penalty, cfg, warm);
        let thresholds = thresholds(penalty, 1.0);
        let cap = cfg.eta_cap;
        let mut eta = linear_predictor(self.x, b0, &coefs);
        let mut obj = self.loss_at(&eta, cap) + penalty.value(&coefs);
        let mut trace = Vec::new();
        if cfg.record_trace {
            trace.push(obj);
        }

        let mut sweeps = 0;
        let mut outer_tol = cfg.outer_tol;
        let mut inner_tol = cfg.inner_tol;
        let mut converged = false;
        let mut w = vec![0.0; n];
        let mut r = vec![0.0; n];
        let mut curv = vec![0.0; self.width()];
        let mut last_change = f64::INFINITY;
        for _ in 0..cfg.max_outer {
            if sweeps >= cfg.max_inner_sweeps {
                break;
            }
            for i in 0..n {
                let p = sigmoid(eta[i].clamp(-cap, cap));
                w[i] = (p * (1.0 - p)).max(cfg.min_working_weight);
                r[i] = (self.y[i] - p) / w[i];
            }
            let weight_sum: f64 = w.iter().sum();
            for (j, c) in curv.iter_mut().enumerate() {
                *c = if thresholds[j].is_infinite() {
                    0.0
                } else {
                    self.column(j).iter().zip(&w).map(|(x, wi)| wi * x * x).sum::<f64>() / nf
                };
            }
            let (old_b0, old_coefs) = (b0, coefs.clone());
            let mut cd = CoordinateDescent {
                problem: self,
                weights: Some(&w),
                weight_sum,
                curvature: &curv,
                thresholds: &thresholds,
                intercept_cap: cap,
            };
            // Early quadratic approximations are solved loosely; the tolerance
            // tracks the size of the last outer step down to `inner_tol`.
            let tol_now = inner_tol.max((0.01 * last_change).min(1e-3));
            cd.run(&mut b0, &mut coefs, &mut r, tol_now, cfg.max_inner_sweeps, &mut sweeps, &mut |_, _| {});

            // Damp the Newton-type step if it failed to decrease the objective.
            let (new_b0, new_coefs) = (b0, coefs.clone());
            let mut step = 1.0;
            loop {
                eta = linear_predictor(self.x, b0, &coefs);
                let candidate = self.loss_at(&eta, cap) + penalty.value(&coefs);
                if candidate <= obj + 1e-12 * (1.0 + obj.abs()) || step < 1e-6 {
                    obj = candidate;
                    break;
                }
                step *= 0.5;
                b0 = old_b0 + step * (new_b0 - old_b0);
                for j in 0..coefs.len() {
                    coefs[j] = old_coefs[j] + step * (new_coefs[j] - old_coefs[j]);
                }
            }
            if cfg.record_trace {
                trace.push(obj);
            }

            let change = coefs
                .iter()
                .zip(&old_coefs)
                .map(|(a, b)| (a - b).abs())
                .fold((b0 - old_b0).abs(), f64::max);
            last_change = change;
            if change < outer_tol {
                if self.kkt_violation(b0, &coefs, penalty, cap) <= cfg.kkt_tol {
                    converged = true;
                    break;
                }
                outer_tol = (outer_tol * 0.1).max(1e-14);
                inner_tol = (inner_tol * 0.1).max(1e-15);
            }
        }
        self.finish(penalty, cfg, b0, coefs, sweeps, converged, trace)
    }

    /// Fit with only the weight-0 coordinates (and intercept) free, then the
    /// smallest λ at which every penalized coordinate stays at zero.
    pub fn lambda_max(&self, weights: &[f64], cfg: &SolverConfig) -> Result<(f64, GlmFit)> {
        let null_weights: Vec<f64> = weights
            .iter()
            .map(|&w| if w == 0.0 { 0.0 } else { f64::INFINITY })
            .collect();
        let null = self.fit(&PenaltySpec::new(0.0, null_weights)?, cfg, None)?;
        let (_, g) = self.smooth_gradient(null.intercept, &null.coefficients, cfg.eta_cap);
        let lmax = g
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w > 0.0 && w.is_finite())
            .map(|(gj, w)| gj.abs() / w)
            .fold(0.0, f64::max);
        Ok((lmax, null))
    }

    /// Fits along a decreasing λ grid with warm starts. Grid points at or above
    /// this problem's λ_max return the null fit itself, so their penalized
    /// coefficients are exactly zero.
    pub fn fit_grid(&self, weights: &[f64], grid: &[f64], cfg: &SolverConfig) -> Result<Vec<GlmFit>> {
        let (lmax, null) = self.lambda_max(weights, cfg)?;
        let mut fits: Vec<GlmFit> = Vec::with_capacity(grid.len());
        for &lambda in grid {
            let penalty = PenaltySpec::new(lambda, weights.to_vec())?;
            let fit = if lambda >= lmax {
                self.finish(
                    &penalty,
                    cfg,
                    null.intercept,
                    null.coefficients.clone(),
                    null.n_iterations,
                    null.converged,
                    Vec::new(),
                )
            } else {
                let warm = fits.last().unwrap_or(&null);
                self.fit(&penalty, cfg, Some(warm))?
            };
            fits.push(fit);
        }
        Ok(fits)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Per-coordinate soft-threshold levels; +∞ marks coordinates pinned at zero.
fn thresholds(penalty: &PenaltySpec, scale: f64) -> Vec<f64> {
    penalty
        .weights
        .iter()
        .map(|&w| {
            if w.is_infinite() {
                f64::INFINITY
            } else {
                scale * penalty.lambda * w
            }
        })
        .collect()
}

/// Cyclic coordinate descent on (1/2n) Σ wᵢ (zᵢ - b - xᵢᵀc)² + Σ tⱼ|cⱼ|, with
/// the working residual `r = z - η` updated in place.
struct CoordinateDescent<'p, 'a> {
    problem: &'p GlmProblem<'a>,
    weights: Option<&'p [f64]>,
    weight_sum: f64,
    curvature: &'p [f64],
    thresholds: &'p [f64],
    intercept_cap: f64,
}

impl CoordinateDescent<'_, '_> {
    fn update_intercept(&self, b0: &mut f64, r: &mut [f64]) -> f64 {
        let num: f64 = match self.weights {
            Some(w) => w.iter().zip(r.iter()).map(|(a, b)| a * b).sum(),
            None => r.iter().sum(),
        };
        let target = (*b0 + num / self.weight_sum).clamp(-self.intercept_cap, self.intercept_cap);
        let d = target - *b0;
        if d != 0.0 {
            *b0 = target;
            r.iter_mut().for_each(|v| *v -= d);
        }
        d.abs()
    }

    fn update(&self, j: usize, coefs: &mut [f64], r: &mut [f64]) -> f64 {
        let a = self.curvature[j];
        let old = coefs[j];
        let xj = self.problem.column(j);
        let new = if a <= 0.0 || self.thresholds[j].is_infinite() {
            0.0
        } else {
            let n = xj.len() as f64;
            let g = match self.weights {
                Some(w) => xj.iter().zip(w).zip(r.iter()).map(|((x, w), r)| x * w * r).sum::<f64>(),
                None => xj.iter().zip(r.iter()).map(|(x, r)| x * r).sum::<f64>(),
            } / n;
            soft_threshold(g + a * old, self.thresholds[j]) / a
        };
        let d = new - old;
        if d != 0.0 {
            coefs[j] = new;
            for (ri, &x) in r.iter_mut().zip(xj) {
                *ri -= d * x;
            }
        }
        d.abs()
    }

    fn sweep(&self, b0: &mut f64, coefs: &mut [f64], r: &mut [f64], active_only: bool) -> f64 {
        let mut max_change = 0.0f64;
        if self.problem.fit_intercept {
            max_change = max_change.max(self.update_intercept(b0, r));
        }
        for j in 0..coefs.len() {
            if self.thresholds[j].is_infinite() {
                continue;
            }
            if active_only && coefs[j] == 0.0 && self.thresholds[j] > 0.0 {
                continue;
            }
            max_change = max_change.max(self.update(j, coefs, r));
        }
        max_change
    }

    /// Full sweeps alternating with active-set sweeps until a full sweep moves
    /// nothing by more than `tol`. Returns false when the sweep budget ran out.
    #[allow(clippy::too_many_arguments)]
    fn run(
        &mut self,
        b0: &mut f64,
        coefs: &mut [f64],
        r: &mut [f64],
        tol: f64,
        budget: usize,
        sweeps: &mut usize,
        on_sweep: &mut dyn FnMut(&[f64], &[f64]),
    ) -> bool {
        loop {
            if *sweeps >= budget {
                return false;
            }
            let d = self.sweep(b0, coefs, r, false);
            *sweeps += 1;
            on_sweep(r, coefs);
            if d < tol {
                return true;
            }
            loop {
                if *sweeps >= budget {
                    return false;
                }
                let d = self.sweep(b0, coefs, r, true);
                *sweeps += 1;
                on_sweep(r, coefs);
                if d < tol {
                    break;
                }
            }
        }
    }
}

/// Squared-error fit: minimizes (1/n)‖y - b - Xc‖² + λ Σ wⱼ|cⱼ|.
pub fn fit_weighted_l1_linear(
    x: &DMatrix<f64>,
    y: &[f64],
    penalty: &PenaltySpec,
    fit_intercept: bool,
) -> Result<GlmFit> {
    GlmProblem::new(x, y, LossKind::Linear, fit_intercept)?.fit(penalty, &SolverConfig::default(), None)
}

/// Logistic fit on a 0/1 response: minimizes (1/n) Σ ℓ(yᵢ, ηᵢ) + λ Σ wⱼ|cⱼ|.
pub fn fit_weighted_l1_logistic(
    x: &DMatrix<f64>,
    y: &[f64],
    penalty: &PenaltySpec,
    fit_intercept: bool,
) -> Result<GlmFit> {
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::NonBinaryResponse);
    }
    GlmProblem::new(x, y, LossKind::Logistic, fit_intercept)?.fit(penalty, &SolverConfig::default(), None)
}

/// Recomputes the KKT violation of `fit` on (x, y, penalty) with the default clamp.
pub fn kkt_check(fit: &GlmFit, x: &DMatrix<f64>, y: &[f64], penalty: &PenaltySpec, loss: LossKind) -> Result<f64> {
    let problem = GlmProblem::new(x, y, loss, fit.has_intercept)?;
    penalty.validate(Some(problem.width()))?;
    Ok(problem.kkt_violation(fit.intercept, &fit.coefficients, penalty, SolverConfig::default().eta_cap))
}

/// Geometric grid from `lambda_max` down to `lambda_max * min_ratio`.
pub fn geometric_grid(lambda_max: f64, n_lambda: usize, min_ratio: f64) -> Vec<f64> {
    if n_lambda == 1 {
        return vec![lambda_max];
    }
    let step = min_ratio.ln() / (n_lambda - 1) as f64;
    (0..n_lambda).map(|k| lambda_max * (step * k as f64).exp()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathOptions {
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            n_lambda: 100,
            lambda_min_ratio: 1e-4,
        }
    }
}

/// Warm-started fits along the geometric grid anchored at λ_max.
pub fn regularization_path(
    problem: &GlmProblem<'_>,
    weights: &[f64],
    path: &PathOptions,
    cfg: &SolverConfig,
) -> Result<Vec<(f64, GlmFit)>> {
    if path.n_lambda < 2 {
        return Err(Error::InvalidArgument("n_lambda must be at least 2".into()));
    }
    if !(path.lambda_min_ratio > 0.0 && path.lambda_min_ratio < 1.0) {
        return Err(Error::InvalidArgument("lambda_min_ratio must lie in (0, 1)".into()));
    }
    if weights.len() != problem.width() {
        return Err(Error::InvalidPenalty("weights length differs from design width".into()));
    }
    let (lmax, _) = problem.lambda_max(weights, cfg)?;
    let grid = geometric_grid(lmax, path.n_lambda, path.lambda_min_ratio);
    let fits = problem.fit_grid(weights, &grid, cfg)?;
    Ok(grid.into_iter().zip(fits).collect())
}

/// Unpenalized logistic regression of `y` on (1, x) by damped Newton steps.
/// For low-dimensional designs only: the Hessian is formed densely. The linear
/// predictor is clamped to ±`eta_cap` as in the penalized solver, which keeps
/// separable data from driving the coefficients to infinity.
pub fn fit_logistic_newton(x: &DMatrix<f64>, y: &[f64], cfg: &SolverConfig) -> Result<GlmFit> {
    let problem = GlmProblem::new(x, y, LossKind::Logistic, true)?;
    let (n, k) = x.shape();
    let mut design = DMatrix::from_element(n, k + 1, 1.0);
    design.columns_mut(1, k).copy_from(x);
    let cap = cfg.eta_cap;
    let ybar = y.iter().sum::<f64>() / n as f64;
    let mut theta = DVector::zeros(k + 1);
    theta[0] = logit(ybar.clamp(1e-6, 1.0 - 1e-6));
    let objective = |t: &DVector<f64>| -> f64 {
        let eta = &design * t;
        problem.loss_at(eta.as_slice(), cap)
    };
    let mut current = objective(&theta);
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..cfg.max_outer {
        iterations = it + 1;
        let eta = &design * &theta;
        let mut resid = DVector::zeros(n);
        let mut w = DVector::zeros(n);
        for i in 0..n {
            let e = eta[i];
            // Rows past the clamp contribute no gradient or curvature.
            if e.abs() < cap {
                let pi = sigmoid(e);
                resid[i] = pi - y[i];
                w[i] = pi * (1.0 - pi);
            }
        }
        let grad = design.tr_mul(&resid) / n as f64;
        if grad.amax() < cfg.kkt_tol * 1e-2 {
            converged = true;
            break;
        }
        let mut weighted = design.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let mut hess = design.tr_mul(&weighted) / n as f64;
        let ridge = 1e-12 * (1.0 + hess.diagonal().amax());
        for j in 0..=k {
            hess[(j, j)] += ridge;
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => grad.clone(),
        };
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-10 {
            let candidate = &theta - &step * t;
            let value = objective(&candidate);
            if value <= current {
                let moved = (&candidate - &theta).amax();
                theta = candidate;
                current = value;
                accepted = true;
                if moved < 1e-12 {
                    converged = true;
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted || converged {
            converged = true;
            break;
        }
    }
    let coefs: Vec<f64> = theta.iter().skip(1).copied().collect();
    let mut fit = problem.finish(
        &PenaltySpec::new(0.0, vec![0.0; k])?,
        cfg,
        theta[0],
        coefs,
        iterations,
        converged,
        Vec::new(),
    );
    fit.converged = converged;
    Ok(fit)
}
