//! Prior adaptive semi-supervised (PASS) logistic regression with a surrogate
//! outcome, the comparison estimators it is usually benchmarked against, the
//! simulation scenarios used to study them, and the evaluation metrics.
//!
//! Layout:
//! - [`data`]: datasets, CSV ingestion and preprocessing transforms.
//! - [`solver`]: the weighted-L1 GLM engine shared by every estimator.
//! - [`surrogate`]: surrogate-direction estimation from all rows.
//! - [`pass`]: the PASS estimator and its cross-validated tuning.
//! - [`baselines`]: supervised and semi-supervised comparison estimators.
//! - [`simgen`]: data-generating scenarios and their truth oracles.
//! - [`eval`]: metrics, fold assignment and replicate aggregation.

pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod pass;
pub mod simgen;
pub mod solver;
pub mod surrogate;

pub use error::{Error, Result};
