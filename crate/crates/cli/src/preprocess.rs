//! Configured feature transforms and the on-disk cache of surrogate fits.

use std::path::PathBuf;

use passreg::data::{log1p_counts, orthogonalize_against_utilization, standardize, Dataset};
use passreg::surrogate::AlphaFit;

use crate::config::{ExperimentConfig, Preprocess};
use crate::error::Result;
use crate::methods::estimate_alpha;
use crate::output::{canonical_json, create_dir, dataset_hash, sha256_hex, write_json};

/// ln(1 + x) on every feature and the surrogate, then residualization of the
/// features on the utilization column, then standardization, each if enabled.
pub fn preprocess(pre: &Preprocess, raw: &Dataset) -> Result<Dataset> {
    let mut ds = raw.clone();
    if pre.log1p {
        let cols: Vec<usize> = (0..ds.n_features()).collect();
        ds = log1p_counts(&ds, &cols, true)?;
    }
    if pre.orthogonalize {
        ds = orthogonalize_against_utilization(&ds, false)?;
    }
    if pre.standardize {
        ds = standardize(&ds)?;
    }
    Ok(ds)
}

/// Cache file for the surrogate fit of `ds` under the configured options.
pub fn alpha_cache_path(cfg: &ExperimentConfig, ds: &Dataset) -> PathBuf {
    let key = sha256_hex(format!("{}\n{}", dataset_hash(ds), canonical_json(&cfg.alpha)).as_bytes());
    cfg.cache_dir().join(format!("alpha_{}.json", &key[..16]))
}

/// Loads the surrogate fit from the cache, or fits and stores it. The flag
/// reports a cache hit.
pub fn load_alpha_cached(cfg: &ExperimentConfig, ds: &Dataset) -> Result<(AlphaFit, bool)> {
    let path = alpha_cache_path(cfg, ds);
    if let Ok(text) = std::fs::read_to_string(&path) {
        match serde_json::from_str::<AlphaFit>(&text) {
            Ok(fit) if fit.alpha.len() == ds.n_features() => {
                log::info!("alpha cache hit: {}", path.display());
                return Ok((fit, true));
            }
            _ => log::warn!("ignoring unreadable alpha cache {}", path.display()),
        }
    }
    log::info!("alpha cache miss: fitting surrogate direction on {} rows", ds.n_obs());
    let fit = estimate_alpha(cfg, ds)?;
    create_dir(&cfg.cache_dir())?;
    write_json(&path, &fit)?;
    Ok((fit, false))
}
