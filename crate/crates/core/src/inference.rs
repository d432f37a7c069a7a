//! Nonparametric percentile bootstrap.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::estimators::{EffectEstimate, Estimator};
use crate::numerics::{type7_quantile_sorted, RngStream};

/// Largest tolerated share of failed bootstrap replicates.
pub const MAX_FAILED_SHARE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
    /// Monte Carlo draws per record inside bootstrap replicates; `None`
    /// keeps the estimator's own setting.
    pub replicate_draws: Option<usize>,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 1000,
            level: 0.95,
            replicate_draws: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapSummary {
    /// Full-data estimate.
    pub estimate: EffectEstimate,
    pub point: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub level: f64,
    pub num_replicates: usize,
    pub num_failed: usize,
}

/// Equal-tailed percentile interval of `sorted` at confidence `level`,
/// using linear interpolation between order statistics.
pub fn percentile_interval(sorted: &[f64], level: f64) -> (f64, f64) {
    let alpha = (1.0 - level) / 2.0;
    (
        type7_quantile_sorted(sorted, alpha),
        type7_quantile_sorted(sorted, 1.0 - alpha),
    )
}

/// Resampling indices for one replicate.
pub fn resample_indices(n: usize, rng: &RngStream) -> Vec<usize> {
    let mut g = rng.rng();
    (0..n).map(|_| g.random_range(0..n)).collect()
}

/// Applies `estimator` to the data and to `config.replicates` resamples.
///
/// Replicate `b` draws its indices from `rng.substream(b)`; any randomness
/// the estimator itself needs comes from `draws.substream(b + 1)` (and
/// `draws.substream(0)` for the full-data estimate). Replicates run in
/// parallel and are reduced in index order, so the result does not depend
/// on scheduling.
pub fn bootstrap_estimate(
    data: &Dataset,
    estimator: &Estimator,
    config: &BootstrapConfig,
    rng: &RngStream,
    draws: &RngStream,
) -> Result<BootstrapSummary> {
    if config.replicates < 2 {
        return Err(invalid("the bootstrap needs at least two replicates"));
    }
    if !(config.level > 0.0 && config.level < 1.0) {
        return Err(invalid(format!("confidence level must lie in (0, 1), got {}", config.level)));
    }
    let estimate = estimator.estimate(data, &draws.substream(0))?;
    let inner = match config.replicate_draws {
        Some(k) => estimator.with_num_draws(k),
        None => estimator.clone(),
    };

    let n = data.len();
    let outcomes: Vec<Option<f64>> = (0..config.replicates)
        .into_par_iter()
        .map(|b| {
            let idx = resample_indices(n, &rng.substream(b as u64));
            let sample = data.resample(&idx).ok()?;
            inner
                .estimate(&sample, &draws.substream(b as u64 + 1))
                .ok()
                .map(|e| e.delta)
        })
        .collect();

    let mut deltas: Vec<f64> = outcomes.iter().flatten().copied().collect();
    let failed = config.replicates - deltas.len();
    if failed as f64 > MAX_FAILED_SHARE * config.replicates as f64 || deltas.len() < 2 {
        return Err(Error::BootstrapInstability {
            failed,
            total: config.replicates,
        });
    }
    let k = deltas.len() as f64;
    let mean = deltas.iter().sum::<f64>() / k;
    let se = (deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
    deltas.sort_by(f64::total_cmp);
    let (ci_lower, ci_upper) = percentile_interval(&deltas, config.level);
    Ok(BootstrapSummary {
        point: estimate.delta,
        estimate,
        se,
        ci_lower,
        ci_upper,
        level: config.level,
        num_replicates: config.replicates,
        num_failed: failed,
    })
}
