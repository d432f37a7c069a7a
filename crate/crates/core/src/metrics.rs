//! Performance measures of a simulation study, each with its Monte Carlo
//! standard error.
//!
//! With S replicates, estimates θ̂ᵢ, standard errors ŝᵢ and truth θ:
//!
//! | measure | estimate | Monte Carlo SE |
//! |---|---|---|
//! | bias | θ̄ − θ | E/√S |
//! | relative bias (%) | 100·bias/θ | 100·(E/√S)/\|θ\| |
//! | empirical SE (E) | √(Σ(θ̂ᵢ − θ̄)²/(S−1)) | E/√(2(S−1)) |
//! | model SE (M) | √(mean ŝᵢ²) | √(Var(ŝᵢ²)/(4·S·M²)) |
//! | relative error (%) | 100·(M/E − 1) | 100·(M/E)·√((MCSE(M)/M)² + 1/(2(S−1))) |
//! | coverage (%) | 100·mean 1[lᵢ ≤ θ ≤ uᵢ] | 100·√(c(1−c)/S) |
//!
//! The relative-error MCSE is the first-order delta method applied to M/E,
//! treating the two as independent.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::Method;
use crate::simgen::{ConfoundingLabel, TruthResult};

/// Per-dataset output of one method in one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub confounding: ConfoundingLabel,
    pub scenario: u64,
    pub method: Method,
    pub replicate: usize,
    pub delta_hat: f64,
    pub se_hat: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub confounding: ConfoundingLabel,
    pub scenario: u64,
    pub method: Method,
    pub bias: f64,
    pub relative_bias_pct: f64,
    pub empirical_se: f64,
    pub model_se: f64,
    pub relative_error_se_pct: f64,
    pub coverage_pct: f64,
    pub mcse_bias: f64,
    pub mcse_relative_bias_pct: f64,
    pub mcse_empirical_se: f64,
    pub mcse_model_se: f64,
    pub mcse_relative_error_se_pct: f64,
    pub mcse_coverage_pct: f64,
    pub num_replicates: usize,
}

fn mean(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = v.clone().count() as f64;
    v.sum::<f64>() / n
}

pub fn compute_metrics(records: &[ReplicateRecord], truth: &TruthResult) -> Result<MetricsRow> {
    if records.len() < 2 {
        return Err(invalid("performance measures need at least two replicates"));
    }
    let first = &records[0];
    if records
        .iter()
        .any(|r| r.scenario != first.scenario || r.method != first.method)
    {
        return Err(invalid("records mix scenarios or methods"));
    }
    for r in records {
        let vals = [r.delta_hat, r.se_hat, r.ci_lower, r.ci_upper];
        if vals.iter().any(|v| !v.is_finite()) || r.se_hat < 0.0 || r.ci_lower > r.ci_upper {
            return Err(invalid(format!("malformed record for replicate {}", r.replicate)));
        }
    }
    let theta = truth.delta_true;
    if theta == 0.0 {
        return Err(Error::RelativeBiasUndefined);
    }

    // Sorting by replicate fixes the summation order, so the result does
    // not depend on the order records arrive in.
    let mut recs: Vec<&ReplicateRecord> = records.iter().collect();
    recs.sort_by(|a, b| a.replicate.cmp(&b.replicate).then(a.delta_hat.total_cmp(&b.delta_hat)));

    let s = recs.len() as f64;
    let est = recs.iter().map(|r| r.delta_hat);
    let theta_bar = mean(est.clone());
    let bias = theta_bar - theta;
    let emp = (est.map(|d| (d - theta_bar).powi(2)).sum::<f64>() / (s - 1.0)).sqrt();

    let var_hat = recs.iter().map(|r| r.se_hat * r.se_hat);
    let mean_var = mean(var_hat.clone());
    let model = mean_var.sqrt();
    let var_of_var = var_hat.map(|v| (v - mean_var).powi(2)).sum::<f64>() / (s - 1.0);
    let mcse_model = if model > 0.0 {
        (var_of_var / (4.0 * s * mean_var)).sqrt()
    } else {
        0.0
    };

    let (rel_err, mcse_rel_err) = if emp > 0.0 {
        let ratio = model / emp;
        let rel_model = if model > 0.0 { mcse_model / model } else { 0.0 };
        (
            100.0 * (ratio - 1.0),
            100.0 * ratio * (rel_model.powi(2) + 1.0 / (2.0 * (s - 1.0))).sqrt(),
        )
    } else {
        (f64::NAN, f64::NAN)
    };

    let covered = recs
        .iter()
        .filter(|r| r.ci_lower <= theta && theta <= r.ci_upper)
        .count() as f64
        / s;

    let mcse_bias = emp / s.sqrt();
    Ok(MetricsRow {
        confounding: first.confounding,
        scenario: first.scenario,
        method: first.method,
        bias,
        relative_bias_pct: 100.0 * bias / theta,
        empirical_se: emp,
        model_se: model,
        relative_error_se_pct: rel_err,
        coverage_pct: 100.0 * covered,
        mcse_bias,
        mcse_relative_bias_pct: 100.0 * mcse_bias / theta.abs(),
        mcse_empirical_se: emp / (2.0 * (s - 1.0)).sqrt(),
        mcse_model_se: mcse_model,
        mcse_relative_error_se_pct: mcse_rel_err,
        mcse_coverage_pct: 100.0 * (covered * (1.0 - covered) / s).sqrt(),
        num_replicates: recs.len(),
    })
}
