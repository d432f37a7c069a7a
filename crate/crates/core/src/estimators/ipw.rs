use serde::{Deserialize, Serialize};

use super::{EffectEstimate, Method};
use crate::data::{Dataset, ModelKind, ModelSpec};
use crate::error::{invalid, Error, Result};
use crate::numerics::{fit_logistic, fit_quantile_reg, weighted_quantile, DesignMatrix};

/// Fitted propensities at or beyond this distance from 0 or 1 are treated as
/// positivity violations.
pub const POSITIVITY_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightOptions {
    /// Clamp fitted propensities to `[t, 1 − t]` before weighting. Off by
    /// default.
    #[serde(default)]
    pub trim: Option<f64>,
}

/// Inverse-probability weights, normalised to sum to one within each arm.
#[derive(Debug, Clone, PartialEq)]
pub struct IpWeights {
    /// Weight of each record in the unexposed arm (0 for exposed records).
    pub w0: Vec<f64>,
    /// Weight of each record in the exposed arm (0 for unexposed records).
    pub w1: Vec<f64>,
    pub propensity: Vec<f64>,
    pub max_weight: f64,
    pub min_propensity: f64,
    pub max_propensity: f64,
}

pub fn normalized_ip_weights(
    data: &Dataset,
    ps_spec: &ModelSpec,
    options: &WeightOptions,
) -> Result<IpWeights> {
    ps_spec.validate(data, ModelKind::Propensity)?;
    if let Some(t) = options.trim {
        if !(t > 0.0 && t < 0.5) {
            return Err(invalid(format!("trim threshold must lie in (0, 0.5), got {t}")));
        }
    }
    let x: DesignMatrix = ps_spec.design(data, None)?;
    let fit = fit_logistic(&x, data.exposure())?;
    let mut propensity: Vec<f64> = x
        .predict(&fit.coefficients)
        .into_iter()
        .map(crate::numerics::expit)
        .collect();
    for (record, &pi) in propensity.iter().enumerate() {
        if !(pi > POSITIVITY_EPS && pi < 1.0 - POSITIVITY_EPS) {
            return Err(Error::Positivity {
                record,
                propensity: pi,
            });
        }
    }
    if let Some(t) = options.trim {
        propensity.iter_mut().for_each(|p| *p = p.clamp(t, 1.0 - t));
    }

    let n = data.len();
    let mut w0 = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    for (i, &a) in data.exposure().iter().enumerate() {
        if a == 1 {
            w1[i] = 1.0 / propensity[i];
        } else {
            w0[i] = 1.0 / (1.0 - propensity[i]);
        }
    }
    for w in [&mut w0, &mut w1] {
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
    }
    let max_weight = w0.iter().chain(&w1).copied().fold(0.0, f64::max);
    let (min_propensity, max_propensity) = propensity
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    Ok(IpWeights {
        w0,
        w1,
        propensity,
        max_weight,
        min_propensity,
        max_propensity,
    })
}

fn weight_diagnostics(est: &mut EffectEstimate, w: &IpWeights) {
    est.diagnostics.insert("max_weight".into(), w.max_weight);
    est.diagnostics.insert("min_propensity".into(), w.min_propensity);
    est.diagnostics.insert("max_propensity".into(), w.max_propensity);
}

/// Weighted median of each arm under normalised inverse-probability weights.
pub fn estimate_ipw(
    data: &Dataset,
    ps_spec: &ModelSpec,
    options: &WeightOptions,
) -> Result<EffectEstimate> {
    let w = normalized_ip_weights(data, ps_spec, options)?;
    let arm_median = |arm: u8, weights: &[f64]| {
        let (ys, ws): (Vec<f64>, Vec<f64>) = data
            .outcome()
            .iter()
            .zip(data.exposure())
            .zip(weights)
            .filter(|((_, &a), _)| a == arm)
            .map(|((&y, _), &w)| (y, w))
            .unzip();
        weighted_quantile(&ys, &ws, 0.5)
    };
    let m0 = arm_median(0, &w.w0)?;
    let m1 = arm_median(1, &w.w1)?;
    let mut est = EffectEstimate::from_medians(Method::Ipw, m0, m1);
    weight_diagnostics(&mut est, &w);
    Ok(est)
}

/// Median regression of Y on intercept and exposure, weighted by the
/// normalised inverse-probability weights.
pub fn estimate_weighted_qr(
    data: &Dataset,
    ps_spec: &ModelSpec,
    options: &WeightOptions,
) -> Result<EffectEstimate> {
    let w = normalized_ip_weights(data, ps_spec, options)?;
    let weights: Vec<f64> = w.w0.iter().zip(&w.w1).map(|(a, b)| a + b).collect();
    let exposure: Vec<f64> = data.exposure().iter().map(|&a| a as f64).collect();
    let x = DesignMatrix::with_intercept(
        data.len(),
        vec![(data.exposure_name().to_string(), exposure)],
    )?;
    let fit = fit_quantile_reg(&x, data.outcome(), 0.5, Some(&weights))?;
    let (b0, b1) = (fit.coefficients[0], fit.coefficients[1]);
    let mut est = EffectEstimate {
        m0: Some(b0),
        m1: Some(b0 + b1),
        delta: b1,
        method: Method::WeightedQr,
        diagnostics: Default::default(),
    };
    weight_diagnostics(&mut est, &w);
    Ok(est)
}
