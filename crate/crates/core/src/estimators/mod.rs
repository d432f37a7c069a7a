//! Point estimators of the causal difference in medians.

mod gcomp;
mod ipw;
mod qr;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ModelSpec};
use crate::error::{invalid, Error, Result};
use crate::numerics::{lower_median_in_place, RngStream};

pub use gcomp::{estimate_gcomp_approx, estimate_gcomp_mc, DensityGrid, GridSetting};
pub use ipw::{estimate_ipw, estimate_weighted_qr, normalized_ip_weights, IpWeights, WeightOptions};
pub use qr::estimate_multivariable_qr;

/// Default number of outcome draws per record in Monte Carlo g-computation.
pub const DEFAULT_NUM_DRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Unadjusted,
    Qr,
    Ipw,
    WeightedQr,
    GcompMc,
    GcompApprox,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Unadjusted,
        Method::Qr,
        Method::Ipw,
        Method::WeightedQr,
        Method::GcompMc,
        Method::GcompApprox,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Unadjusted => "unadjusted",
            Method::Qr => "qr",
            Method::Ipw => "ipw",
            Method::WeightedQr => "weighted_qr",
            Method::GcompMc => "gcomp_mc",
            Method::GcompApprox => "gcomp_approx",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| invalid(format!("unknown method {s:?}")))
    }
}

/// Estimated medians of the two potential outcomes and their difference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectEstimate {
    /// Absent for multivariable quantile regression, which only yields a
    /// conditional contrast.
    pub m0: Option<f64>,
    pub m1: Option<f64>,
    pub delta: f64,
    pub method: Method,
    pub diagnostics: BTreeMap<String, f64>,
}

impl EffectEstimate {
    pub(crate) fn from_medians(method: Method, m0: f64, m1: f64) -> Self {
        Self {
            m0: Some(m0),
            m1: Some(m1),
            delta: m1 - m0,
            method,
            diagnostics: BTreeMap::new(),
        }
    }

    fn check_finite(self) -> Result<Self> {
        let all = [Some(self.delta), self.m0, self.m1];
        if all.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("{} produced a non-finite estimate", self.method)));
        }
        Ok(self)
    }
}

/// Difference of the type-1 sample medians of the two exposure arms.
pub fn estimate_unadjusted(data: &Dataset) -> Result<EffectEstimate> {
    let mut arms = [data.arm_outcomes(0), data.arm_outcomes(1)];
    for (arm, ys) in arms.iter().enumerate() {
        if ys.is_empty() {
            return Err(Error::EmptyArm { arm: arm as u8 });
        }
    }
    let m0 = lower_median_in_place(&mut arms[0]);
    let m1 = lower_median_in_place(&mut arms[1]);
    Ok(EffectEstimate::from_medians(Method::Unadjusted, m0, m1))
}

/// A fully configured estimator, so callers such as the bootstrap can apply
/// any method uniformly.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Unadjusted,
    MultivariableQr { spec: ModelSpec },
    Ipw { propensity: ModelSpec, options: WeightOptions },
    WeightedQr { propensity: ModelSpec, options: WeightOptions },
    GcompMc { outcome: ModelSpec, num_draws: usize },
    GcompApprox { outcome: ModelSpec, grid: GridSetting },
}

impl Estimator {
    pub fn method(&self) -> Method {
        match self {
            Estimator::Unadjusted => Method::Unadjusted,
            Estimator::MultivariableQr { .. } => Method::Qr,
            Estimator::Ipw { .. } => Method::Ipw,
            Estimator::WeightedQr { .. } => Method::WeightedQr,
            Estimator::GcompMc { .. } => Method::GcompMc,
            Estimator::GcompApprox { .. } => Method::GcompApprox,
        }
    }

    /// Builds the estimator for `method` from the three model specifications.
    pub fn for_method(
        method: Method,
        quantile: &ModelSpec,
        propensity: &ModelSpec,
        outcome: &ModelSpec,
        num_draws: usize,
        grid: &GridSetting,
    ) -> Self {
        match method {
            Method::Unadjusted => Estimator::Unadjusted,
            Method::Qr => Estimator::MultivariableQr { spec: quantile.clone() },
            Method::Ipw => Estimator::Ipw {
                propensity: propensity.clone(),
                options: WeightOptions::default(),
            },
            Method::WeightedQr => Estimator::WeightedQr {
                propensity: propensity.clone(),
                options: WeightOptions::default(),
            },
            Method::GcompMc => Estimator::GcompMc {
                outcome: outcome.clone(),
                num_draws,
            },
            Method::GcompApprox => Estimator::GcompApprox {
                outcome: outcome.clone(),
                grid: grid.clone(),
            },
        }
    }

    /// Applies the estimator. `rng` is only consumed by Monte Carlo
    /// g-computation.
    pub fn estimate(&self, data: &Dataset, rng: &RngStream) -> Result<EffectEstimate> {
        let est = match self {
            Estimator::Unadjusted => estimate_unadjusted(data),
            Estimator::MultivariableQr { spec } => estimate_multivariable_qr(data, spec),
            Estimator::Ipw { propensity, options } => estimate_ipw(data, propensity, options),
            Estimator::WeightedQr { propensity, options } => {
                estimate_weighted_qr(data, propensity, options)
            }
            Estimator::GcompMc { outcome, num_draws } => {
                estimate_gcomp_mc(data, outcome, *num_draws, rng)
            }
            Estimator::GcompApprox { outcome, grid } => estimate_gcomp_approx(data, outcome, grid),
        }?;
        est.check_finite()
    }

    /// Same estimator with a different number of Monte Carlo draws (no-op
    /// for the other methods).
    pub fn with_num_draws(&self, draws: usize) -> Self {
        match self {
            Estimator::GcompMc { outcome, .. } => Estimator::GcompMc {
                outcome: outcome.clone(),
                num_draws: draws,
            },
            other => other.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(y0: &[f64], y1: &[f64]) -> Dataset {
        let mut y = y0.to_vec();
        y.extend_from_slice(y1);
        let mut a = vec![0u8; y0.len()];
        a.extend(std::iter::repeat(1).take(y1.len()));
        Dataset::new("y", y, "a", a, vec![]).unwrap()
    }

    #[test]
    fn unadjusted_median_difference() {
        let est = estimate_unadjusted(&data(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0])).unwrap();
        assert_eq!((est.m0, est.m1, est.delta), (Some(2.0), Some(4.0), 2.0));
        let est = estimate_unadjusted(&data(&[1.0, 5.0, 3.0, 7.0], &[7.0, 3.0, 5.0, 1.0])).unwrap();
        assert_eq!(est.delta, 0.0);
        // even arm sizes use the lower median
        assert_eq!(est.m0, Some(3.0));
    }

    #[test]
    fn method_labels_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.label().parse::<Method>().unwrap(), m);
        }
        assert!("median".parse::<Method>().is_err());
    }
}
