//! Regression solvers, weighted quantiles, densities and keyed random
//! streams shared by every estimator.

mod design;
pub mod gauss_sum;
pub(crate) mod linalg;
mod logistic;
mod ols;
mod quantile;
mod quantreg;
mod rng;

pub use design::{DesignMatrix, INTERCEPT};
pub use logistic::fit_logistic;
pub use ols::fit_ols;
pub use quantile::{
    lower_median, lower_median_in_place, type7_quantile_sorted, weighted_quantile,
};
pub use quantreg::{check_loss, fit_quantile_reg, quantile_objective};
pub use rng::{DomainTag, RngStream};

use crate::error::{Error, Result};

/// Coefficients and fit metadata shared by all regression solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub coefficients: Vec<f64>,
    /// Residual standard error; only linear fits define it.
    pub residual_scale: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Logistic function 1/(1 + e^{−x}), evaluated so it cannot overflow.
#[inline]
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    INV_SQRT_2PI / sigma * (-0.5 * z * z).exp()
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Density of a log-normal variable whose logarithm is Normal(mu, sigma).
pub fn lognormal_pdf(y: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!("log-normal density needs y > 0, got {y}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("log-normal density needs sigma > 0, got {sigma}")));
    }
    let z = (y.ln() - mu) / sigma;
    Ok(INV_SQRT_2PI / (y * sigma) * (-0.5 * z * z).exp())
}
