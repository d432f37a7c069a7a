//! Estimation of the causal difference in medians, `med[Y¹] − med[Y⁰]`,
//! under measured confounding.
//!
//! The crate contains six point estimators (an unadjusted contrast,
//! multivariable quantile regression, an inverse-probability-weighted
//! median, weighted quantile regression and two g-computation variants),
//! percentile-bootstrap inference, a log-normal data-generating process with
//! a potential-outcome oracle for the true effect, and a simulation harness
//! that computes the usual performance measures with Monte Carlo SEs.

pub mod data;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod inference;
pub mod metrics;
pub mod numerics;
pub mod simgen;

pub use data::{Column, Dataset, ModelKind, ModelSpec, OutcomeTransform};
pub use error::{Error, Result};
pub use estimators::{EffectEstimate, Estimator, Method};
pub use inference::{bootstrap_estimate, percentile_interval, BootstrapConfig, BootstrapSummary};
pub use numerics::RngStream;
