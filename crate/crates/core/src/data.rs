//! Analysis datasets and declarative model specifications.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::DesignMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

/// Complete-case table with one outcome, one binary exposure and any number
/// of named confounders.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    outcome_name: String,
    exposure_name: String,
    outcome: Vec<f64>,
    exposure: Vec<u8>,
    confounders: Vec<Column>,
}

impl Dataset {
    pub fn new(
        outcome_name: impl Into<String>,
        outcome: Vec<f64>,
        exposure_name: impl Into<String>,
        exposure: Vec<u8>,
        confounders: Vec<Column>,
    ) -> Result<Self> {
        let n = outcome.len();
        if exposure.len() != n {
            return Err(invalid(format!(
                "exposure has {} records, outcome has {n}",
                exposure.len()
            )));
        }
        if outcome.iter().any(|v| !v.is_finite()) {
            return Err(invalid("outcome contains missing or non-finite values"));
        }
        if let Some(bad) = exposure.iter().find(|&&a| a > 1) {
            return Err(invalid(format!("exposure must be 0/1, found {bad}")));
        }
        for arm in [0u8, 1] {
            if !exposure.contains(&arm) {
                return Err(Error::EmptyArm { arm });
            }
        }
        let outcome_name = outcome_name.into();
        let exposure_name = exposure_name.into();
        let mut seen = std::collections::BTreeSet::new();
        seen.insert(outcome_name.clone());
        seen.insert(exposure_name.clone());
        if seen.len() != 2 {
            return Err(invalid("outcome and exposure must be different columns"));
        }
        for c in &confounders {
            if c.values.len() != n {
                return Err(invalid(format!(
                    "confounder {} has {} records, expected {n}",
                    c.name,
                    c.values.len()
                )));
            }
            if c.values.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!(
                    "confounder {} contains missing or non-finite values",
                    c.name
                )));
            }
            if !seen.insert(c.name.clone()) {
                return Err(invalid(format!("duplicate column name {}", c.name)));
            }
        }
        Ok(Self {
            outcome_name,
            exposure_name,
            outcome,
            exposure,
            confounders,
        })
    }

    pub fn len(&self) -> usize {
        self.outcome.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcome.is_empty()
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome_name
    }

    pub fn exposure_name(&self) -> &str {
        &self.exposure_name
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn exposure(&self) -> &[u8] {
        &self.exposure
    }

    pub fn confounders(&self) -> &[Column] {
        &self.confounders
    }

    pub fn confounder(&self, name: &str) -> Result<&[f64]> {
        self.confounders
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| invalid(format!("unknown confounder {name}")))
    }

    pub fn arm_size(&self, arm: u8) -> usize {
        self.exposure.iter().filter(|&&a| a == arm).count()
    }

    /// Outcomes of the records in the given arm, in record order.
    pub fn arm_outcomes(&self, arm: u8) -> Vec<f64> {
        self.outcome
            .iter()
            .zip(&self.exposure)
            .filter(|(_, &a)| a == arm)
            .map(|(&y, _)| y)
            .collect()
    }

    /// Rows `indices` (with repetition) as a new dataset. Fails if the
    /// selection leaves an exposure arm empty.
    pub fn resample(&self, indices: &[usize]) -> Result<Self> {
        let pick = |v: &[f64]| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Dataset::new(
            self.outcome_name.clone(),
            pick(&self.outcome),
            self.exposure_name.clone(),
            indices.iter().map(|&i| self.exposure[i]).collect(),
            self.confounders
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    values: pick(&c.values),
                })
                .collect(),
        )
    }

    /// Same records with the outcome replaced.
    pub fn with_outcome(&self, outcome: Vec<f64>) -> Result<Self> {
        Dataset::new(
            self.outcome_name.clone(),
            outcome,
            self.exposure_name.clone(),
            self.exposure.clone(),
            self.confounders.clone(),
        )
    }

    /// Same records with exposure labels swapped (A ↦ 1 − A).
    pub fn with_flipped_exposure(&self) -> Self {
        let mut out = self.clone();
        out.exposure.iter_mut().for_each(|a| *a = 1 - *a);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Exposure on confounders (logistic).
    Propensity,
    /// Outcome on exposure and confounders, with optional interactions.
    Outcome,
    /// Conditional median of the outcome on exposure and confounders.
    Quantile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeTransform {
    #[default]
    Identity,
    Log,
}

/// Which regressors enter a model. Interactions are always exposure ×
/// confounder and are named by the confounder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub main_effects: Vec<String>,
    #[serde(default)]
    pub interactions: Vec<String>,
    #[serde(default)]
    pub outcome_transform: OutcomeTransform,
}

impl ModelSpec {
    pub fn propensity<S: AsRef<str>>(confounders: &[S]) -> Self {
        Self {
            kind: ModelKind::Propensity,
            main_effects: names(confounders),
            interactions: Vec::new(),
            outcome_transform: OutcomeTransform::Identity,
        }
    }

    pub fn quantile<S: AsRef<str>>(confounders: &[S]) -> Self {
        Self {
            kind: ModelKind::Quantile,
            main_effects: names(confounders),
            interactions: Vec::new(),
            outcome_transform: OutcomeTransform::Identity,
        }
    }

    /// Log-scale outcome model with exposure × confounder interactions.
    pub fn log_outcome<S: AsRef<str>, T: AsRef<str>>(confounders: &[S], interactions: &[T]) -> Self {
        Self {
            kind: ModelKind::Outcome,
            main_effects: names(confounders),
            interactions: names(interactions),
            outcome_transform: OutcomeTransform::Log,
        }
    }

    /// Checks the spec against a dataset and the expected model kind.
    pub fn validate(&self, data: &Dataset, expected: ModelKind) -> Result<()> {
        if self.kind != expected {
            return Err(invalid(format!(
                "expected a {expected:?} model specification, got {:?}",
                self.kind
            )));
        }
        for name in self.main_effects.iter().chain(&self.interactions) {
            if name == data.outcome_name() {
                return Err(invalid(format!("model term {name} is the outcome")));
            }
            if name == data.exposure_name() {
                return Err(invalid(format!(
                    "model term {name} is the exposure; it enters automatically"
                )));
            }
            data.confounder(name)?;
        }
        if self.kind != ModelKind::Outcome && !self.interactions.is_empty() {
            return Err(invalid(format!(
                "{:?} models take main effects only",
                self.kind
            )));
        }
        Ok(())
    }

    /// Design for this spec. For outcome and quantile models the exposure
    /// column is included; `forced_exposure` overrides every record's
    /// exposure (used to predict potential outcomes).
    pub fn design(&self, data: &Dataset, forced_exposure: Option<u8>) -> Result<DesignMatrix> {
        let n = data.len();
        let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
        let exposure: Vec<f64> = match forced_exposure {
            Some(a) => vec![a as f64; n],
            None => data.exposure().iter().map(|&a| a as f64).collect(),
        };
        let with_exposure = self.kind != ModelKind::Propensity;
        if with_exposure {
            columns.push((data.exposure_name().to_string(), exposure.clone()));
        }
        for name in &self.main_effects {
            columns.push((name.clone(), data.confounder(name)?.to_vec()));
        }
        for name in &self.interactions {
            let c = data.confounder(name)?;
            columns.push((
                format!("{}:{name}", data.exposure_name()),
                exposure.iter().zip(c).map(|(a, v)| a * v).collect(),
            ));
        }
        if forced_exposure.is_some() {
            // Prediction designs may legitimately contain all-zero columns
            // (A forced to 0); build them without the fit-time checks.
            let labels: Vec<String> = std::iter::once(crate::numerics::INTERCEPT.to_string())
                .chain(columns.iter().map(|(n, _)| n.clone()))
                .collect();
            let p = labels.len();
            let mut values = Vec::with_capacity(n * p);
            for i in 0..n {
                values.push(1.0);
                values.extend(columns.iter().map(|(_, c)| c[i]));
            }
            return Ok(DesignMatrix::raw(n, labels, values));
        }
        DesignMatrix::with_intercept(n, columns)
    }

    /// Model response on the working scale.
    pub fn response(&self, data: &Dataset) -> Result<Vec<f64>> {
        match self.outcome_transform {
            OutcomeTransform::Identity => Ok(data.outcome().to_vec()),
            OutcomeTransform::Log => {
                if let Some((i, y)) = data.outcome().iter().enumerate().find(|(_, &y)| !(y > 0.0)) {
                    return Err(Error::Domain(format!(
                        "log outcome model needs positive outcomes; record {i} has {y}"
                    )));
                }
                Ok(data.outcome().iter().map(|y| y.ln()).collect())
            }
        }
    }
}

fn names<S: AsRef<str>>(v: &[S]) -> Vec<String> {
    v.iter().map(|s| s.as_ref().to_string()).collect()
}
