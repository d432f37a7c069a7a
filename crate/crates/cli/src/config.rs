//! Configuration files. Configs are TOML; a JSON run manifest written by a
//! previous run is accepted in place of a config, in which case its
//! `config` member is used. See `docs/CONFIG.md` for the grammar.

use std::path::{Path, PathBuf};

use causal_medians::estimators::{DensityGrid, DEFAULT_NUM_DRAWS};
use causal_medians::{Method, ModelSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{validation, CliError, Result};

/// Reads a TOML config or a JSON manifest into a JSON value.
pub fn load_value(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let mut v: Value = serde_json::from_str(&text)
            .map_err(|e| validation(format!("{}: {e}", path.display())))?;
        match v.get_mut("config") {
            Some(c) => Ok(c.take()),
            None => Ok(v),
        }
    } else {
        let t: toml::Table =
            toml::from_str(&text).map_err(|e| validation(format!("{}: {e}", path.display())))?;
        serde_json::to_value(t).map_err(|e| validation(format!("{}: {e}", path.display())))
    }
}

pub fn parse<T: DeserializeOwned>(value: Value, path: &Path) -> Result<T> {
    serde_json::from_value(value).map_err(|e| validation(format!("{}: {e}", path.display())))
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    parse(load_value(path)?, path)
}

/// Fresh seed for runs that did not specify one. Kept below 2⁶³ so that it
/// can be written back into a TOML file.
pub fn fresh_seed() -> u64 {
    rand::random::<u64>() >> 1
}

/// Covariates of one working model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Terms {
    /// Main-effect confounders; all mapped confounders when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confounders: Option<Vec<String>>,
    /// Confounders that interact with the exposure (outcome model only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interactions: Vec<String>,
}

impl Terms {
    fn main_effects<'a>(&'a self, all: &'a [String]) -> &'a [String] {
        self.confounders.as_deref().unwrap_or(all)
    }
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_draws() -> usize {
    DEFAULT_NUM_DRAWS
}
fn default_boot() -> usize {
    1000
}
fn default_level() -> f64 {
    0.95
}

/// Settings of `cmed estimate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    /// Input CSV; `--data` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    pub outcome: String,
    pub exposure: String,
    #[serde(default)]
    pub confounders: Vec<String>,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub quantile_model: Terms,
    #[serde(default)]
    pub propensity_model: Terms,
    #[serde(default)]
    pub outcome_model: Terms,
    #[serde(default = "default_draws")]
    pub num_draws: usize,
    /// Fixed grid for approximate g-computation; data-driven when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<DensityGrid>,
    #[serde(default = "default_boot")]
    pub bootstrap_replicates: usize,
    /// Monte Carlo draws inside bootstrap replicates; `num_draws` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap_draws: Option<usize>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl EstimateConfig {
    pub fn validate(&self) -> Result<()> {
        let mut names: Vec<&str> = self.confounders.iter().map(String::as_str).collect();
        names.push(&self.outcome);
        names.push(&self.exposure);
        let k = names.len();
        names.sort_unstable();
        names.dedup();
        if names.len() != k {
            return Err(validation("outcome, exposure and confounder columns must be distinct"));
        }
        let mut methods = self.methods.clone();
        methods.sort();
        methods.dedup();
        if methods.is_empty() || methods.len() != self.methods.len() {
            return Err(validation("methods must be a non-empty list without repeats"));
        }
        for terms in [&self.quantile_model, &self.propensity_model, &self.outcome_model] {
            for name in terms.main_effects(&self.confounders).iter().chain(&terms.interactions) {
                if !self.confounders.contains(name) {
                    return Err(validation(format!("model term {name} is not a mapped confounder")));
                }
            }
        }
        if !self.quantile_model.interactions.is_empty() || !self.propensity_model.interactions.is_empty() {
            return Err(validation("interactions are only allowed in outcome_model"));
        }
        if self.num_draws == 0 || self.bootstrap_draws == Some(0) {
            return Err(validation("Monte Carlo draw counts must be positive"));
        }
        if self.bootstrap_replicates < 2 {
            return Err(validation("need at least 2 bootstrap replicates"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(validation(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if let Some(g) = self.grid {
            DensityGrid::new(g.lower, g.step, g.upper)?;
        }
        Ok(())
    }

    pub fn quantile_spec(&self) -> ModelSpec {
        ModelSpec::quantile(self.quantile_model.main_effects(&self.confounders))
    }

    pub fn propensity_spec(&self) -> ModelSpec {
        ModelSpec::propensity(self.propensity_model.main_effects(&self.confounders))
    }

    pub fn outcome_spec(&self) -> ModelSpec {
        ModelSpec::log_outcome(
            self.outcome_model.main_effects(&self.confounders),
            &self.outcome_model.interactions,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> EstimateConfig {
        let t: toml::Table = toml::from_str(text).unwrap();
        serde_json::from_value(serde_json::to_value(t).unwrap()).unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let c = cfg("outcome = \"y\"\nexposure = \"a\"\nconfounders = [\"c1\", \"c2\"]\n");
        c.validate().unwrap();
        assert_eq!(c.methods.len(), 6);
        assert_eq!(c.level, 0.95);
        assert_eq!(c.quantile_spec().main_effects, vec!["c1", "c2"]);
        assert!(c.outcome_spec().interactions.is_empty());
    }

    #[test]
    fn model_terms_must_be_mapped() {
        let c = cfg(
            "outcome = \"y\"\nexposure = \"a\"\nconfounders = [\"c1\"]\n\
             [outcome_model]\ninteractions = [\"c9\"]\n",
        );
        assert!(c.validate().is_err());
        let c = cfg("outcome = \"y\"\nexposure = \"y\"\n");
        assert!(c.validate().is_err());
    }

    #[test]
    fn manifest_config_member_is_used() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        std::fs::write(&p, r#"{"command":"x","config":{"outcome":"y","exposure":"a"}}"#).unwrap();
        let c: EstimateConfig = load(&p).unwrap();
        assert_eq!(c.outcome, "y");
    }
}
