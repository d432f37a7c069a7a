//! Simulation-study driver: scenarios × replicates × methods, with
//! bootstrap inference per dataset and aggregation into performance
//! measures.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ModelKind, ModelSpec};
use crate::error::{invalid, Error, Result};
use crate::estimators::{DensityGrid, Estimator, GridSetting, Method, DEFAULT_NUM_DRAWS};
use crate::inference::{bootstrap_estimate, BootstrapConfig, MAX_FAILED_SHARE};
use crate::metrics::{compute_metrics, MetricsRow, ReplicateRecord};
use crate::numerics::RngStream;
use crate::simgen::{
    generate_dataset, resolve_calibration, simulation_grid, true_delta_oracle, ScenarioConfig,
    TruthResult, CONFOUNDERS,
};

pub const DEFAULT_ORACLE_N: usize = 2_000_000;
pub const DEFAULT_BOOTSTRAP_REPLICATES: usize = 200;
/// Monte Carlo draws per record inside bootstrap replicates. The full-data
/// estimate always uses `num_draws`.
pub const DEFAULT_BOOTSTRAP_DRAWS: usize = 100;

/// Stream purposes used by the harness.
pub mod purpose {
    pub const GENERATION: &str = "generation";
    pub const GCOMP_DRAWS: &str = "gcomp-draws";
    pub const BOOTSTRAP: &str = "bootstrap";
    pub const TRUTH: &str = "truth";
    pub const GRID: &str = "grid";
    pub const CALIBRATION: &str = "calibration";
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_boot() -> usize {
    DEFAULT_BOOTSTRAP_REPLICATES
}
fn default_level() -> f64 {
    0.95
}
fn default_draws() -> usize {
    DEFAULT_NUM_DRAWS
}
fn default_boot_draws() -> Option<usize> {
    Some(DEFAULT_BOOTSTRAP_DRAWS)
}
fn default_oracle_n() -> usize {
    DEFAULT_ORACLE_N
}
fn default_quantile() -> ModelSpec {
    ModelSpec::quantile(&CONFOUNDERS)
}
fn default_propensity() -> ModelSpec {
    ModelSpec::propensity(&CONFOUNDERS)
}
fn default_outcome() -> ModelSpec {
    ModelSpec::log_outcome(&CONFOUNDERS, &["C1", "C2"])
}

/// Everything needed to run a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyPlan {
    /// Overrides every scenario's `master_seed` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub scenarios: Vec<ScenarioConfig>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_boot")]
    pub bootstrap_replicates: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_draws")]
    pub num_draws: usize,
    #[serde(default = "default_boot_draws")]
    pub bootstrap_draws: Option<usize>,
    #[serde(default = "default_oracle_n")]
    pub oracle_n: usize,
    /// Fixed g-computation grid; derived per scenario when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<DensityGrid>,
    #[serde(default = "default_quantile")]
    pub quantile_model: ModelSpec,
    #[serde(default = "default_propensity")]
    pub propensity_model: ModelSpec,
    #[serde(default = "default_outcome")]
    pub outcome_model: ModelSpec,
}

impl StudyPlan {
    pub fn new(scenarios: Vec<ScenarioConfig>) -> Self {
        Self {
            seed: None,
            scenarios,
            methods: default_methods(),
            bootstrap_replicates: default_boot(),
            level: default_level(),
            num_draws: default_draws(),
            bootstrap_draws: default_boot_draws(),
            oracle_n: default_oracle_n(),
            grid: None,
            quantile_model: default_quantile(),
            propensity_model: default_propensity(),
            outcome_model: default_outcome(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() || self.methods.is_empty() {
            return Err(invalid("a study needs at least one scenario and one method"));
        }
        let mut ids: Vec<u64> = self.scenarios.iter().map(|s| s.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.scenarios.len() {
            return Err(invalid("scenario ids must be distinct"));
        }
        for s in &self.scenarios {
            s.validate()?;
        }
        let mut methods = self.methods.clone();
        methods.sort();
        methods.dedup();
        if methods.len() != self.methods.len() {
            return Err(invalid("methods are listed more than once"));
        }
        let expected = [
            (&self.quantile_model, ModelKind::Quantile),
            (&self.propensity_model, ModelKind::Propensity),
            (&self.outcome_model, ModelKind::Outcome),
        ];
        for (spec, kind) in expected {
            if spec.kind != kind {
                return Err(invalid(format!("{kind:?} model section has kind {:?}", spec.kind)));
            }
            for name in spec.main_effects.iter().chain(&spec.interactions) {
                if !CONFOUNDERS.contains(&name.as_str()) {
                    return Err(invalid(format!(
                        "model term {name} is not a generated confounder ({CONFOUNDERS:?})"
                    )));
                }
            }
        }
        if self.bootstrap_replicates < 2 || !(self.level > 0.0 && self.level < 1.0) {
            return Err(invalid("need at least 2 bootstrap replicates and a level in (0, 1)"));
        }
        if self.num_draws == 0 || self.bootstrap_draws == Some(0) {
            return Err(invalid("Monte Carlo draw counts must be positive"));
        }
        Ok(())
    }

    fn estimator(&self, method: Method, grid: DensityGrid) -> Estimator {
        Estimator::for_method(
            method,
            &self.quantile_model,
            &self.propensity_model,
            &self.outcome_model,
            self.num_draws,
            &GridSetting::Fixed(grid),
        )
    }
}

/// Results of one scenario that ran to completion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioOutcome {
    /// Scenario after calibration.
    pub config: ScenarioConfig,
    pub truth: TruthResult,
    pub grid: DensityGrid,
    /// (method, replicate, message) for every failed estimate.
    pub failures: Vec<(Method, usize, String)>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioFailure {
    pub scenario: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    /// Sorted by (scenario, method, replicate).
    pub records: Vec<ReplicateRecord>,
    /// Sorted by (scenario, method).
    pub metrics: Vec<MetricsRow>,
    pub scenarios: Vec<ScenarioOutcome>,
    pub failed_scenarios: Vec<ScenarioFailure>,
}

/// Progress notification: scenario id, datasets finished, datasets total.
pub type Progress<'a> = &'a (dyn Fn(u64, usize, usize) + Sync);

/// Runs the study on a pool of `workers` threads. Results do not depend on
/// the worker count.
pub fn run_study(plan: &StudyPlan, workers: usize, progress: Option<Progress>) -> Result<StudyResult> {
    plan.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        let mut out = StudyResult {
            records: Vec::new(),
            metrics: Vec::new(),
            scenarios: Vec::new(),
            failed_scenarios: Vec::new(),
        };
        for cfg in &plan.scenarios {
            match run_scenario(plan, cfg, progress) {
                Ok((outcome, records, metrics)) => {
                    out.records.extend(records);
                    out.metrics.extend(metrics);
                    out.scenarios.push(outcome);
                }
                Err(e) => out.failed_scenarios.push(ScenarioFailure {
                    scenario: cfg.id,
                    message: e.to_string(),
                }),
            }
        }
        out.records
            .sort_by(|a, b| (a.scenario, a.method, a.replicate).cmp(&(b.scenario, b.method, b.replicate)));
        out.metrics.sort_by(|a, b| (a.scenario, a.method).cmp(&(b.scenario, b.method)));
        Ok(out)
    })
}

type ScenarioRun = (ScenarioOutcome, Vec<ReplicateRecord>, Vec<MetricsRow>);

fn run_scenario(plan: &StudyPlan, cfg: &ScenarioConfig, progress: Option<Progress>) -> Result<ScenarioRun> {
    let start = Instant::now();
    let mut cfg = cfg.clone();
    if let Some(seed) = plan.seed {
        cfg.master_seed = seed;
    }
    let seed = cfg.master_seed;
    let id = cfg.id;
    let stream = |replicate: usize, purpose: &str| RngStream::new(seed, id, replicate as u64, purpose);

    let cfg = resolve_calibration(&cfg, &stream(0, purpose::CALIBRATION))?;
    let truth = true_delta_oracle(&cfg, plan.oracle_n, &stream(0, purpose::TRUTH))?;
    let grid = match plan.grid {
        Some(g) => g,
        None => simulation_grid(&cfg, &stream(0, purpose::GRID))?,
    };
    let estimators: Vec<Estimator> = plan.methods.iter().map(|&m| plan.estimator(m, grid)).collect();
    let boot = BootstrapConfig {
        replicates: plan.bootstrap_replicates,
        level: plan.level,
        replicate_draws: plan.bootstrap_draws,
    };

    let done = AtomicUsize::new(0);
    let per_replicate: Vec<Result<Vec<std::result::Result<ReplicateRecord, String>>>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let data = generate_dataset(&cfg, &stream(r, purpose::GENERATION))?;
            let boot_rng = stream(r, purpose::BOOTSTRAP);
            let draws = stream(r, purpose::GCOMP_DRAWS);
            let row = estimators
                .iter()
                .map(|est| {
                    bootstrap_estimate(&data, est, &boot, &boot_rng, &draws)
                        .map(|s| ReplicateRecord {
                            confounding: cfg.confounding,
                            scenario: id,
                            method: est.method(),
                            replicate: r,
                            delta_hat: s.point,
                            se_hat: s.se,
                            ci_lower: s.ci_lower,
                            ci_upper: s.ci_upper,
                        })
                        .map_err(|e| e.to_string())
                })
                .collect();
            let k = done.fetch_add(1, Ordering::Relaxed) + 1;
            if let Some(p) = progress {
                p(id, k, cfg.replicates);
            }
            Ok(row)
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (r, row) in per_replicate.into_iter().enumerate() {
        for (est, res) in estimators.iter().zip(row?) {
            match res {
                Ok(rec) => records.push(rec),
                Err(msg) => failures.push((est.method(), r, msg)),
            }
        }
    }
    let mut metrics = Vec::new();
    for est in &estimators {
        let method = est.method();
        let failed = failures.iter().filter(|f| f.0 == method).count();
        if failed as f64 > MAX_FAILED_SHARE * cfg.replicates as f64 {
            let first = failures.iter().find(|f| f.0 == method).map(|f| f.2.clone());
            return Err(Error::Domain(format!(
                "{method} failed on {failed} of {} datasets in scenario {id}; first error: {}",
                cfg.replicates,
                first.unwrap_or_default()
            )));
        }
        let recs: Vec<ReplicateRecord> = records.iter().filter(|r| r.method == method).cloned().collect();
        if recs.len() >= 2 {
            metrics.push(compute_metrics(&recs, &truth)?);
        }
    }
    Ok((
        ScenarioOutcome {
            config: cfg,
            truth,
            grid,
            failures,
            wall_seconds: start.elapsed().as_secs_f64(),
        },
        records,
        metrics,
    ))
}
