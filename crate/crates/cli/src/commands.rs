use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use causal_medians::estimators::GridSetting;
use causal_medians::harness::{purpose, run_study, StudyPlan, DEFAULT_ORACLE_N};
use causal_medians::simgen::{
    resolve_calibration, true_delta_oracle, CalibrationInfo, ScenarioConfig, TruthResult, MIN_ORACLE_N,
};
use causal_medians::{bootstrap_estimate, BootstrapConfig, Estimator, Method, RngStream};
use serde::Serialize;

use crate::config::{self, EstimateConfig};
use crate::error::{validation, CliError, Result};
use crate::io;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Written next to every output so that a run can be audited and replayed.
#[derive(Debug, Serialize)]
pub struct Manifest<C: Serialize, R: Serialize> {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    /// Fully resolved input configuration, seed included.
    pub config: C,
    pub results: R,
    pub wall_seconds: f64,
}

/// `<out>.manifest.json` for single-file outputs.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn create_parent(out: &Path) -> Result<()> {
    match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

pub struct SimulateArgs {
    pub plan: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub workers: usize,
}

#[derive(Debug, Serialize)]
struct FailureRecord {
    method: Method,
    replicate: usize,
    error: String,
}

#[derive(Debug, Serialize)]
struct ScenarioSummary {
    id: u64,
    confounding: String,
    sigma: f64,
    truth: TruthResult,
    grid: causal_medians::estimators::DensityGrid,
    #[serde(skip_serializing_if = "Option::is_none")]
    calibration: Option<CalibrationInfo>,
    failures: Vec<FailureRecord>,
    wall_seconds: f64,
}

#[derive(Debug, Serialize)]
struct SimulateResults {
    workers: usize,
    scenarios: Vec<ScenarioSummary>,
    failed_scenarios: Vec<causal_medians::harness::ScenarioFailure>,
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let start = Instant::now();
    let mut plan: StudyPlan = config::load(&args.plan)?;
    let seed = args.seed.or(plan.seed).unwrap_or_else(config::fresh_seed);
    plan.seed = Some(seed);
    plan.validate()?;
    create_dir(&args.out)?;

    let step = |total: usize| (total / 10).max(1);
    let progress = |id: u64, done: usize, total: usize| {
        if done % step(total) == 0 || done == total {
            eprintln!("scenario {id}: {done}/{total}");
        }
    };
    let result = run_study(&plan, args.workers, Some(&progress))?;

    io::write_replicates(&args.out.join("replicates.csv"), &result.records)?;
    io::write_metrics(&args.out.join("metrics.csv"), &result.metrics)?;
    io::write_plotdata(&args.out.join("plotdata.csv"), &result)?;

    let scenarios = result
        .scenarios
        .iter()
        .map(|s| ScenarioSummary {
            id: s.config.id,
            confounding: s.config.confounding.label().to_string(),
            sigma: s.config.sigma,
            truth: s.truth.clone(),
            grid: s.grid,
            calibration: s.config.calibration.clone(),
            failures: s
                .failures
                .iter()
                .map(|(method, replicate, error)| FailureRecord {
                    method: *method,
                    replicate: *replicate,
                    error: error.clone(),
                })
                .collect(),
            wall_seconds: s.wall_seconds,
        })
        .collect();
    let failed = result.failed_scenarios.clone();
    let manifest = Manifest {
        command: "simulate",
        version: VERSION,
        seed,
        config: &plan,
        results: SimulateResults {
            workers: args.workers,
            scenarios,
            failed_scenarios: result.failed_scenarios,
        },
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    io::write_json(&args.out.join("manifest.json"), &manifest)?;

    if failed.is_empty() {
        Ok(())
    } else {
        let msgs: Vec<String> = failed
            .iter()
            .map(|f| format!("scenario {}: {}", f.scenario, f.message))
            .collect();
        Err(CliError::Numerical(msgs.join("\n")))
    }
}

pub struct EstimateArgs {
    pub data: Option<PathBuf>,
    pub config: PathBuf,
    pub boot: Option<usize>,
    pub level: Option<f64>,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize)]
pub struct MethodReport {
    pub method: Method,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap_failed: Option<usize>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub diagnostics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct EstimateReport {
    pub data: PathBuf,
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub rows_used: usize,
    pub level: f64,
    pub bootstrap_replicates: usize,
    pub seed: u64,
    pub results: Vec<MethodReport>,
}

pub fn estimate(args: &EstimateArgs) -> Result<EstimateReport> {
    let start = Instant::now();
    let mut cfg: EstimateConfig = config::load(&args.config)?;
    if let Some(b) = args.boot {
        cfg.bootstrap_replicates = b;
    }
    if let Some(l) = args.level {
        cfg.level = l;
    }
    let data_path = match (&args.data, &cfg.data) {
        (Some(p), _) => p.clone(),
        // Relative paths in a config file are relative to that file.
        (None, Some(p)) => args.config.parent().map_or_else(|| p.clone(), |d| d.join(p)),
        (None, None) => return Err(validation("no input data: pass --data or set `data` in the config")),
    };
    let seed = args.seed.or(cfg.seed).unwrap_or_else(config::fresh_seed);
    cfg.seed = Some(seed);
    cfg.data = Some(std::path::absolute(&data_path).unwrap_or(data_path.clone()));
    cfg.validate()?;

    let loaded = io::read_dataset(&data_path, &cfg.outcome, &cfg.exposure, &cfg.confounders)?;
    if loaded.rows_dropped > 0 {
        eprintln!(
            "dropped {} of {} row(s) with missing values",
            loaded.rows_dropped, loaded.rows_read
        );
    }
    let grid = cfg.grid.map_or(GridSetting::DataDriven, GridSetting::Fixed);
    let (qs, ps, os) = (cfg.quantile_spec(), cfg.propensity_spec(), cfg.outcome_spec());
    let boot = BootstrapConfig {
        replicates: cfg.bootstrap_replicates,
        level: cfg.level,
        replicate_draws: cfg.bootstrap_draws,
    };
    let resample = RngStream::from_seed(seed, purpose::BOOTSTRAP);
    let draws = RngStream::from_seed(seed, purpose::GCOMP_DRAWS);

    let results: Vec<MethodReport> = cfg
        .methods
        .iter()
        .map(|&method| {
            let est = Estimator::for_method(method, &qs, &ps, &os, cfg.num_draws, &grid);
            match bootstrap_estimate(&loaded.data, &est, &boot, &resample, &draws) {
                Ok(s) => MethodReport {
                    method,
                    ok: true,
                    m0: s.estimate.m0,
                    m1: s.estimate.m1,
                    delta: Some(s.point),
                    se: Some(s.se),
                    ci_lower: Some(s.ci_lower),
                    ci_upper: Some(s.ci_upper),
                    bootstrap_failed: Some(s.num_failed),
                    diagnostics: s.estimate.diagnostics,
                    error: None,
                },
                Err(e) => MethodReport {
                    method,
                    ok: false,
                    m0: None,
                    m1: None,
                    delta: None,
                    se: None,
                    ci_lower: None,
                    ci_upper: None,
                    bootstrap_failed: None,
                    diagnostics: BTreeMap::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let report = EstimateReport {
        data: cfg.data.clone().unwrap_or_default(),
        rows_read: loaded.rows_read,
        rows_dropped: loaded.rows_dropped,
        rows_used: loaded.data.len(),
        level: cfg.level,
        bootstrap_replicates: cfg.bootstrap_replicates,
        seed,
        results,
    };
    create_parent(&args.out)?;
    io::write_json(&args.out, &report)?;
    let manifest = Manifest {
        command: "estimate",
        version: VERSION,
        seed,
        config: &cfg,
        results: &args.out,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    io::write_json(&sidecar_path(&args.out), &manifest)?;
    Ok(report)
}

pub struct TruthArgs {
    pub scenario: PathBuf,
    pub oracle_n: Option<usize>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct TruthRun<'a> {
    oracle_n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    calibration: Option<&'a CalibrationInfo>,
    truth: &'a TruthResult,
}

pub fn truth(args: &TruthArgs) -> Result<TruthResult> {
    let start = Instant::now();
    let value = config::load_value(&args.scenario)?;
    let seed_given = value.get("master_seed").is_some();
    let mut cfg: ScenarioConfig = config::parse(value, &args.scenario)?;
    let seed = args
        .seed
        .or(seed_given.then_some(cfg.master_seed))
        .unwrap_or_else(config::fresh_seed);
    cfg.master_seed = seed;
    cfg.validate()?;
    let oracle_n = args.oracle_n.unwrap_or(DEFAULT_ORACLE_N);
    if oracle_n < MIN_ORACLE_N {
        return Err(validation(format!("--oracle-n must be at least {MIN_ORACLE_N}")));
    }

    // Same streams as the simulation harness, so truths agree across commands.
    let stream = |p: &str| RngStream::new(seed, cfg.id, 0, p);
    let calibrated = resolve_calibration(&cfg, &stream(purpose::CALIBRATION))?;
    let truth = true_delta_oracle(&calibrated, oracle_n, &stream(purpose::TRUTH))?;

    create_parent(&args.out)?;
    io::write_json(&args.out, &truth)?;
    let manifest = Manifest {
        command: "truth",
        version: VERSION,
        seed,
        config: &cfg,
        results: TruthRun {
            oracle_n,
            calibration: calibrated.calibration.as_ref(),
            truth: &truth,
        },
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    io::write_json(&sidecar_path(&args.out), &manifest)?;
    Ok(truth)
}
