//! Data-generating process for the simulation study, the potential-outcome
//! oracle for the true effect, and calibration of confounding strength.
//!
//! Records are generated sequentially:
//!
//! ```text
//! C1 ~ Bernoulli(p1)
//! C2 ~ Normal(m2, s2)
//! C3 ~ Bernoulli(expit(γ3 · (1, C1, C2)))
//! C4 ~ Bernoulli(expit(γ4 · (1, C1, C2, C3)))
//! C5 ~ Normal(γ5 · (1, C1, C2, C3, C4), s5)
//! A  ~ Bernoulli(expit(α · (1, C1, …, C5)))
//! log Y ~ Normal(β0 + βA·A + β·C + βA1·A·C1 + βA2·A·C2, σ)
//! ```
//!
//! Normal distributions are parameterised by mean and standard deviation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Column, Dataset};
use crate::error::{invalid, Error, Result};
use crate::estimators::DensityGrid;
use crate::numerics::{expit, lower_median_in_place, normal_cdf, normal_pdf, RngStream};

pub const CONFOUNDERS: [&str; 5] = ["C1", "C2", "C3", "C4", "C5"];
pub const EXPOSURE: &str = "A";
pub const OUTCOME: &str = "Y";

/// Outcome coefficients that calibration may rescale.
pub const TUNABLE: [&str; 8] = ["C1", "C2", "C3", "C4", "C5", "A", "A:C1", "A:C2"];

/// Coefficients of the log-outcome model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeCoefficients {
    pub intercept: f64,
    pub a: f64,
    /// Main effects of C1..C5.
    pub c: [f64; 5],
    pub a_c1: f64,
    pub a_c2: f64,
}

impl OutcomeCoefficients {
    #[inline]
    pub fn mean(&self, a: f64, c: &[f64; 5]) -> f64 {
        self.intercept
            + self.a * a
            + self.c.iter().zip(c).map(|(b, v)| b * v).sum::<f64>()
            + a * (self.a_c1 * c[0] + self.a_c2 * c[1])
    }

    fn get_mut(&mut self, name: &str) -> Result<&mut f64> {
        Ok(match name {
            "A" => &mut self.a,
            "A:C1" => &mut self.a_c1,
            "A:C2" => &mut self.a_c2,
            _ => match CONFOUNDERS.iter().position(|c| *c == name) {
                Some(k) => &mut self.c[k],
                None => {
                    return Err(invalid(format!(
                        "{name:?} is not an outcome-model coefficient (expected one of {TUNABLE:?})"
                    )))
                }
            },
        })
    }
}

/// Full coefficient set of the data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpCoefficients {
    pub c1_prob: f64,
    pub c2_mean: f64,
    pub c2_sd: f64,
    /// Logit of P(C3 = 1) on (1, C1, C2).
    pub c3_logit: [f64; 3],
    /// Logit of P(C4 = 1) on (1, C1, C2, C3).
    pub c4_logit: [f64; 4],
    /// Mean of C5 on (1, C1, C2, C3, C4).
    pub c5_mean: [f64; 5],
    pub c5_sd: f64,
    /// Logit of P(A = 1) on (1, C1, …, C5).
    pub exposure_logit: [f64; 6],
    pub outcome: OutcomeCoefficients,
}

impl Default for DgpCoefficients {
    fn default() -> Self {
        Self {
            c1_prob: 0.51,
            c2_mean: 35.17,
            c2_sd: 5.47,
            c3_logit: [-1.41, 0.78, 0.04],
            c4_logit: [-1.55, 0.47, 0.03, 0.80],
            c5_mean: [1.91, 0.03, 0.01, 0.05, 0.12],
            c5_sd: 0.63,
            exposure_logit: [-2.39, 0.04, -0.05, -0.09, 0.51, 1.07],
            outcome: OutcomeCoefficients {
                intercept: 1.40,
                a: 0.49,
                c: [0.03, -0.01, 0.01, 0.03, 0.26],
                a_c1: 0.12,
                a_c2: -0.01,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfoundingLabel {
    Weak,
    Strong,
    #[default]
    Custom,
}

impl ConfoundingLabel {
    pub fn label(self) -> &'static str {
        match self {
            ConfoundingLabel::Weak => "weak",
            ConfoundingLabel::Strong => "strong",
            ConfoundingLabel::Custom => "custom",
        }
    }
}

/// Request to rescale outcome coefficients until the unadjusted estimator
/// has the given relative bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationRequest {
    pub target_rel_bias_pct: f64,
    #[serde(default = "default_tunable")]
    pub tunable: Vec<String>,
}

fn default_tunable() -> Vec<String> {
    CONFOUNDERS.iter().map(|s| s.to_string()).collect()
}

/// Outcome of a calibration, kept with the scenario for the record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationInfo {
    pub target_rel_bias_pct: f64,
    pub achieved_rel_bias_pct: f64,
    pub factor: f64,
    pub tunable: Vec<String>,
}

fn default_n() -> usize {
    1000
}

fn default_replicates() -> usize {
    1000
}

/// One simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Scenario number; part of every random-stream key.
    #[serde(default)]
    pub id: u64,
    #[serde(default)]
    pub confounding: ConfoundingLabel,
    pub sigma: f64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub coefficients: DgpCoefficients,
    /// Calibrate the coefficients before use (see [`calibrate_confounding`]).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate: Option<CalibrationRequest>,
    /// Filled in once calibration has run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationInfo>,
}

impl ScenarioConfig {
    /// Table defaults with the given outcome SD.
    pub fn with_sigma(sigma: f64) -> Self {
        Self {
            id: 0,
            confounding: ConfoundingLabel::Custom,
            sigma,
            n: default_n(),
            replicates: default_replicates(),
            master_seed: 0,
            coefficients: DgpCoefficients::default(),
            calibrate: None,
            calibration: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        // A degenerate σ = 0 is allowed for custom scenarios only.
        let sigma_ok = self.sigma > 0.0
            || (self.sigma == 0.0 && self.confounding == ConfoundingLabel::Custom);
        if !sigma_ok || !self.sigma.is_finite() {
            return Err(invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.n < 50 {
            return Err(invalid(format!("n must be at least 50, got {}", self.n)));
        }
        if self.replicates < 1 {
            return Err(invalid("replicates must be at least 1"));
        }
        let c = &self.coefficients;
        if !(c.c1_prob >= 0.0 && c.c1_prob <= 1.0) {
            return Err(invalid("c1_prob must lie in [0, 1]"));
        }
        if !(c.c2_sd >= 0.0 && c.c5_sd >= 0.0) {
            return Err(invalid("standard deviations must be nonnegative"));
        }
        let all = [c.c1_prob, c.c2_mean, c.c2_sd, c.c5_sd]
            .into_iter()
            .chain(c.c3_logit)
            .chain(c.c4_logit)
            .chain(c.c5_mean)
            .chain(c.exposure_logit)
            .chain([c.outcome.intercept, c.outcome.a, c.outcome.a_c1, c.outcome.a_c2])
            .chain(c.outcome.c);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(invalid("coefficients must be finite"));
        }
        if let Some(req) = &self.calibrate {
            if !req.target_rel_bias_pct.is_finite() || req.tunable.is_empty() {
                return Err(invalid("calibration needs a finite target and tunable coefficients"));
            }
            let mut probe = self.coefficients.outcome.clone();
            for name in &req.tunable {
                probe.get_mut(name)?;
            }
        }
        Ok(())
    }
}

#[inline]
fn bernoulli(rng: &mut ChaCha8Rng, p: f64) -> f64 {
    f64::from(u8::from(rng.random::<f64>() < p))
}

#[inline]
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws one confounder vector.
#[inline]
fn draw_confounders(c: &DgpCoefficients, rng: &mut ChaCha8Rng) -> [f64; 5] {
    let c1 = bernoulli(rng, c.c1_prob);
    let c2 = c.c2_mean + c.c2_sd * normal(rng);
    let g = &c.c3_logit;
    let c3 = bernoulli(rng, expit(g[0] + g[1] * c1 + g[2] * c2));
    let g = &c.c4_logit;
    let c4 = bernoulli(rng, expit(g[0] + g[1] * c1 + g[2] * c2 + g[3] * c3));
    let g = &c.c5_mean;
    let c5 = g[0] + g[1] * c1 + g[2] * c2 + g[3] * c3 + g[4] * c4 + c.c5_sd * normal(rng);
    [c1, c2, c3, c4, c5]
}

#[inline]
fn exposure_logit(c: &DgpCoefficients, v: &[f64; 5]) -> f64 {
    let g = &c.exposure_logit;
    g[0] + g[1..].iter().zip(v).map(|(b, x)| b * x).sum::<f64>()
}

/// One dataset of `cfg.n` records with columns C1..C5, A and Y.
pub fn generate_dataset(cfg: &ScenarioConfig, rng: &RngStream) -> Result<Dataset> {
    cfg.validate()?;
    let coef = &cfg.coefficients;
    let mut gen = rng.rng();
    let n = cfg.n;
    let mut cols: [Vec<f64>; 5] = Default::default();
    let mut a = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let c = draw_confounders(coef, &mut gen);
        let ai = bernoulli(&mut gen, expit(exposure_logit(coef, &c)));
        let log_y = coef.outcome.mean(ai, &c) + cfg.sigma * normal(&mut gen);
        for (col, v) in cols.iter_mut().zip(c) {
            col.push(v);
        }
        a.push(ai as u8);
        y.push(log_y.exp());
    }
    let confounders = CONFOUNDERS
        .iter()
        .zip(cols)
        .map(|(name, values)| Column {
            name: name.to_string(),
            values,
        })
        .collect();
    Dataset::new(OUTCOME, y, EXPOSURE, a, confounders)
}

/// True medians of the two potential outcomes and their difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthResult {
    pub delta_true: f64,
    pub m0_true: f64,
    pub m1_true: f64,
    pub oracle_n: usize,
    pub mc_se: f64,
}

pub const MIN_ORACLE_N: usize = 100_000;
const ORACLE_FOLDS: usize = 10;

/// Potential-outcome oracle: for each of `oracle_n` simulated confounder
/// vectors both Y⁰ and Y¹ are drawn (independent noise), and the true
/// medians are the sample medians of those draws. The Monte Carlo SE comes
/// from ten equal folds.
pub fn true_delta_oracle(
    cfg: &ScenarioConfig,
    oracle_n: usize,
    rng: &RngStream,
) -> Result<TruthResult> {
    cfg.validate()?;
    if oracle_n < MIN_ORACLE_N {
        return Err(invalid(format!("oracle_n must be at least {MIN_ORACLE_N}, got {oracle_n}")));
    }
    let (mut log_y0, mut log_y1) = potential_log_outcomes(cfg, oracle_n, rng);

    let fold = oracle_n / ORACLE_FOLDS;
    let fold_deltas: Vec<f64> = (0..ORACLE_FOLDS)
        .map(|k| {
            let r = k * fold..(k + 1) * fold;
            let m0 = lower_median_in_place(&mut log_y0[r.clone()].to_vec()).exp();
            let m1 = lower_median_in_place(&mut log_y1[r].to_vec()).exp();
            m1 - m0
        })
        .collect();
    let mean = fold_deltas.iter().sum::<f64>() / ORACLE_FOLDS as f64;
    let var = fold_deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>()
        / (ORACLE_FOLDS - 1) as f64;

    let m0_true = lower_median_in_place(&mut log_y0).exp();
    let m1_true = lower_median_in_place(&mut log_y1).exp();
    Ok(TruthResult {
        delta_true: m1_true - m0_true,
        m0_true,
        m1_true,
        oracle_n,
        mc_se: (var / ORACLE_FOLDS as f64).sqrt(),
    })
}

fn potential_log_outcomes(cfg: &ScenarioConfig, n: usize, rng: &RngStream) -> (Vec<f64>, Vec<f64>) {
    let coef = &cfg.coefficients;
    let mut gen = rng.rng();
    let mut log_y0 = Vec::with_capacity(n);
    let mut log_y1 = Vec::with_capacity(n);
    for _ in 0..n {
        let c = draw_confounders(coef, &mut gen);
        log_y0.push(coef.outcome.mean(0.0, &c) + cfg.sigma * normal(&mut gen));
        log_y1.push(coef.outcome.mean(1.0, &c) + cfg.sigma * normal(&mut gen));
    }
    (log_y0, log_y1)
}

/// Density grid for approximate g-computation in a scenario: step 0.01 from
/// 0.01 up to at least 8, extended to the 0.9995 quantile of the pooled
/// potential outcomes so the captured mass check passes.
pub fn simulation_grid(cfg: &ScenarioConfig, rng: &RngStream) -> Result<DensityGrid> {
    cfg.validate()?;
    let (mut y0, y1) = potential_log_outcomes(cfg, 200_000, rng);
    y0.extend(y1);
    let k = (0.9995 * y0.len() as f64) as usize;
    let (_, q, _) = y0.select_nth_unstable_by(k, f64::total_cmp);
    let upper = (q.exp() * 100.0).ceil() / 100.0;
    DensityGrid::new(0.01, 0.01, upper.max(8.0))
}

/// Confounder sample with propensities, reused across calibration steps.
struct CalibrationSample {
    confounders: Vec<[f64; 5]>,
    propensity: Vec<f64>,
}

impl CalibrationSample {
    fn draw(cfg: &ScenarioConfig, n: usize, rng: &RngStream) -> Self {
        let mut gen = rng.rng();
        let confounders: Vec<[f64; 5]> =
            (0..n).map(|_| draw_confounders(&cfg.coefficients, &mut gen)).collect();
        let propensity = confounders
            .iter()
            .map(|c| expit(exposure_logit(&cfg.coefficients, c)))
            .collect();
        Self {
            confounders,
            propensity,
        }
    }

    /// Population relative bias (%) of the unadjusted contrast.
    ///
    /// Exposure and outcome noise are integrated out analytically: given C,
    /// log Y under arm a is normal, so each arm-conditional and each
    /// potential-outcome CDF is a weighted mixture of normal CDFs whose
    /// median is found by Newton's method.
    fn relative_bias(&self, outcome: &OutcomeCoefficients, sigma: f64) -> Result<f64> {
        let mu0: Vec<f64> = self.confounders.iter().map(|c| outcome.mean(0.0, c)).collect();
        let mu1: Vec<f64> = self.confounders.iter().map(|c| outcome.mean(1.0, c)).collect();
        let ones = vec![1.0; mu0.len()];
        let not_p: Vec<f64> = self.propensity.iter().map(|p| 1.0 - p).collect();
        let truth = mixture_median(&mu1, &ones, sigma) - mixture_median(&mu0, &ones, sigma);
        let observed =
            mixture_median(&mu1, &self.propensity, sigma) - mixture_median(&mu0, &not_p, sigma);
        if truth == 0.0 {
            return Err(Error::RelativeBiasUndefined);
        }
        Ok(100.0 * (observed - truth) / truth)
    }
}

/// Median of Σ wᵢ LogNormal(μᵢ, σ) / Σ wᵢ.
fn mixture_median(mu: &[f64], w: &[f64], sigma: f64) -> f64 {
    let total: f64 = w.iter().sum();
    let mut t = mu.iter().zip(w).map(|(m, w)| m * w).sum::<f64>() / total;
    for _ in 0..50 {
        let (mut f, mut d) = (0.0, 0.0);
        for (m, wi) in mu.iter().zip(w) {
            f += wi * normal_cdf((t - m) / sigma);
            d += wi * normal_pdf(t, *m, sigma);
        }
        let step = (f / total - 0.5) / (d / total);
        t -= step;
        if step.abs() < 1e-13 * t.abs().max(1.0) {
            break;
        }
    }
    t.exp()
}

pub const CALIBRATION_DRAWS: usize = 500_000;
const FACTOR_BRACKET: (f64, f64) = (0.01, 10.0);
const CALIBRATION_TOL_PCT: f64 = 0.02;

/// Rescales the `tunable` outcome coefficients by a common factor so that
/// the unadjusted estimator's large-sample relative bias equals
/// `target_rel_bias_pct`.
///
/// The relative bias for a given factor is computed on a fixed sample of
/// `CALIBRATION_DRAWS` confounder vectors with exposure and outcome noise
/// integrated out, which makes it a smooth, deterministic function of the
/// factor; the factor is then found by bisection on a log scale over
/// [0.01, 10].
pub fn calibrate_confounding(
    cfg: &ScenarioConfig,
    target_rel_bias_pct: f64,
    tunable: &[String],
    label: ConfoundingLabel,
    rng: &RngStream,
) -> Result<ScenarioConfig> {
    cfg.validate()?;
    if !(cfg.sigma > 0.0) {
        return Err(invalid("calibration needs sigma > 0"));
    }
    if tunable.is_empty() {
        return Err(invalid("no tunable coefficients given"));
    }
    let base = cfg.coefficients.outcome.clone();
    let mut originals = Vec::with_capacity(tunable.len());
    for name in tunable {
        originals.push(*base.clone().get_mut(name)?);
    }
    let mut out = cfg.clone();
    out.confounding = label;
    out.calibrate = Some(CalibrationRequest {
        target_rel_bias_pct,
        tunable: tunable.to_vec(),
    });
    if originals.iter().all(|v| *v == 0.0) {
        // Scaling zeros changes nothing.
        return Ok(out);
    }

    let scaled = |f: f64| -> Result<OutcomeCoefficients> {
        let mut o = base.clone();
        for (name, v) in tunable.iter().zip(&originals) {
            *o.get_mut(name)? = v * f;
        }
        Ok(o)
    };
    let sample = CalibrationSample::draw(cfg, CALIBRATION_DRAWS, rng);
    let gap = |f: f64| -> Result<f64> {
        Ok(sample.relative_bias(&scaled(f)?, cfg.sigma)? - target_rel_bias_pct)
    };

    let (mut lo, mut hi) = (FACTOR_BRACKET.0.ln(), FACTOR_BRACKET.1.ln());
    let (mut g_lo, g_hi) = (gap(lo.exp())?, gap(hi.exp())?);
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::Calibration(format!(
            "relative bias does not cross {target_rel_bias_pct}% for factors in {FACTOR_BRACKET:?} \
             (gaps {g_lo:.3} and {g_hi:.3} percentage points)"
        )));
    }
    let mut best = (lo, g_lo);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let g = gap(mid.exp())?;
        if g.abs() < best.1.abs() {
            best = (mid, g);
        }
        if g.abs() < CALIBRATION_TOL_PCT || hi - lo < 1e-12 {
            break;
        }
        if g.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g;
        } else {
            hi = mid;
        }
    }
    let factor = best.0.exp();
    out.coefficients.outcome = scaled(factor)?;
    out.calibration = Some(CalibrationInfo {
        target_rel_bias_pct,
        achieved_rel_bias_pct: best.1 + target_rel_bias_pct,
        factor,
        tunable: tunable.to_vec(),
    });
    Ok(out)
}

/// Applies a pending calibration request, if any.
pub fn resolve_calibration(cfg: &ScenarioConfig, rng: &RngStream) -> Result<ScenarioConfig> {
    match (&cfg.calibrate, &cfg.calibration) {
        (Some(req), None) => {
            calibrate_confounding(cfg, req.target_rel_bias_pct, &req.tunable, cfg.confounding, rng)
        }
        _ => Ok(cfg.clone()),
    }
}
