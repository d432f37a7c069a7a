//! g-computation under a log-normal outcome model: fit log Y by least
//! squares, predict both potential outcomes for every record, and find the
//! median of the standardised (confounder-averaged) outcome distribution.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{EffectEstimate, Method};
use crate::data::{Dataset, ModelKind, ModelSpec, OutcomeTransform};
use crate::error::{invalid, Error, Result};
use crate::numerics::gauss_sum::gaussian_kernel_sums;
use crate::numerics::{fit_ols, lower_median_in_place, RngStream};

/// Smallest captured density mass accepted on an approximation grid.
pub const MIN_GRID_MASS: f64 = 0.98;

/// Evaluation points `lower, lower + step, …` not exceeding `upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub lower: f64,
    pub step: f64,
    pub upper: f64,
}

impl DensityGrid {
    pub fn new(lower: f64, step: f64, upper: f64) -> Result<Self> {
        let g = Self { lower, step, upper };
        g.validate()?;
        Ok(g)
    }

    /// `[m/2000, 2m]` in steps of `m/2000`, with `m` the largest outcome.
    pub fn data_driven(max_outcome: f64) -> Result<Self> {
        let step = max_outcome / 2000.0;
        Self::new(step, step, 2.0 * max_outcome)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lower > 0.0 && self.step > 0.0 && self.upper > self.lower)
            || !self.upper.is_finite()
        {
            return Err(invalid(format!(
                "density grid needs 0 < lower < upper and step > 0, got {self:?}"
            )));
        }
        if (self.upper - self.lower) / self.step > 5e7 {
            return Err(invalid("density grid has more than 5·10⁷ points"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.upper - self.lower) / self.step * (1.0 + 1e-12)).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, k: usize) -> f64 {
        self.lower + k as f64 * self.step
    }
}

/// Grid choice for approximate g-computation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSetting {
    /// Derived from the largest observed outcome (see
    /// [`DensityGrid::data_driven`]).
    #[default]
    DataDriven,
    Fixed(DensityGrid),
}

impl GridSetting {
    pub fn resolve(&self, data: &Dataset) -> Result<DensityGrid> {
        match self {
            GridSetting::Fixed(g) => {
                g.validate()?;
                Ok(*g)
            }
            GridSetting::DataDriven => {
                let max = data.outcome().iter().copied().fold(f64::NEG_INFINITY, f64::max);
                DensityGrid::data_driven(max)
            }
        }
    }
}

/// Linear predictors for both potential outcomes plus the residual SD.
struct OutcomeModel {
    mu0: Vec<f64>,
    mu1: Vec<f64>,
    sigma: f64,
}

fn fit_outcome_model(data: &Dataset, spec: &ModelSpec) -> Result<OutcomeModel> {
    spec.validate(data, ModelKind::Outcome)?;
    if spec.outcome_transform != OutcomeTransform::Log {
        return Err(invalid("g-computation needs a log-scale outcome model"));
    }
    let y = spec.response(data)?;
    let x = spec.design(data, None)?;
    let fit = fit_ols(&x, &y, None)?;
    let sigma = fit.residual_scale.unwrap_or(0.0);
    if !(sigma > 0.0) {
        return Err(Error::Domain(
            "outcome model fits exactly; the residual scale is zero".into(),
        ));
    }
    Ok(OutcomeModel {
        mu0: spec.design(data, Some(0))?.predict(&fit.coefficients),
        mu1: spec.design(data, Some(1))?.predict(&fit.coefficients),
        sigma,
    })
}

/// Monte Carlo g-computation: `num_draws` log-normal draws per record and
/// arm, with the median taken over the pooled draws of each arm.
///
/// Both arms reuse the same standard-normal draws (common random numbers),
/// which keeps the Monte Carlo error of the contrast small and makes the
/// estimator exactly antisymmetric under relabelling the exposure.
pub fn estimate_gcomp_mc(
    data: &Dataset,
    out_spec: &ModelSpec,
    num_draws: usize,
    rng: &RngStream,
) -> Result<EffectEstimate> {
    if num_draws == 0 {
        return Err(invalid("num_draws must be positive"));
    }
    let model = fit_outcome_model(data, out_spec)?;
    let n = data.len();
    let mut gen = rng.rng();
    let z: Vec<f64> = (0..n * num_draws)
        .map(|_| StandardNormal.sample(&mut gen))
        .collect();

    let mut buf = vec![0.0; n * num_draws];
    let mut pooled_median = |mu: &[f64]| {
        for (i, &m) in mu.iter().enumerate() {
            let block = i * num_draws..(i + 1) * num_draws;
            for (b, &zz) in buf[block.clone()].iter_mut().zip(&z[block]) {
                *b = m + model.sigma * zz;
            }
        }
        // exp is increasing, so the median of the log-scale draws maps to
        // the median of the draws themselves.
        lower_median_in_place(&mut buf).exp()
    };
    let m0 = pooled_median(&model.mu0);
    let m1 = pooled_median(&model.mu1);
    let mut est = EffectEstimate::from_medians(Method::GcompMc, m0, m1);
    est.diagnostics.insert("sigma".into(), model.sigma);
    est.diagnostics.insert("num_draws".into(), num_draws as f64);
    Ok(est)
}

/// Approximate g-computation: the standardised density of each potential
/// outcome, averaged over records, is accumulated on a grid and the median
/// is the first grid point where the cumulative sum reaches one half.
pub fn estimate_gcomp_approx(
    data: &Dataset,
    out_spec: &ModelSpec,
    grid: &GridSetting,
) -> Result<EffectEstimate> {
    let model = fit_outcome_model(data, out_spec)?;
    let grid = grid.resolve(data)?;
    let log_points: Vec<f64> = (0..grid.len()).map(|k| grid.point(k).ln()).collect();
    let n = data.len() as f64;
    let norm = 1.0 / (n * model.sigma * (2.0 * std::f64::consts::PI).sqrt());

    let mut medians = [0.0; 2];
    let mut masses = [0.0; 2];
    for (arm, mu) in [&model.mu0, &model.mu1].into_iter().enumerate() {
        let sums = gaussian_kernel_sums(&log_points, mu, model.sigma);
        let mut cum = 0.0;
        let mut median = None;
        for (k, s) in sums.iter().enumerate() {
            let y = grid.point(k);
            cum += grid.step * s * norm / y;
            if median.is_none() && cum >= 0.5 {
                median = Some(y);
            }
        }
        masses[arm] = cum;
        match median {
            Some(m) if cum >= MIN_GRID_MASS => medians[arm] = m,
            _ => {
                return Err(Error::InsufficientGrid {
                    arm: arm as u8,
                    mass: cum,
                    min_mass: MIN_GRID_MASS,
                })
            }
        }
    }
    let mut est = EffectEstimate::from_medians(Method::GcompApprox, medians[0], medians[1]);
    est.diagnostics.insert("sigma".into(), model.sigma);
    est.diagnostics.insert("mass_arm0".into(), masses[0]);
    est.diagnostics.insert("mass_arm1".into(), masses[1]);
    est.diagnostics.insert("grid_points".into(), grid.len() as f64);
    Ok(est)
}
