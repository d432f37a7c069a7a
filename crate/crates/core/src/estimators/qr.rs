use super::{EffectEstimate, Method};
use crate::data::{Dataset, ModelKind, ModelSpec};
use crate::error::Result;
use crate::numerics::fit_quantile_reg;

/// Exposure coefficient of a median regression of Y on intercept, exposure
/// and the confounders in `spec`. This is a conditional, constant-effect
/// contrast, so no marginal medians are reported.
pub fn estimate_multivariable_qr(data: &Dataset, spec: &ModelSpec) -> Result<EffectEstimate> {
    spec.validate(data, ModelKind::Quantile)?;
    let x = spec.design(data, None)?;
    let y = spec.response(data)?;
    let fit = fit_quantile_reg(&x, &y, 0.5, None)?;
    let mut est = EffectEstimate {
        m0: None,
        m1: None,
        delta: fit.coefficients[1],
        method: Method::Qr,
        diagnostics: Default::default(),
    };
    est.diagnostics.insert("iterations".into(), fit.iterations as f64);
    Ok(est)
}
