use crate::error::{invalid, Error, Result};

/// Relative slack when comparing cumulative weight against `p`. Keeps the
/// equal-weight case identical to the exact type-1 rule despite rounding in
/// the running sum.
const CUM_SLACK: f64 = 1e-12;

/// Weighted quantile of a step-function CDF.
///
/// Weights are normalised to sum to one, values are sorted ascending
/// (stable for ties) and the smallest value whose cumulative weight reaches
/// `p` is returned. With equal weights this is the type-1 (inverse-CDF)
/// sample quantile.
pub fn weighted_quantile(values: &[f64], weights: &[f64], p: f64) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(invalid(format!(
            "{} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    if values.is_empty() {
        return Err(invalid("weighted quantile of an empty sample"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!("quantile level must lie in (0, 1], got {p}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("values must be finite"));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidWeights("weights must be finite and nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidWeights("weights sum to zero".into()));
    }

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let target = p * (1.0 - CUM_SLACK);
    let mut cum = 0.0;
    for &i in &order {
        cum += weights[i] / total;
        if cum >= target {
            return Ok(values[i]);
        }
    }
    Ok(values[*order.last().unwrap()])
}

/// Lower (type-1) median: the ⌈n/2⌉-th order statistic. Reorders `values`.
pub fn lower_median_in_place(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let k = (values.len() + 1) / 2 - 1;
    let (_, v, _) = values.select_nth_unstable_by(k, f64::total_cmp);
    *v
}

/// Lower (type-1) median of a slice.
pub fn lower_median(values: &[f64]) -> f64 {
    lower_median_in_place(&mut values.to_vec())
}

/// Type-7 (linear interpolation) sample quantile of already sorted data.
pub fn type7_quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
