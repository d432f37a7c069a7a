use super::design::DesignMatrix;
use super::linalg::{householder_lstsq, LeastSquares};
use super::FitResult;
use crate::error::{invalid, Error, Result};

/// (Weighted) least squares via Householder QR.
///
/// `residual_scale` is `sqrt(RSS / (n − p))`, with `n` the number of rows
/// carrying positive weight. That is the standard deviation used for the
/// log-normal outcome model in g-computation.
pub fn fit_ols(x: &DesignMatrix, y: &[f64], weights: Option<&[f64]>) -> Result<FitResult> {
    let n = x.rows();
    let p = x.cols();
    if y.len() != n {
        return Err(invalid(format!("outcome has {} values, design has {n} rows", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(invalid("outcome contains non-finite values"));
    }
    if let Some(w) = weights {
        validate_weights(w, n)?;
    }
    let effective_n = weights.map_or(n, |w| w.iter().filter(|&&v| v > 0.0).count());
    if effective_n < p {
        return Err(invalid(format!(
            "least squares needs at least {p} weighted rows, got {effective_n}"
        )));
    }

    let (xs, ys) = match weights {
        None => (x.values().to_vec(), y.to_vec()),
        Some(w) => {
            let mut xs = x.values().to_vec();
            let mut ys = y.to_vec();
            for i in 0..n {
                let s = w[i].sqrt();
                ys[i] *= s;
                for v in &mut xs[i * p..(i + 1) * p] {
                    *v *= s;
                }
            }
            (xs, ys)
        }
    };

    let coefficients = match householder_lstsq(&xs, &ys, n, p) {
        LeastSquares::Solved(b) => b,
        LeastSquares::RankDeficient { dependent, span } => {
            let labels = x.labels();
            let mut columns: Vec<String> = span.iter().map(|&k| labels[k].clone()).collect();
            columns.push(labels[dependent].clone());
            return Err(Error::SingularDesign { columns });
        }
    };

    let fitted = x.predict(&coefficients);
    let rss: f64 = (0..n)
        .map(|i| {
            let r = y[i] - fitted[i];
            weights.map_or(1.0, |w| w[i]) * r * r
        })
        .sum();
    let df = effective_n - p;
    let residual_scale = if df == 0 { 0.0 } else { (rss / df as f64).sqrt() };

    Ok(FitResult {
        coefficients,
        residual_scale: Some(residual_scale),
        converged: true,
        iterations: 1,
    })
}

pub(crate) fn validate_weights(w: &[f64], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::InvalidWeights(format!(
            "{} weights for {n} rows",
            w.len()
        )));
    }
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidWeights(
            "weights must be finite and nonnegative".into(),
        ));
    }
    if w.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidWeights("all weights are zero".into()));
    }
    Ok(())
}
