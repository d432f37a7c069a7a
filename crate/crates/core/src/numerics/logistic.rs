use super::design::{dot, DesignMatrix};
use super::linalg::{cholesky_solve, lu_solve};
use super::{expit, FitResult};
use crate::error::{invalid, Error, IterationTrace, Result};

const MAX_ITER: usize = 100;
const COEF_TOL: f64 = 1e-8;
const LOGLIK_TOL: f64 = 1e-10;
/// The log-likelihood criterion alone is not trusted while the coefficients
/// are still moving this much: under separation the likelihood flattens
/// while |β| keeps growing.
const LOGLIK_STEP_GUARD: f64 = 1e-4;
const DIVERGENCE_BOUND: f64 = 1e6;

/// Bernoulli log-likelihood at linear predictor `eta`, computed without
/// forming probabilities that could round to 0 or 1.
fn loglik(x: &DesignMatrix, a: &[u8], beta: &[f64]) -> f64 {
    (0..x.rows())
        .map(|i| {
            let eta = dot(x.row(i), beta);
            // log σ(η) = −log(1 + e^{−η}); log(1 − σ(η)) = −log(1 + e^{η})
            let l1 = -softplus(-eta);
            let l0 = -softplus(eta);
            if a[i] == 1 {
                l1
            } else {
                l0
            }
        })
        .sum()
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Maximum-likelihood logistic regression by Newton–Raphson (equivalently
/// IRLS) with step halving.
///
/// Converges when the largest absolute coefficient change drops below 1e-8,
/// or the log-likelihood change drops below 1e-10 once steps are small.
/// Separation shows up as coefficients that keep growing; it ends in a
/// [`Error::Convergence`] carrying the iteration trace.
pub fn fit_logistic(x: &DesignMatrix, a: &[u8]) -> Result<FitResult> {
    let n = x.rows();
    let p = x.cols();
    if a.len() != n {
        return Err(invalid(format!("exposure has {} values, design has {n} rows", a.len())));
    }
    if a.iter().any(|&v| v > 1) {
        return Err(invalid("logistic response must be 0/1"));
    }
    let ones = a.iter().filter(|&&v| v == 1).count();
    if ones == 0 || ones == n {
        return Err(invalid("logistic response needs both 0s and 1s"));
    }

    let mut beta = vec![0.0; p];
    let mean = ones as f64 / n as f64;
    beta[0] = (mean / (1.0 - mean)).ln();
    let mut ll = loglik(x, a, &beta);
    let mut trace = Vec::new();

    let mut hess = vec![0.0; p * p];
    let mut grad = vec![0.0; p];
    for iteration in 1..=MAX_ITER {
        hess.iter_mut().for_each(|v| *v = 0.0);
        grad.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let r = x.row(i);
            let mu = expit(dot(r, &beta));
            let w = mu * (1.0 - mu);
            let resid = a[i] as f64 - mu;
            for j in 0..p {
                grad[j] += r[j] * resid;
                let wr = w * r[j];
                for k in 0..=j {
                    hess[j * p + k] += wr * r[k];
                }
            }
        }
        for j in 0..p {
            for k in (j + 1)..p {
                hess[j * p + k] = hess[k * p + j];
            }
        }
        let step = cholesky_solve(&hess, &grad, p)
            .or_else(|| lu_solve(&hess, &grad, p))
            .ok_or_else(|| Error::Convergence {
                solver: "logistic regression",
                trace: trace.clone(),
            })?;

        // Step halving keeps the likelihood monotone.
        let mut scale = 1.0;
        let mut candidate: Vec<f64>;
        let mut new_ll;
        loop {
            candidate = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            new_ll = loglik(x, a, &candidate);
            if new_ll >= ll - 1e-12 * ll.abs() || scale < 1e-10 {
                break;
            }
            scale *= 0.5;
        }
        let max_step = beta
            .iter()
            .zip(&candidate)
            .fold(0.0f64, |m, (b, c)| m.max((b - c).abs()));
        let ll_change = (new_ll - ll).abs();
        beta = candidate;
        ll = new_ll;
        let max_abs_coef = beta.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        trace.push(IterationTrace {
            iteration,
            objective: ll,
            max_step,
            max_abs_coef,
        });

        if !max_abs_coef.is_finite() || max_abs_coef > DIVERGENCE_BOUND {
            return Err(Error::Convergence {
                solver: "logistic regression",
                trace,
            });
        }
        if max_step < COEF_TOL || (ll_change < LOGLIK_TOL && max_step < LOGLIK_STEP_GUARD) {
            return Ok(FitResult {
                coefficients: beta,
                residual_scale: None,
                converged: true,
                iterations: iteration,
            });
        }
    }
    Err(Error::Convergence {
        solver: "logistic regression",
        trace,
    })
}
