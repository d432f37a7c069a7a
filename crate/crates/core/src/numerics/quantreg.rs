//! Linear quantile regression.
//!
//! The fit solves the dual of the check-loss problem,
//!
//! ```text
//!   min  −yᵀd   s.t.  Xᵀd = (1 − τ) Xᵀ1,   0 ≤ d ≤ 1,
//! ```
//!
//! with a primal–dual interior-point method using Mehrotra's
//! predictor–corrector step (the Frisch–Newton scheme of Portnoy and
//! Koenker). The multipliers of the equality constraint are −β. Once the
//! duality gap is negligible the solution is rounded to a vertex: the `p`
//! observations with the smallest absolute residuals define a basic
//! solution, which is kept when its check loss is no worse.

use super::design::{dot, DesignMatrix};
use super::linalg::{cholesky_solve, householder_lstsq, lu_solve, LeastSquares};
use super::ols::validate_weights;
use super::FitResult;
use crate::error::{invalid, Error, IterationTrace, Result};

const MAX_ITER: usize = 100;
const STEP_FRACTION: f64 = 0.99995;
const GAP_TOL: f64 = 1e-8;

/// Check loss ρ_τ(u) = u (τ − 1[u < 0]).
#[inline]
pub fn check_loss(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        u * (tau - 1.0)
    } else {
        u * tau
    }
}

/// Weighted check-loss objective Σ wᵢ ρ_τ(yᵢ − xᵢᵀβ).
pub fn quantile_objective(
    x: &DesignMatrix,
    y: &[f64],
    tau: f64,
    weights: Option<&[f64]>,
    beta: &[f64],
) -> f64 {
    (0..x.rows())
        .map(|i| {
            let w = weights.map_or(1.0, |w| w[i]);
            w * check_loss(y[i] - dot(x.row(i), beta), tau)
        })
        .sum()
}

/// Fits the τ-th conditional quantile, minimising Σ wᵢ ρ_τ(yᵢ − xᵢᵀβ).
///
/// When the minimiser is not unique any point of the optimal set may be
/// returned; the objective value is what is guaranteed.
pub fn fit_quantile_reg(
    x: &DesignMatrix,
    y: &[f64],
    tau: f64,
    weights: Option<&[f64]>,
) -> Result<FitResult> {
    let n_all = x.rows();
    let p = x.cols();
    if !(tau > 0.0 && tau < 1.0) {
        return Err(invalid(format!("tau must lie in (0, 1), got {tau}")));
    }
    if y.len() != n_all {
        return Err(invalid(format!(
            "outcome has {} values, design has {n_all} rows",
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(invalid("outcome contains non-finite values"));
    }
    if let Some(w) = weights {
        validate_weights(w, n_all)?;
    }

    // ρ_τ is positively homogeneous, so a weight can be folded into the row.
    let mut xs = Vec::with_capacity(n_all * p);
    let mut ys = Vec::with_capacity(n_all);
    for i in 0..n_all {
        let w = weights.map_or(1.0, |w| w[i]);
        if w > 0.0 {
            xs.extend(x.row(i).iter().map(|v| v * w));
            ys.push(y[i] * w);
        }
    }
    let n = ys.len();
    if n < p {
        return Err(invalid(format!(
            "quantile regression needs at least {p} positively weighted rows, got {n}"
        )));
    }

    let start = match householder_lstsq(&xs, &ys, n, p) {
        LeastSquares::Solved(b) => b,
        LeastSquares::RankDeficient { dependent, span } => {
            let labels = x.labels();
            let mut columns: Vec<String> = span.iter().map(|&k| labels[k].clone()).collect();
            columns.push(labels[dependent].clone());
            return Err(Error::SingularDesign { columns });
        }
    };

    let (beta, iterations) = if n == p {
        (start, 0)
    } else {
        interior_point(&xs, &ys, n, p, tau, start)?
    };
    let beta = round_to_vertex(&xs, &ys, n, p, tau, beta);

    Ok(FitResult {
        coefficients: beta,
        residual_scale: None,
        converged: true,
        iterations,
    })
}

fn scaled_objective(xs: &[f64], ys: &[f64], p: usize, tau: f64, beta: &[f64]) -> f64 {
    ys.iter()
        .enumerate()
        .map(|(i, &y)| check_loss(y - dot(&xs[i * p..(i + 1) * p], beta), tau))
        .sum()
}

/// Largest step in [0, ∞) keeping `v + t·dv ≥ 0`.
fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, &d)| d < 0.0)
        .map(|(&a, &d)| -a / d)
        .fold(1e20, f64::min)
}

fn solve_normal(m: &[f64], rhs: &[f64], p: usize) -> Option<Vec<f64>> {
    if let Some(x) = cholesky_solve(m, rhs, p) {
        return Some(x);
    }
    // Near convergence the scaling spans many orders of magnitude; a tiny
    // ridge restores definiteness without moving the solution measurably.
    let tr: f64 = (0..p).map(|j| m[j * p + j]).sum::<f64>() / p as f64;
    let mut ridged = m.to_vec();
    for j in 0..p {
        ridged[j * p + j] += 1e-13 * tr.max(f64::MIN_POSITIVE);
    }
    cholesky_solve(&ridged, rhs, p).or_else(|| lu_solve(m, rhs, p))
}

fn interior_point(
    xs: &[f64],
    ys: &[f64],
    n: usize,
    p: usize,
    tau: f64,
    ols: Vec<f64>,
) -> Result<(Vec<f64>, usize)> {
    let row = |i: usize| &xs[i * p..(i + 1) * p];

    // Primal (dual-of-QR) variables start at the interior point d = 1 − τ,
    // which satisfies the equality constraint exactly.
    let mut xv = vec![1.0 - tau; n];
    let mut sv = vec![tau; n];
    let mut lambda: Vec<f64> = ols.iter().map(|b| -b).collect();
    // Dual slacks with z − w = c − Aᵀλ = −(y − Xβ_ols).
    let resid: Vec<f64> = (0..n).map(|i| ys[i] - dot(row(i), &ols)).collect();
    let mean_abs = resid.iter().map(|r| r.abs()).sum::<f64>() / n as f64;
    let eps = (1e-3 * mean_abs).max(1e-8);
    let mut zv: Vec<f64> = resid.iter().map(|r| (-r).max(0.0) + eps).collect();
    let mut wv: Vec<f64> = resid.iter().map(|r| r.max(0.0) + eps).collect();

    let mut q = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut dx = vec![0.0; n];
    let mut dz = vec![0.0; n];
    let mut dw = vec![0.0; n];
    let mut m = vec![0.0; p * p];
    let mut trace = Vec::new();
    let y_scale: f64 = ys.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);

    for it in 1..=MAX_ITER {
        let gap: f64 = (0..n).map(|i| zv[i] * xv[i] + wv[i] * sv[i]).sum();
        let primal: f64 = -(0..n).map(|i| ys[i] * xv[i]).sum::<f64>();
        trace.push(IterationTrace {
            iteration: it,
            objective: primal,
            max_step: gap,
            max_abs_coef: lambda.iter().fold(0.0f64, |a, b| a.max(b.abs())),
        });
        // The LP objective is the check loss shifted by (1 − τ)Σy, so the
        // gap is judged against the loss itself, floored at what rounding on
        // the scale of y permits.
        let beta: Vec<f64> = lambda.iter().map(|l| -l).collect();
        let loss = scaled_objective(xs, ys, p, tau, &beta);
        if gap <= GAP_TOL * loss + 1e-13 * y_scale {
            return Ok((beta, it - 1));
        }

        for i in 0..n {
            q[i] = 1.0 / (zv[i] / xv[i] + wv[i] / sv[i]);
            r[i] = zv[i] - wv[i];
        }
        m.iter_mut().for_each(|v| *v = 0.0);
        let mut rhs = vec![0.0; p];
        for ((xi, &qi), &ri) in xs.chunks_exact(p).zip(&q).zip(&r) {
            for (j, &xij) in xi.iter().enumerate() {
                let qx = qi * xij;
                rhs[j] += qx * ri;
                for (mk, &xk) in m[j * p..=j * p + j].iter_mut().zip(xi) {
                    *mk += qx * xk;
                }
            }
        }
        for j in 0..p {
            for k in (j + 1)..p {
                m[j * p + k] = m[k * p + j];
            }
        }

        // Affine-scaling (predictor) direction.
        let Some(mut dl) = solve_normal(&m, &rhs, p) else {
            break;
        };
        for i in 0..n {
            dx[i] = q[i] * (dot(row(i), &dl) - r[i]);
            dz[i] = -zv[i] * (1.0 + dx[i] / xv[i]);
            dw[i] = -wv[i] * (1.0 - dx[i] / sv[i]);
        }
        let neg_dx: Vec<f64> = dx.iter().map(|d| -d).collect();
        let mut fp = (STEP_FRACTION * max_step(&xv, &dx).min(max_step(&sv, &neg_dx))).min(1.0);
        let mut fd = (STEP_FRACTION * max_step(&zv, &dz).min(max_step(&wv, &dw))).min(1.0);

        if fp.min(fd) < 1.0 {
            // Mehrotra corrector with an adaptively chosen centring target.
            let mu = gap;
            let g: f64 = (0..n)
                .map(|i| {
                    (zv[i] + fd * dz[i]) * (xv[i] + fp * dx[i])
                        + (wv[i] + fd * dw[i]) * (sv[i] - fp * dx[i])
                })
                .sum();
            let mu_t = mu * (g / mu).powi(3) / (2.0 * n as f64);
            let mut v = vec![0.0; n];
            let mut rhs2 = vec![0.0; p];
            for i in 0..n {
                let dxdz = dx[i] * dz[i];
                let dsdw = -dx[i] * dw[i];
                let xi_c = mu_t * (1.0 / xv[i] - 1.0 / sv[i]);
                v[i] = xi_c - r[i] - dxdz / xv[i] + dsdw / sv[i];
                let xi = row(i);
                for j in 0..p {
                    rhs2[j] -= q[i] * v[i] * xi[j];
                }
            }
            let Some(dl2) = solve_normal(&m, &rhs2, p) else {
                break;
            };
            for i in 0..n {
                let dxdz = dx[i] * dz[i];
                let dsdw = -dx[i] * dw[i];
                let ndx = q[i] * (dot(row(i), &dl2) + v[i]);
                let nds = -ndx;
                dz[i] = mu_t / xv[i] - zv[i] - zv[i] / xv[i] * ndx - dxdz / xv[i];
                dw[i] = mu_t / sv[i] - wv[i] - wv[i] / sv[i] * nds - dsdw / sv[i];
                dx[i] = ndx;
            }
            dl = dl2;
            let neg_dx: Vec<f64> = dx.iter().map(|d| -d).collect();
            fp = (STEP_FRACTION * max_step(&xv, &dx).min(max_step(&sv, &neg_dx))).min(1.0);
            fd = (STEP_FRACTION * max_step(&zv, &dz).min(max_step(&wv, &dw))).min(1.0);
        }

        for i in 0..n {
            xv[i] += fp * dx[i];
            sv[i] -= fp * dx[i];
            zv[i] += fd * dz[i];
            wv[i] += fd * dw[i];
        }
        for (l, d) in lambda.iter_mut().zip(&dl) {
            *l += fd * d;
        }
        if lambda.iter().any(|l| !l.is_finite()) {
            break;
        }
    }
    Err(Error::Convergence {
        solver: "quantile regression",
        trace,
    })
}

/// Replaces an interior solution with the basic solution through the `p`
/// best-fitting observations when that is at least as good.
fn round_to_vertex(
    xs: &[f64],
    ys: &[f64],
    n: usize,
    p: usize,
    tau: f64,
    beta: Vec<f64>,
) -> Vec<f64> {
    let row = |i: usize| &xs[i * p..(i + 1) * p];
    let mut order: Vec<usize> = (0..n).collect();
    let resid: Vec<f64> = (0..n).map(|i| (ys[i] - dot(row(i), &beta)).abs()).collect();
    order.sort_by(|&a, &b| resid[a].total_cmp(&resid[b]).then(a.cmp(&b)));

    // Greedy rank-revealing pick via Gram–Schmidt on the candidate rows.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut chosen = Vec::with_capacity(p);
    for &i in &order {
        let mut v = row(i).to_vec();
        let norm0 = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        for b in &basis {
            let d = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(a, bb)| *a -= d * bb);
        }
        let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm > 1e-9 * norm0.max(f64::MIN_POSITIVE) {
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
            chosen.push(i);
            if chosen.len() == p {
                break;
            }
        }
    }
    if chosen.len() < p {
        return beta;
    }
    let a: Vec<f64> = chosen.iter().flat_map(|&i| row(i).to_vec()).collect();
    let b: Vec<f64> = chosen.iter().map(|&i| ys[i]).collect();
    let Some(vertex) = lu_solve(&a, &b, p) else {
        return beta;
    };
    let f_ip = scaled_objective(xs, ys, p, tau, &beta);
    let f_v = scaled_objective(xs, ys, p, tau, &vertex);
    if f_v <= f_ip {
        vertex
    } else {
        beta
    }
}
