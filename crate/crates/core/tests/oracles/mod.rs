//! Brute-force oracles for the solvers and estimator reductions, shared by
//! the unit tests and the acceptance run. Each suite panics on the first
//! mismatch.
#![allow(dead_code)]

use causal_medians::estimators::{estimate_ipw, estimate_unadjusted, estimate_weighted_qr, WeightOptions};
use causal_medians::numerics::{
    check_loss, fit_logistic, fit_quantile_reg, quantile_objective, weighted_quantile, DesignMatrix,
};
use causal_medians::{Column, Dataset, ModelSpec, RngStream};
use rand::Rng;

/// Smallest candidate value minimising |Σ wᵢ·1[yᵢ ≤ m] − p| over normalised
/// weights.
fn scan_quantile(values: &[f64], weights: &[f64], p: f64) -> f64 {
    let total: f64 = weights.iter().sum();
    let mut cands = values.to_vec();
    cands.sort_by(f64::total_cmp);
    // The step CDF only reaches p from below at the crossing; among values
    // whose CDF is ≥ p the smallest is the crossing point, and the scan
    // minimises the discrepancy restricted to those values.
    let mut best: Option<(f64, f64)> = None;
    for &m in &cands {
        let cdf: f64 = values
            .iter()
            .zip(weights)
            .filter(|(v, _)| **v <= m)
            .map(|(_, w)| w / total)
            .sum();
        if cdf < p - 1e-12 {
            continue;
        }
        let gap = (cdf - p).abs();
        match best {
            Some((g, _)) if gap >= g - 1e-15 => {}
            _ => best = Some((gap, m)),
        }
    }
    best.unwrap().1
}

pub fn weighted_quantile_matches_linear_scan() {
    let mut rng = RngStream::from_seed(11, "oracles").rng();
    for case in 0..1000 {
        let n = 50;
        // Integer-valued draws make ties common.
        let values: Vec<f64> = (0..n)
            .map(|_| {
                if case % 2 == 0 {
                    rng.random_range(0..20) as f64
                } else {
                    rng.random::<f64>() * 10.0
                }
            })
            .collect();
        let weights: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < 0.1 { 0.0 } else { rng.random::<f64>() })
            .collect();
        let got = weighted_quantile(&values, &weights, 0.5).unwrap();
        let want = scan_quantile(&values, &weights, 0.5);
        assert_eq!(got, want, "case {case}");
    }
}

pub fn equal_weights_reproduce_type1_quantiles() {
    let mut rng = RngStream::from_seed(12, "oracles").rng();
    for _ in 0..200 {
        let n = rng.random_range(1..40);
        let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        for k in 1..=9 {
            let p = k as f64 / 10.0;
            let idx = ((n as f64 * p).ceil() as usize).max(1) - 1;
            let got = weighted_quantile(&values, &vec![1.0; n], p).unwrap();
            assert_eq!(got, sorted[idx], "n {n} p {p}");
        }
    }
}

/// Minimum of the check loss over all lines through two observations with
/// distinct covariate values.
fn enumerate_min(x: &[f64], y: &[f64], w: &[f64], tau: f64) -> f64 {
    let design = DesignMatrix::with_intercept(x.len(), vec![("x".into(), x.to_vec())]).unwrap();
    let mut best = f64::INFINITY;
    for i in 0..x.len() {
        for j in 0..x.len() {
            if x[i] == x[j] || w[i] == 0.0 || w[j] == 0.0 {
                continue;
            }
            let slope = (y[j] - y[i]) / (x[j] - x[i]);
            let beta = [y[i] - slope * x[i], slope];
            best = best.min(quantile_objective(&design, y, tau, Some(w), &beta));
        }
    }
    best
}

pub fn quantile_regression_matches_candidate_enumeration() {
    let mut rng = RngStream::from_seed(13, "oracles").rng();
    for case in 0..200 {
        let n = if case < 100 { 12 } else { rng.random_range(4..16) };
        let binary = case % 2 == 0;
        let x: Vec<f64> = loop {
            let x: Vec<f64> = (0..n)
                .map(|_| {
                    if binary {
                        f64::from(rng.random_bool(0.5))
                    } else {
                        rng.random::<f64>() * 4.0 - 2.0
                    }
                })
                .collect();
            if x.iter().any(|v| *v != x[0]) {
                break x;
            }
        };
        let y: Vec<f64> = x
            .iter()
            .map(|xi| 1.0 + 0.5 * xi + rng.random::<f64>() * 3.0)
            .collect();
        let w: Vec<f64> = if case % 3 == 0 {
            (0..n).map(|_| rng.random::<f64>() + 0.05).collect()
        } else {
            vec![1.0; n]
        };
        let tau = if case % 5 == 0 { 0.3 } else { 0.5 };
        let design = DesignMatrix::with_intercept(n, vec![("x".into(), x.clone())]).unwrap();
        let fit = fit_quantile_reg(&design, &y, tau, Some(&w)).unwrap();
        let got = quantile_objective(&design, &y, tau, Some(&w), &fit.coefficients);
        let want = enumerate_min(&x, &y, &w, tau);
        assert!(
            (got - want).abs() <= 1e-9 * want.max(1.0),
            "case {case}: solver {got} vs enumeration {want}"
        );
    }
}

pub fn weighted_intercept_only_median_regression_is_weighted_l1_minimum() {
    let mut rng = RngStream::from_seed(14, "oracles").rng();
    for _ in 0..100 {
        let n = rng.random_range(3..60);
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 5.0).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let design = DesignMatrix::intercept_only(n).unwrap();
        let fit = fit_quantile_reg(&design, &y, 0.5, Some(&w)).unwrap();
        let m = weighted_quantile(&y, &w, 0.5).unwrap();
        let got = quantile_objective(&design, &y, 0.5, Some(&w), &fit.coefficients);
        let want = quantile_objective(&design, &y, 0.5, Some(&w), &[m]);
        assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{got} vs {want}");
    }
}

fn loglik(x: &[f64], a: &[u8], b0: f64, b1: f64) -> f64 {
    x.iter()
        .zip(a)
        .map(|(xi, &ai)| {
            let eta = b0 + b1 * xi;
            let log1pexp = if eta > 0.0 {
                eta + (-eta).exp().ln_1p()
            } else {
                eta.exp().ln_1p()
            };
            f64::from(ai) * eta - log1pexp
        })
        .sum()
}

/// Grid search over a square, shrinking around the best point.
fn grid_search(x: &[f64], a: &[u8]) -> (f64, f64) {
    let (mut c0, mut c1) = (0.0, 0.0);
    let mut half: f64 = 10.0;
    let mut step: f64 = 0.1;
    while step >= 1e-4 {
        let k = (half / step).round() as i64;
        let mut best = (f64::NEG_INFINITY, c0, c1);
        for i in -k..=k {
            for j in -k..=k {
                let b0 = c0 + i as f64 * step;
                let b1 = c1 + j as f64 * step;
                let ll = loglik(x, a, b0, b1);
                if ll > best.0 {
                    best = (ll, b0, b1);
                }
            }
        }
        c0 = best.1;
        c1 = best.2;
        half = 2.0 * step;
        step /= 10.0;
    }
    (c0, c1)
}

pub fn logistic_matches_grid_search() {
    let mut rng = RngStream::from_seed(15, "oracles").rng();
    let mut done = 0;
    while done < 50 {
        let x: Vec<f64> = (0..10).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let a: Vec<u8> = x
            .iter()
            .map(|xi| u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-(0.3 + 1.2 * xi)).exp())))
            .collect();
        // Skip separated samples: the MLE must exist and sit inside the grid.
        let (min1, max1, min0, max0) = x.iter().zip(&a).fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(l1, h1, l0, h0), (&xi, &ai)| {
                if ai == 1 {
                    (l1.min(xi), h1.max(xi), l0, h0)
                } else {
                    (l1, h1, l0.min(xi), h0.max(xi))
                }
            },
        );
        if !(min1 < max0 && min0 < max1) {
            continue;
        }
        let design = DesignMatrix::with_intercept(10, vec![("x".into(), x.clone())]).unwrap();
        let Ok(fit) = fit_logistic(&design, &a) else {
            continue;
        };
        if fit.coefficients.iter().any(|b| b.abs() > 9.0) {
            continue;
        }
        let (g0, g1) = grid_search(&x, &a);
        assert!(
            (fit.coefficients[0] - g0).abs() < 5e-3 && (fit.coefficients[1] - g1).abs() < 5e-3,
            "newton {:?} vs grid ({g0}, {g1})",
            fit.coefficients
        );
        done += 1;
    }
}

// With an intercept-only propensity model every record in an arm gets the
// same weight, so the weighted estimators must collapse to the unadjusted
// median contrast.


const DATASETS: u64 = 100;

fn random_dataset(seed: u64) -> Dataset {
    let mut g = RngStream::from_seed(seed, "reductions").rng();
    let n = g.random_range(6..80);
    let mut a: Vec<u8> = (0..n).map(|_| u8::from(g.random::<f64>() < 0.4)).collect();
    a[0] = 0;
    a[1] = 1;
    // Coarse values produce ties, which the estimators must handle too.
    let coarse = seed % 3 == 0;
    let y: Vec<f64> = (0..n)
        .map(|_| {
            let v = g.random_range(-5.0..20.0);
            if coarse {
                f64::round(v)
            } else {
                v
            }
        })
        .collect();
    let c: Vec<f64> = (0..n).map(|_| g.random::<f64>()).collect();
    Dataset::new("y", y, "a", a, vec![Column { name: "c".into(), values: c }]).unwrap()
}

fn sorted_arm(d: &Dataset, arm: u8) -> Vec<f64> {
    let mut v = d.arm_outcomes(arm);
    v.sort_by(f64::total_cmp);
    v
}

fn upper_median(sorted: &[f64]) -> f64 {
    sorted[sorted.len() / 2]
}

pub fn intercept_only_ipw_is_unadjusted() {
    let spec = ModelSpec::propensity::<&str>(&[]);
    for seed in 0..DATASETS {
        let d = random_dataset(seed);
        let u = estimate_unadjusted(&d).unwrap();
        let w = estimate_ipw(&d, &spec, &WeightOptions::default()).unwrap();
        assert_eq!((w.m0, w.m1, w.delta), (u.m0, u.m1, u.delta), "dataset {seed}");
    }
}

pub fn intercept_only_weighted_qr_is_unadjusted() {
    // Medians of even-sized arms are not unique under the L1 criterion, so
    // the QR fit may return any point between the two middle order
    // statistics. Odd arms must match exactly; all arms must be optimal.
    let spec = ModelSpec::propensity::<&str>(&[]);
    for seed in 0..DATASETS {
        let d = random_dataset(seed);
        let u = estimate_unadjusted(&d).unwrap();
        let w = estimate_weighted_qr(&d, &spec, &WeightOptions::default()).unwrap();
        for (arm, got, lower) in [(0, w.m0.unwrap(), u.m0.unwrap()), (1, w.m1.unwrap(), u.m1.unwrap())] {
            let ys = sorted_arm(&d, arm);
            let tol = 1e-7 * (1.0 + lower.abs());
            if ys.len() % 2 == 1 {
                assert!((got - lower).abs() < tol, "dataset {seed} arm {arm}: {got} vs {lower}");
            } else {
                let upper = upper_median(&ys);
                assert!(got >= lower - tol && got <= upper + tol, "dataset {seed} arm {arm}");
            }
            let at = |m: f64| ys.iter().map(|y| check_loss(y - m, 0.5)).sum::<f64>();
            assert!(at(got) <= at(lower) + 1e-9 * (1.0 + at(lower)), "dataset {seed} arm {arm}");
        }
    }
}
