//! Sums of Gaussian kernels, `S(l) = Σᵢ exp(−(l − μᵢ)² / (2σ²))`, at many
//! evaluation points.
//!
//! Centres are grouped into clusters of width at most one kernel scale
//! `h = σ√2`. Within a cluster with midpoint `c`,
//!
//! ```text
//!   exp(−(t − s)²) = Σ_p  s^p / p! · h_p(t),   h_p(t) = H_p(t) e^{−t²},
//! ```
//!
//! with `t = (l − c)/h`, `s = (μ − c)/h` and `H_p` the physicists' Hermite
//! polynomials. Since |s| ≤ ½ the series converges fast: by Cramér's
//! inequality the p-th term is below 1.09·(√2|s|)^p/√(p!), which is under
//! 1e-16 for p ≥ 26. Cost is O((n + K)·P·clusters) instead of O(n·K).

const TERMS: usize = 26;
const HALF_WIDTH: f64 = 0.5;

/// Plain O(n·K) evaluation.
pub fn gaussian_kernel_sums_direct(points: &[f64], centers: &[f64], sigma: f64) -> Vec<f64> {
    let inv = 1.0 / (2.0 * sigma * sigma);
    points
        .iter()
        .map(|&l| {
            centers
                .iter()
                .map(|&m| {
                    let d = l - m;
                    (-d * d * inv).exp()
                })
                .sum()
        })
        .collect()
}

struct Cluster {
    center: f64,
    moments: [f64; TERMS],
}

/// Evaluates the kernel sums, choosing the expansion whenever it is cheaper.
pub fn gaussian_kernel_sums(points: &[f64], centers: &[f64], sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0);
    let h = sigma * std::f64::consts::SQRT_2;
    let mut sorted = centers.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut clusters: Vec<Cluster> = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let lo = sorted[start];
        let mut end = start;
        while end < sorted.len() && sorted[end] - lo <= 2.0 * HALF_WIDTH * h {
            end += 1;
        }
        let center = 0.5 * (lo + sorted[end - 1]);
        let mut moments = [0.0; TERMS];
        for &m in &sorted[start..end] {
            let s = (m - center) / h;
            let mut term = 1.0;
            for (p, slot) in moments.iter_mut().enumerate() {
                *slot += term;
                term *= s / (p + 1) as f64;
            }
        }
        clusters.push(Cluster { center, moments });
        start = end;
    }

    if clusters.len() * TERMS >= centers.len() {
        return gaussian_kernel_sums_direct(points, centers, sigma);
    }

    points
        .iter()
        .map(|&l| {
            clusters
                .iter()
                .map(|c| {
                    let t = (l - c.center) / h;
                    let mut h_prev = (-t * t).exp();
                    if h_prev == 0.0 {
                        return 0.0;
                    }
                    let mut h_cur = 2.0 * t * h_prev;
                    let mut acc = c.moments[0] * h_prev + c.moments[1] * h_cur;
                    for p in 1..TERMS - 1 {
                        let h_next = 2.0 * t * h_cur - 2.0 * p as f64 * h_prev;
                        acc += c.moments[p + 1] * h_next;
                        h_prev = h_cur;
                        h_cur = h_next;
                    }
                    acc
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn expansion_matches_direct_sum() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for &(spread, sigma) in &[(0.3, 1.0), (1.5, 0.75), (4.0, 0.5), (0.05, 1.5), (10.0, 0.2)] {
            let n = 2000;
            let centers: Vec<f64> = (0..n).map(|_| 1.5 + spread * rng.random::<f64>()).collect();
            let points: Vec<f64> = (0..400).map(|k| -4.0 + 0.025 * k as f64).collect();
            let fast = gaussian_kernel_sums(&points, &centers, sigma);
            let slow = gaussian_kernel_sums_direct(&points, &centers, sigma);
            for (a, b) in fast.iter().zip(&slow) {
                assert!(
                    (a - b).abs() <= 1e-12 * n as f64,
                    "spread {spread} sigma {sigma}: {a} vs {b}"
                );
            }
        }
    }
}
