//! Acceptance run. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use causal_medians::harness::{purpose, run_study, StudyPlan, StudyResult};
use causal_medians::metrics::MetricsRow;
use causal_medians::numerics::{expit, normal_cdf};
use causal_medians::simgen::{
    calibrate_confounding, generate_dataset, true_delta_oracle, CalibrationRequest, ConfoundingLabel,
    ScenarioConfig, CONFOUNDERS,
};
use causal_medians::{Method, RngStream};

/// Weak-confounding truths at σ = 0.75, 1.0, 1.25, 1.5 used as the external
/// reference.
const REFERENCE_TRUTH: [(f64, f64); 4] = [(0.75, 0.895), (1.0, 1.220), (1.25, 1.600), (1.5, 1.910)];
const TRUTH_TOL: f64 = 0.05;
const ORACLE_N: usize = 2_000_000;
const STUDY_SEED: u64 = 20_240_601;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn repo_root() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../.."))
}

/// Truth oracle against the reference values, three seeds.
fn criterion_1() -> Verdict {
    let seeds = [1u64, 2, 3];
    let mut rows = Vec::new();
    let mut all_close = true;
    let mut reproducible = true;
    for (k, &(sigma, reference)) in REFERENCE_TRUTH.iter().enumerate() {
        let cfg = ScenarioConfig::with_sigma(sigma);
        let deltas: Vec<f64> = seeds
            .iter()
            .map(|&s| {
                let rng = RngStream::new(s, k as u64 + 1, 0, purpose::TRUTH);
                true_delta_oracle(&cfg, ORACLE_N, &rng).map(|t| t.delta_true)
            })
            .collect::<Result<_, _>>()
            .unwrap_or_default();
        if deltas.len() != seeds.len() {
            return verdict(false, format!("oracle failed at σ={sigma}"));
        }
        let lo = deltas.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = deltas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let close: Vec<bool> = deltas.iter().map(|d| (d - reference).abs() <= TRUTH_TOL).collect();
        all_close &= close.iter().all(|c| *c);
        // Reproducible: every seed reaches the same verdict at this σ (and
        // misses on the same side), and the seeds agree among themselves.
        let consistent = close.iter().all(|c| *c == close[0])
            && (close[0] || deltas.iter().all(|d| *d > reference) || deltas.iter().all(|d| *d < reference));
        reproducible &= consistent && hi - lo < TRUTH_TOL;
        rows.push(format!(
            "σ={sigma}: {lo:.3}..{hi:.3} vs {reference} ({})",
            if close[0] { "match" } else { "miss" }
        ));
    }
    if all_close {
        return verdict(true, format!("all within ±{TRUTH_TOL}: {}", rows.join("; ")));
    }
    let doc = std::fs::read_to_string(repo_root().join("docs/TRUTH_VALUES.md")).unwrap_or_default();
    let documented = REFERENCE_TRUTH.iter().all(|(_, r)| doc.contains(&format!("{r:.3}")));
    let detail = format!(
        "{} across 3 seeds, documented in docs/TRUTH_VALUES.md: {}; {}",
        if reproducible { "discrepancy reproducible" } else { "discrepancy NOT reproducible" },
        if documented { "yes" } else { "NO" },
        rows.join("; ")
    );
    verdict(reproducible && documented, detail)
}

fn desk_study() -> Result<StudyResult, String> {
    let mut scenario = ScenarioConfig::with_sigma(1.0);
    scenario.id = 2;
    scenario.confounding = ConfoundingLabel::Weak;
    scenario.n = 1000;
    scenario.replicates = 500;
    scenario.calibrate = Some(CalibrationRequest {
        target_rel_bias_pct: 10.0,
        tunable: CONFOUNDERS.iter().map(|s| s.to_string()).collect(),
    });
    let mut plan = StudyPlan::new(vec![scenario]);
    plan.seed = Some(STUDY_SEED);
    plan.bootstrap_replicates = 200;
    plan.num_draws = 1000;
    let start = Instant::now();
    let progress = |_: u64, done: usize, total: usize| {
        if done % 50 == 0 {
            eprintln!("  desk study: {done}/{total} datasets, {:.0}s", start.elapsed().as_secs_f64());
        }
    };
    let result = run_study(&plan, workers(), Some(&progress)).map_err(|e| e.to_string())?;
    if let Some(f) = result.failed_scenarios.first() {
        return Err(f.message.clone());
    }
    Ok(result)
}

fn row(result: &StudyResult, m: Method) -> Option<&MetricsRow> {
    result.metrics.iter().find(|r| r.method == m)
}

fn rb(r: &MetricsRow) -> String {
    format!("{:+.2}% (mcse {:.2})", r.relative_bias_pct, r.mcse_relative_bias_pct)
}

/// Relative bias with a 3-MCSE allowance.
fn criterion_2(result: &StudyResult) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [Method::Ipw, Method::WeightedQr, Method::GcompMc, Method::GcompApprox] {
        let Some(r) = row(result, m) else { return verdict(false, format!("{m} missing")) };
        pass &= r.relative_bias_pct.abs() - 3.0 * r.mcse_relative_bias_pct < 5.0;
        parts.push(format!("{m} {}", rb(r)));
    }
    let (Some(qr), Some(un)) = (row(result, Method::Qr), row(result, Method::Unadjusted)) else {
        return verdict(false, "qr or unadjusted missing");
    };
    pass &= qr.relative_bias_pct + 3.0 * qr.mcse_relative_bias_pct > 4.0;
    let (lo, hi) = (
        un.relative_bias_pct - 3.0 * un.mcse_relative_bias_pct,
        un.relative_bias_pct + 3.0 * un.mcse_relative_bias_pct,
    );
    pass &= hi >= 6.0 && lo <= 14.0;
    parts.push(format!("qr {}", rb(qr)));
    parts.push(format!("unadjusted {}", rb(un)));
    let truth = result.scenarios[0].truth.delta_true;
    parts.push(format!("truth {truth:.4}"));
    verdict(pass, parts.join(", "))
}

fn criterion_3(result: &StudyResult) -> Verdict {
    let (Some(mc), Some(ap)) = (row(result, Method::GcompMc), row(result, Method::GcompApprox)) else {
        return verdict(false, "g-computation rows missing");
    };
    let gap = (mc.relative_bias_pct - ap.relative_bias_pct).abs();
    verdict(gap < 0.5, format!("|{:+.3} − {:+.3}| = {gap:.3} pp", mc.relative_bias_pct, ap.relative_bias_pct))
}

fn criterion_4(result: &StudyResult) -> Verdict {
    let (Some(ap), Some(ipw)) = (row(result, Method::GcompApprox), row(result, Method::Ipw)) else {
        return verdict(false, "rows missing");
    };
    let all: Vec<String> = result
        .metrics
        .iter()
        .map(|r| format!("{} {:.4}", r.method, r.empirical_se))
        .collect();
    verdict(
        ap.empirical_se < ipw.empirical_se,
        format!("empirical SE: {}", all.join(", ")),
    )
}

fn criterion_5(result: &StudyResult) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [Method::Ipw, Method::WeightedQr, Method::GcompMc, Method::GcompApprox] {
        let Some(r) = row(result, m) else { return verdict(false, format!("{m} missing")) };
        pass &= (92.0..=98.0).contains(&r.coverage_pct);
        parts.push(format!("{m} {:.1}%", r.coverage_pct));
    }
    verdict(pass, parts.join(", "))
}

fn criterion_6() -> Verdict {
    let suites: [(&str, fn()); 5] = [
        ("weighted quantile vs scan ×1000", oracles::weighted_quantile_matches_linear_scan),
        ("QR vs enumeration ×200", oracles::quantile_regression_matches_candidate_enumeration),
        ("logistic vs grid ×50", oracles::logistic_matches_grid_search),
        ("IPW ≡ unadjusted ×100", oracles::intercept_only_ipw_is_unadjusted),
        ("weighted QR ≡ unadjusted ×100", oracles::intercept_only_weighted_qr_is_unadjusted),
    ];
    let mut failed = Vec::new();
    for (name, suite) in suites {
        if catch_unwind(AssertUnwindSafe(suite)).is_err() {
            failed.push(name);
        }
    }
    if failed.is_empty() {
        let names: Vec<&str> = suites.iter().map(|s| s.0).collect();
        verdict(true, names.join(", "))
    } else {
        verdict(false, format!("failed: {}", failed.join(", ")))
    }
}

fn cmed(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_cmed"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn criterion_7() -> Verdict {
    let run = || -> Result<Vec<String>, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let d = dir.path();
        let plan = d.join("plan.toml");
        std::fs::write(
            &plan,
            "bootstrap_replicates = 30\nnum_draws = 200\nbootstrap_draws = 50\noracle_n = 200000\n\
             [[scenarios]]\nid = 1\nconfounding = \"weak\"\nsigma = 0.75\nn = 300\nreplicates = 8\n\
             calibrate = { target_rel_bias_pct = 10.0 }\n\
             [[scenarios]]\nid = 2\nsigma = 1.5\nn = 300\nreplicates = 8\n",
        )
        .map_err(|e| e.to_string())?;
        let p = |x: &Path| x.to_str().unwrap_or_default().to_string();
        let (a, b, c) = (d.join("a"), d.join("b"), d.join("c"));
        cmed(&["simulate", "--plan", &p(&plan), "--out", &p(&a), "--workers", "1"])?;
        let manifest = p(&a.join("manifest.json"));
        cmed(&["simulate", "--plan", &manifest, "--out", &p(&b), "--workers", "1"])?;
        cmed(&["simulate", "--plan", &manifest, "--out", &p(&c), "--workers", "8"])?;
        let mut diffs = Vec::new();
        for f in ["replicates.csv", "metrics.csv"] {
            let first = std::fs::read(a.join(f)).map_err(|e| e.to_string())?;
            for other in [&b, &c] {
                if std::fs::read(other.join(f)).map_err(|e| e.to_string())? != first || first.is_empty() {
                    diffs.push(format!("{f} differs in {}", other.display()));
                }
            }
        }
        Ok(diffs)
    };
    match run() {
        Ok(d) if d.is_empty() => verdict(true, "manifest replays at 1 and 8 workers are byte-identical"),
        Ok(d) => verdict(false, d.join("; ")),
        Err(e) => verdict(false, e),
    }
}

/// Median of `Σ wᵢ Φ((t − μᵢ)/σ) / Σ wᵢ` on the log scale, by bisection.
fn mixture_log_median(mu: &[f64], w: &[f64], sigma: f64) -> f64 {
    let total: f64 = w.iter().sum();
    let cdf = |t: f64| mu.iter().zip(w).map(|(m, wi)| wi * normal_cdf((t - m) / sigma)).sum::<f64>() / total;
    let (mut lo, mut hi) = (-20.0, 20.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Large-sample unadjusted relative bias on a fresh confounder sample, with
/// exposure and outcome noise integrated out.
fn remeasure(cfg: &ScenarioConfig, seed: u64) -> Result<f64, String> {
    let mut big = cfg.clone();
    big.n = 1_000_000;
    let d = generate_dataset(&big, &RngStream::from_seed(seed, "remeasure")).map_err(|e| e.to_string())?;
    let cols: Vec<&[f64]> = CONFOUNDERS
        .iter()
        .map(|c| d.confounder(c))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let coef = &cfg.coefficients;
    let mut mu0 = Vec::with_capacity(d.len());
    let mut mu1 = Vec::with_capacity(d.len());
    let mut pi = Vec::with_capacity(d.len());
    for i in 0..d.len() {
        let c: [f64; 5] = std::array::from_fn(|k| cols[k][i]);
        mu0.push(coef.outcome.mean(0.0, &c));
        mu1.push(coef.outcome.mean(1.0, &c));
        let g = &coef.exposure_logit;
        pi.push(expit(g[0] + g[1..].iter().zip(&c).map(|(b, x)| b * x).sum::<f64>()));
    }
    let ones = vec![1.0; d.len()];
    let not_pi: Vec<f64> = pi.iter().map(|p| 1.0 - p).collect();
    let s = cfg.sigma;
    let truth = mixture_log_median(&mu1, &ones, s).exp() - mixture_log_median(&mu0, &ones, s).exp();
    let naive = mixture_log_median(&mu1, &pi, s).exp() - mixture_log_median(&mu0, &not_pi, s).exp();
    Ok(100.0 * (naive - truth) / truth)
}

fn criterion_8() -> Verdict {
    let base = ScenarioConfig::with_sigma(1.0);
    let tunable: Vec<String> = CONFOUNDERS.iter().map(|s| s.to_string()).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for (target, label) in [(10.0, ConfoundingLabel::Weak), (20.0, ConfoundingLabel::Strong)] {
        let cal = calibrate_confounding(&base, target, &tunable, label, &RngStream::from_seed(7, "calibration"));
        let measured = cal.map_err(|e| e.to_string()).and_then(|c| {
            let f = c.calibration.as_ref().map_or(f64::NAN, |i| i.factor);
            remeasure(&c, 99).map(|m| (f, m))
        });
        match measured {
            Ok((factor, m)) => {
                pass &= (m - target).abs() <= 1.0;
                parts.push(format!("target {target}%: factor {factor:.4}, re-measured {m:.2}%"));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("target {target}%: {e}"));
            }
        }
    }
    verdict(pass, parts.join("; "))
}

fn report(k: usize, name: &str, start: Instant, v: &Verdict) {
    println!(
        "criterion {k} [{}] {name}: {} ({:.0}s)",
        if v.pass { "PASS" } else { "FAIL" },
        v.detail,
        start.elapsed().as_secs_f64()
    );
}

fn main() {
    let mut verdicts = Vec::new();
    let mut record = |k: usize, name: &str, f: &mut dyn FnMut() -> Verdict| {
        let t = Instant::now();
        let v = f();
        report(k, name, t, &v);
        verdicts.push(v.pass);
    };
    record(1, "truth oracle vs reference values", &mut criterion_1);
    record(6, "oracle-equivalence suites", &mut criterion_6);
    record(7, "determinism via manifest replay", &mut criterion_7);
    record(8, "confounding calibration", &mut criterion_8);

    let t = Instant::now();
    match desk_study() {
        Ok(result) => {
            eprintln!("  desk study finished in {:.0}s", t.elapsed().as_secs_f64());
            record(2, "desk-scale relative bias", &mut || criterion_2(&result));
            record(3, "g-computation agreement", &mut || criterion_3(&result));
            record(4, "variance ordering", &mut || criterion_4(&result));
            record(5, "bootstrap coverage", &mut || criterion_5(&result));
        }
        Err(e) => {
            for (k, name) in [(2, "desk-scale relative bias"), (3, "g-computation agreement"), (4, "variance ordering"), (5, "bootstrap coverage")] {
                record(k, name, &mut || verdict(false, format!("study failed: {e}")));
            }
        }
    }

    let failed = verdicts.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", verdicts.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
