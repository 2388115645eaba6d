//! Verification suites behind `rdmc verify`.
//!
//! Each suite runs a fixed list of checks and reports one CSV row per check:
//! `suite,check,value,threshold,pass`. A check's `value` is the measured
//! quantity (deviation, gap, probability), `threshold` the bound it must
//! stay inside. The command exits nonzero when any row fails.

use rand::Rng;
use rand_distr::StandardNormal;

use rdmc_core::compress::{
    apply_codebook, cubic_real_root, objective_value, quartic_weighted_kmeans, weighted_kmeans,
};
use rdmc_core::importance::{ImportanceDiag, ImportanceKind};
use rdmc_core::rd::{
    achievability_report, rd_curve, scalar_gaussian_rd, waterfill, LinearSource,
};
use rdmc_core::relu::{
    analytic_relu_mse, hermite_coeffs, hermite_formula_check, relu_weighted_objective,
    verify_prune_optimality, verify_quant_optimality,
};
use rdmc_core::rng::substream;
use rdmc_core::{Error, Result};

use crate::SuiteArg;

pub const SUITE_CSV_COLUMNS: &str = "suite,check,value,threshold,pass";

pub struct SuiteOutcome {
    pub rows: Vec<String>,
    pub all_passed: bool,
    pub summary_lines: Vec<String>,
}

struct Checker {
    suite: &'static str,
    rows: Vec<String>,
    failed: usize,
    total: usize,
}

impl Checker {
    fn new(suite: &'static str) -> Self {
        Checker {
            suite,
            rows: Vec::new(),
            failed: 0,
            total: 0,
        }
    }

    /// `value` must not exceed `threshold`.
    fn le(&mut self, check: &str, value: f64, threshold: f64) {
        self.push(check, value, threshold, value <= threshold);
    }

    fn push(&mut self, check: &str, value: f64, threshold: f64, pass: bool) {
        self.total += 1;
        if !pass {
            self.failed += 1;
        }
        self.rows.push(format!(
            "{},{check},{value:.16e},{threshold:.16e},{pass}",
            self.suite
        ));
    }

    fn finish(self) -> SuiteOutcome {
        let all_passed = self.failed == 0;
        let summary_lines = vec![format!(
            "suite {}: {}/{} checks passed{}",
            self.suite,
            self.total - self.failed,
            self.total,
            if all_passed { "" } else { " [FAILED]" }
        )];
        SuiteOutcome {
            rows: self.rows,
            all_passed,
            summary_lines,
        }
    }
}

pub fn run_suite(suite: SuiteArg, seed: u64, pmax: usize) -> Result<SuiteOutcome> {
    match suite {
        SuiteArg::Linear => linear_suite(seed),
        SuiteArg::Hermite => hermite_suite(seed, pmax),
        SuiteArg::ReluPrune => relu_prune_suite(seed, pmax),
        SuiteArg::ReluQuant => relu_quant_suite(seed, pmax),
        SuiteArg::Cubic => cubic_suite(seed),
    }
}

fn linear_suite(seed: u64) -> Result<SuiteOutcome> {
    let mut ck = Checker::new("linear");

    ck.le(
        "scalar_rd_one_bit",
        (scalar_gaussian_rd(1.0, 0.25)? - 1.0).abs(),
        1e-12,
    );
    ck.le("scalar_rd_above_variance", scalar_gaussian_rd(1.0, 2.0)?, 0.0);

    let src = LinearSource::three_two_one();
    let sol3 = waterfill(&src, 3.0)?;
    ck.le("breakpoint3_mu", (sol3.mu - 1.0).abs(), 1e-9);
    let expect3 = [1.0 / 3.0, 0.5, 1.0];
    let lvl_dev = sol3
        .levels
        .iter()
        .zip(expect3)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ck.le("breakpoint3_levels", lvl_dev, 1e-9);
    ck.le(
        "breakpoint3_rate_ln6",
        (sol3.rate_nats - 6.0_f64.ln()).abs(),
        1e-9,
    );
    let sol9 = waterfill(&src, 9.0)?;
    ck.le("breakpoint9_mu", (sol9.mu - 4.0).abs(), 1e-9);
    let expect9 = [4.0 / 3.0, 2.0, 1.0];
    let lvl_dev = sol9
        .levels
        .iter()
        .zip(expect9)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ck.le("breakpoint9_levels", lvl_dev, 1e-9);
    ck.le("total_fill_rate", waterfill(&src, 14.0)?.rate_nats, 0.0);

    // KKT: lambda_i * D_i constant across active coordinates
    let mut worst_kkt = 0.0_f64;
    for inst in 0..100 {
        let mut rng = substream(seed, 10 + inst);
        let m = rng.gen_range(2..=8);
        let sigma: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..3.0)).collect();
        let lambda: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..3.0)).collect();
        let s = LinearSource::new(sigma.clone(), lambda.clone())?;
        let d = s.d_max() * rng.gen_range(0.05..0.95);
        let sol = waterfill(&s, d)?;
        let active: Vec<f64> = (0..m)
            .filter(|&i| !sol.is_full(&s, i))
            .map(|i| lambda[i] * sol.levels[i])
            .collect();
        if active.len() > 1 {
            let first = active[0];
            for v in &active[1..] {
                worst_kkt = worst_kkt.max((v - first).abs() / first.max(1e-300));
            }
        }
    }
    ck.le("kkt_active_level_constant", worst_kkt, 1e-9);

    // curve shape on a 50-point grid
    let mut worst_monotone = 0.0_f64;
    let mut worst_convex = 0.0_f64;
    for inst in 0..5 {
        let mut rng = substream(seed, 200 + inst);
        let m = rng.gen_range(2..=6);
        let sigma: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..3.0)).collect();
        let lambda: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..3.0)).collect();
        let s = LinearSource::new(sigma, lambda)?;
        let dmax = s.d_max();
        let grid: Vec<f64> = (1..=50).map(|i| dmax * (i as f64 / 50.0)).collect();
        let curve = rd_curve(&s, &grid)?;
        let rates: Vec<f64> = curve.iter().map(|c| c.rate_nats).collect();
        for w in rates.windows(2) {
            worst_monotone = worst_monotone.max(w[1] - w[0]);
        }
        for w in rates.windows(3) {
            worst_convex = worst_convex.max(-(w[0] - 2.0 * w[1] + w[2]));
        }
    }
    ck.le("curve_nonincreasing", worst_monotone, 1e-12);
    ck.le("curve_convex", worst_convex, 1e-9);

    // achievability at the first breakpoint
    let rep = achievability_report(&src, 3.0, 100_000, seed)?;
    ck.le(
        "achieve_distortion_2pct",
        (rep.empirical_distortion - 3.0).abs() / 3.0,
        0.02,
    );
    let mut worst_cov = 0.0_f64;
    let mut full_max = 0.0_f64;
    for c in &rep.coords {
        if c.full {
            full_max = full_max.max(c.max_abs_what);
        } else {
            worst_cov = worst_cov.max(c.cov_what_err.abs() / c.cov_se.max(1e-300));
        }
    }
    ck.le("achieve_cov_within_3se", worst_cov, 3.0);
    ck.le("achieve_full_coords_zero", full_max, 0.0);
    ck.le(
        "achieve_mi_equals_rate",
        (rep.analytic_mi_nats - rep.rate_nats).abs(),
        1e-12,
    );

    Ok(ck.finish())
}

/// Monte Carlo estimate of `E[(relu(w.x) - relu(what.x))^2]` with per-stream
/// standard error.
fn mc_relu_mse(
    w: &[f64],
    what: &[f64],
    lambda: &[f64],
    samples: usize,
    seed: u64,
    stream: u64,
) -> (f64, f64) {
    let mut rng = substream(seed, stream);
    let m = w.len();
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..samples {
        let mut a = 0.0;
        let mut b = 0.0;
        for i in 0..m {
            let z: f64 = rng.sample(StandardNormal);
            let x = lambda[i].sqrt() * z;
            a += w[i] * x;
            b += what[i] * x;
        }
        let d = a.max(0.0) - b.max(0.0);
        sum += d * d;
        sum2 += d * d * d * d;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum2 - sum * sum / n) / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn hermite_suite(seed: u64, pmax: usize) -> Result<SuiteOutcome> {
    if pmax < 10 || pmax % 2 != 0 {
        return Err(Error::domain("hermite suite needs an even --pmax >= 10"));
    }
    let mut ck = Checker::new("hermite");
    let coeffs = hermite_coeffs(pmax)?;

    ck.le(
        "sigma0_inv_sqrt_2pi",
        (coeffs.get(0) - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs(),
        1e-15,
    );
    ck.le("sigma1_half", (coeffs.get(1) - 0.5).abs(), 1e-15);
    let odd_max = (3..=pmax)
        .step_by(2)
        .map(|p| coeffs.get(p).abs())
        .fold(0.0, f64::max);
    ck.le("odd_coefficients_zero", odd_max, 0.0);
    ck.le(
        "sigma2_closed_form",
        (coeffs.get(2) - 1.0 / (4.0 * std::f64::consts::PI).sqrt()).abs(),
        1e-4,
    );
    ck.le(
        "parseval_to_half",
        (coeffs.parseval_partial() - 0.5).abs(),
        1e-3,
    );

    let rows = hermite_formula_check(pmax)?;
    let odd_quad_max = rows
        .iter()
        .filter(|r| r.p >= 3 && r.p % 2 == 1)
        .map(|r| r.quadrature.abs())
        .fold(0.0, f64::max);
    ck.le("odd_quadrature_near_zero", odd_quad_max, 1e-4);
    let corrected_max = rows
        .iter()
        .filter(|r| r.p >= 2 && r.p % 2 == 0)
        .map(|r| (r.quadrature.abs() - r.formula_corrected).abs())
        .fold(0.0, f64::max);
    ck.le("corrected_formula_matches_quadrature", corrected_max, 1e-4);
    if pmax >= 6 {
        let row6 = &rows[6];
        let printed_err = (row6.quadrature.abs() - row6.formula_printed).abs();
        ck.push(
            "printed_formula_deviates_at_p6",
            printed_err,
            1e-2,
            printed_err > 1e-2,
        );
    }

    // analytic MSE vs a quick Monte Carlo on a few random instances
    let mut worst = 0.0_f64;
    for inst in 0..3u64 {
        let mut rng = substream(seed, 50 + inst);
        let m = 4;
        let w: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let what: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let lambda: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..3.0)).collect();
        let analytic = analytic_relu_mse(&w, &what, &lambda, &coeffs)?;
        let (mc, se) = mc_relu_mse(&w, &what, &lambda, 200_000, seed, 60 + inst);
        worst = worst.max((analytic - mc).abs() / se.max(1e-300));
    }
    ck.le("analytic_vs_monte_carlo_3se", worst, 3.0);

    // half-Gaussian identity: E[1{w.x>=0}((w-what).x)^2] = C/2
    let mut rng = substream(seed, 70);
    let m = 4;
    let w: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let what: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let lambda: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..3.0)).collect();
    let target = 0.5 * relu_weighted_objective(&w, &what, &lambda)?;
    let samples = 200_000;
    let mut draw = substream(seed, 71);
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..samples {
        let mut a = 0.0;
        let mut d = 0.0;
        for i in 0..m {
            let z: f64 = draw.sample(StandardNormal);
            let x = lambda[i].sqrt() * z;
            a += w[i] * x;
            d += (w[i] - what[i]) * x;
        }
        let v = if a >= 0.0 { d * d } else { 0.0 };
        sum += v;
        sum2 += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let se = (((sum2 - sum * sum / n) / (n - 1.0)) / n).sqrt();
    ck.le(
        "half_gaussian_identity_3se",
        (mean - target).abs() / se.max(1e-300),
        3.0,
    );

    Ok(ck.finish())
}

fn random_prune_instance(
    seed: u64,
    inst: u64,
    m: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut rng = substream(seed, 100 + inst);
    let w: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let lambda: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..3.0)).collect();
    (w, lambda)
}

fn relu_prune_suite(seed: u64, pmax: usize) -> Result<SuiteOutcome> {
    let mut ck = Checker::new("relu-prune");
    let coeffs = hermite_coeffs(pmax.max(10))?;
    let mut agree_count = 0usize;
    let mut worst_gap = 0.0_f64;
    for inst in 0..100u64 {
        let (w, lambda) = random_prune_instance(seed, inst, 8);
        let v = verify_prune_optimality(&w, &lambda, 4, &coeffs, 1e-9)?;
        if v.agree {
            agree_count += 1;
        }
        worst_gap = worst_gap.max(v.gap.abs());
        ck.push(
            &format!("instance_{inst:03}"),
            v.gap,
            1e-9,
            v.agree,
        );
    }
    ck.push(
        "agree_100_of_100",
        agree_count as f64,
        100.0,
        agree_count == 100,
    );
    let mut out = ck.finish();
    out.summary_lines.push(format!(
        "relu-prune: {agree_count}/100 argmin agreements, worst |gap| {worst_gap:.3e}"
    ));
    Ok(out)
}

fn relu_quant_suite(seed: u64, pmax: usize) -> Result<SuiteOutcome> {
    let mut ck = Checker::new("relu-quant");
    let coeffs = hermite_coeffs(pmax.max(10))?;
    let mut agree_count = 0usize;
    for inst in 0..30u64 {
        let (w, lambda) = random_prune_instance(seed, 500 + inst, 6);
        let v = verify_quant_optimality(&w, &lambda, 2, &coeffs, 1e-9)?;
        if v.agree {
            agree_count += 1;
        }
        ck.push(&format!("instance_{inst:03}"), v.gap, 1e-9, v.agree);
    }
    ck.push(
        "agree_30_of_30",
        agree_count as f64,
        30.0,
        agree_count == 30,
    );
    Ok(ck.finish())
}

/// Bisection oracle for a strictly increasing cubic.
fn bisect_cubic(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let p = |x: f64| ((a * x + b) * x + c) * x + d;
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    while p(lo) > 0.0 {
        lo *= 2.0;
    }
    while p(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn cubic_suite(seed: u64) -> Result<SuiteOutcome> {
    let mut ck = Checker::new("cubic");

    ck.le(
        "fixed_root_half",
        (cubic_real_root(4.0, -6.0, 8.0, -3.0)? - 0.5).abs(),
        1e-12,
    );
    ck.le("fixed_root_zero", cubic_real_root(1.0, 0.0, 1.0, 0.0)?.abs(), 1e-12);

    // random strictly increasing cubics against the bisection oracle
    let mut worst = 0.0_f64;
    for inst in 0..100u64 {
        let mut rng = substream(seed, 300 + inst);
        let a = rng.gen_range(0.1..5.0);
        let b: f64 = rng.sample::<f64, _>(StandardNormal);
        // choose c above b^2/(3a) so the determinant is negative
        let c = b * b / (3.0 * a) + rng.gen_range(0.05..4.0);
        let d: f64 = 3.0 * rng.sample::<f64, _>(StandardNormal);
        let root = cubic_real_root(a, b, c, d)?;
        worst = worst.max((root - bisect_cubic(a, b, c, d)).abs());
    }
    ck.le("random_roots_vs_bisection", worst, 1e-10);

    // quartic weighted k-means: objective nonincreasing along the iteration
    // prefix (same seed, growing iteration caps share the trajectory)
    let mut worst_increase = 0.0_f64;
    let mut degenerate_match = true;
    for run in 0..100u64 {
        let mut rng = substream(seed, 400 + run);
        let m = rng.gen_range(6..=16);
        let k = rng.gen_range(2..=4).min(m);
        let w: Vec<f64> = (0..m).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let iq: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..2.0)).collect();
        let hq: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..2.0)).collect();
        let imp = ImportanceDiag::from_parts(
            iq.clone(),
            Some(hq.clone()),
            ImportanceKind::SupGradHessian,
        )?;
        let mut prev = f64::INFINITY;
        for iters in 1..=12 {
            let cb = quartic_weighted_kmeans(&w, &imp, k, iters, run)?;
            let what = apply_codebook(&w, &cb)?;
            let obj = objective_value(&w, &what, &imp);
            if obj > prev {
                worst_increase = worst_increase.max(obj - prev);
            }
            prev = obj;
        }
        if run < 20 {
            let imp_q = ImportanceDiag::from_parts(
                iq.clone(),
                None,
                ImportanceKind::SupGradient,
            )?;
            let imp_h0 = ImportanceDiag::from_parts(
                iq,
                Some(vec![0.0; m]),
                ImportanceKind::SupGradHessian,
            )?;
            let a = weighted_kmeans(&w, &imp_q, k, 40, run)?;
            let b = quartic_weighted_kmeans(&w, &imp_h0, k, 40, run)?;
            if a.centroids() != b.centroids() || a.assignments() != b.assignments() {
                degenerate_match = false;
            }
        }
    }
    ck.le("quartic_objective_nonincreasing", worst_increase, 0.0);
    ck.push(
        "zero_quartic_degenerates_bitwise",
        if degenerate_match { 0.0 } else { 1.0 },
        0.0,
        degenerate_match,
    );

    Ok(ck.finish())
}
