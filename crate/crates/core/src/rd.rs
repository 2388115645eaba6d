//! Weighted water-filling rate-distortion for diagonal linear sources.
//!
//! The source is `W ~ N(0, diag(sigma_w))` feeding the linear model
//! `f_w(x) = w^T x` with `E[X_i^2] = lambda_x_i`. Distortion decomposes as
//! `sum_i lambda_i D_i` with per-coordinate levels `D_i`, and the optimal
//! levels satisfy `D_i = min(mu / lambda_i, sigma_i^2)` for a common level
//! `mu`. Rates are kept in nats internally; conversion to bits happens only
//! at reporting boundaries.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::rng::substream;
use crate::{Error, Result};

/// Per-coordinate prior variances and input second moments.
#[derive(Debug, Clone)]
pub struct LinearSource {
    sigma_w: Vec<f64>,
    lambda_x: Vec<f64>,
}

impl LinearSource {
    pub fn new(sigma_w: Vec<f64>, lambda_x: Vec<f64>) -> Result<Self> {
        if sigma_w.is_empty() || sigma_w.len() != lambda_x.len() {
            return Err(Error::shape(
                "sigma_w and lambda_x must be nonempty and equal length",
            ));
        }
        let positive = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x > 0.0);
        if !positive(&sigma_w) || !positive(&lambda_x) {
            return Err(Error::domain(
                "source entries must be strictly positive and finite",
            ));
        }
        Ok(LinearSource { sigma_w, lambda_x })
    }

    /// The width-3/2/1 worked example: both diagonals equal `[3, 2, 1]`.
    pub fn three_two_one() -> Self {
        LinearSource {
            sigma_w: vec![3.0, 2.0, 1.0],
            lambda_x: vec![3.0, 2.0, 1.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.sigma_w.len()
    }
    pub fn sigma_w(&self) -> &[f64] {
        &self.sigma_w
    }
    pub fn lambda_x(&self) -> &[f64] {
        &self.lambda_x
    }

    /// Total fill `sum_i lambda_i sigma_i^2`; distortions above this are free.
    pub fn d_max(&self) -> f64 {
        self.sigma_w
            .iter()
            .zip(&self.lambda_x)
            .map(|(&s, &l)| l * s)
            .sum()
    }
}

/// A solved water-filling instance.
#[derive(Debug, Clone)]
pub struct WaterFillSolution {
    pub mu: f64,
    pub levels: Vec<f64>,
    pub target_distortion: f64,
    pub rate_nats: f64,
}

impl WaterFillSolution {
    pub fn rate_bits(&self) -> f64 {
        self.rate_nats / std::f64::consts::LN_2
    }

    /// True when coordinate `i` is at total fill (`D_i = sigma_i^2`), i.e.
    /// the compressor discards it.
    pub fn is_full(&self, src: &LinearSource, i: usize) -> bool {
        self.mu >= src.lambda_x[i] * src.sigma_w[i]
    }
}

/// Scalar Gaussian rate-distortion `R(D) = max(0, 1/2 log2(sigma^2/D))`,
/// in bits.
pub fn scalar_gaussian_rd(sigma2: f64, d: f64) -> Result<f64> {
    if !(sigma2 > 0.0) || !(d > 0.0) || !sigma2.is_finite() || !d.is_finite() {
        return Err(Error::domain("variance and distortion must be positive"));
    }
    if d >= sigma2 {
        return Ok(0.0);
    }
    Ok(0.5 * (sigma2 / d).log2())
}

fn filled_distortion(src: &LinearSource, mu: f64) -> f64 {
    src.lambda_x
        .iter()
        .zip(&src.sigma_w)
        .map(|(&l, &s)| l * (mu / l).min(s))
        .sum()
}

fn levels_for_mu(src: &LinearSource, mu: f64) -> Vec<f64> {
    src.lambda_x
        .iter()
        .zip(&src.sigma_w)
        .map(|(&l, &s)| (mu / l).min(s))
        .collect()
}

fn rate_from_levels(src: &LinearSource, levels: &[f64]) -> f64 {
    src.sigma_w
        .iter()
        .zip(levels)
        .map(|(&s, &d)| 0.5 * (s / d).ln())
        .sum()
}

/// Solve `sum_i lambda_i min(mu/lambda_i, sigma_i^2) = D` for `mu` by
/// bisection (the left side is piecewise linear and nondecreasing), then
/// read off levels and rate.
pub fn waterfill(src: &LinearSource, d: f64) -> Result<WaterFillSolution> {
    let d_max = src.d_max();
    if !(d > 0.0) || d > d_max || !d.is_finite() {
        return Err(Error::domain(format!(
            "distortion {d} outside (0, {d_max}]"
        )));
    }
    let mu_hi = src
        .lambda_x
        .iter()
        .zip(&src.sigma_w)
        .map(|(&l, &s)| l * s)
        .fold(0.0_f64, f64::max);
    let mu = if d == d_max {
        mu_hi
    } else {
        let (mut lo, mut hi) = (0.0_f64, mu_hi);
        for _ in 0..200 {
            if hi - lo <= 1e-12 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if filled_distortion(src, mid) < d {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // Polish: the active set fixes mu in closed form
        // (|active| * mu + sum_full lambda sigma^2 = d), which lands
        // breakpoint distortions exactly on the boundary.
        let mut mu = 0.5 * (lo + hi);
        for _ in 0..=src.dim() {
            let mut full_mass = 0.0;
            let mut active = 0usize;
            for (&l, &s) in src.lambda_x.iter().zip(&src.sigma_w) {
                if l * s > mu {
                    active += 1;
                } else {
                    full_mass += l * s;
                }
            }
            if active == 0 {
                break;
            }
            let refined = (d - full_mass) / active as f64;
            if !(refined > 0.0) || refined == mu {
                break;
            }
            mu = refined;
        }
        mu
    };
    let levels = levels_for_mu(src, mu);
    let rate_nats = rate_from_levels(src, &levels);
    Ok(WaterFillSolution {
        mu,
        levels,
        target_distortion: d,
        rate_nats,
    })
}

/// Pointwise water-filling over an ascending distortion grid.
pub fn rd_curve(src: &LinearSource, grid: &[f64]) -> Result<Vec<WaterFillSolution>> {
    if grid.is_empty() {
        return Err(Error::domain("distortion grid is empty"));
    }
    if grid.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::domain("distortion grid must be strictly ascending"));
    }
    grid.iter().map(|&d| waterfill(src, d)).collect()
}

/// Header for the curve CSV: `D,rate_bits,mu,D_1..D_m`.
pub fn curve_csv_columns(m: usize) -> String {
    let mut s = String::from("D,rate_bits,mu");
    for i in 1..=m {
        s.push_str(&format!(",D_{i}"));
    }
    s
}

pub fn curve_csv_row(sol: &WaterFillSolution) -> String {
    let mut s = format!(
        "{:.16e},{:.16e},{:.16e}",
        sol.target_distortion,
        sol.rate_bits(),
        sol.mu
    );
    for d in &sol.levels {
        s.push_str(&format!(",{d:.16e}"));
    }
    s
}

/// One compressed draw given a solved instance; consumes `rng` coordinate by
/// coordinate in index order.
fn compress_with_rng(
    src: &LinearSource,
    sol: &WaterFillSolution,
    w: &[f64],
    rng: &mut ChaCha12Rng,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        let s2 = src.sigma_w[i];
        if sol.is_full(src, i) {
            out.push(0.0);
        } else {
            let di = sol.levels[i];
            let mean = (s2 - di) / s2 * w[i];
            let var = di * (s2 - di) / s2;
            let z: f64 = rng.sample(StandardNormal);
            out.push(mean + var.sqrt() * z);
        }
    }
    out
}

/// The achieving compressor: full coordinates are set to zero, active
/// coordinates are drawn from the Gaussian conditional law with
/// `E[What | W=w] = (sigma^2 - D_i)/sigma^2 * w_i` and
/// `Var[What | W=w] = D_i (sigma^2 - D_i) / sigma^2`.
pub fn optimal_linear_compressor(
    src: &LinearSource,
    d: f64,
    w: &[f64],
    seed: u64,
) -> Result<Vec<f64>> {
    if w.len() != src.dim() {
        return Err(Error::shape("weight vector length must match source dim"));
    }
    let sol = waterfill(src, d)?;
    let mut rng = substream(seed, 0);
    Ok(compress_with_rng(src, &sol, w, &mut rng))
}

/// Per-coordinate sample statistics from an achievability run.
#[derive(Debug, Clone)]
pub struct CoordStats {
    pub index: usize,
    pub full: bool,
    pub level: f64,
    pub var_what: f64,
    /// `sigma_i^2 - D_i`, the variance the construction promises for What.
    pub var_what_expected: f64,
    pub cov_what_err: f64,
    pub cov_se: f64,
    pub max_abs_what: f64,
}

/// Monte Carlo check of the compressor against its own construction.
#[derive(Debug, Clone)]
pub struct AchievabilityReport {
    pub n_samples: usize,
    pub target_distortion: f64,
    pub empirical_distortion: f64,
    /// `sum over active i of 1/2 ln(sigma_i^2 / D_i)`.
    pub analytic_mi_nats: f64,
    pub rate_nats: f64,
    pub coords: Vec<CoordStats>,
}

pub const ACHIEVABILITY_CSV_COLUMNS: &str = "kind,index,lambda_x,sigma_w2,level,full,\
var_what,var_what_expected,cov_what_err,cov_se,max_abs_what,\
empirical_distortion,target_distortion,mi_nats";

impl AchievabilityReport {
    pub fn csv_rows(&self, src: &LinearSource) -> Vec<String> {
        let mut rows: Vec<String> = self
            .coords
            .iter()
            .map(|c| {
                format!(
                    "coord,{},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},,,",
                    c.index,
                    src.lambda_x[c.index],
                    src.sigma_w[c.index],
                    c.level,
                    c.full,
                    c.var_what,
                    c.var_what_expected,
                    c.cov_what_err,
                    c.cov_se,
                    c.max_abs_what
                )
            })
            .collect();
        rows.push(format!(
            "summary,,,,,,,,,,,{:.16e},{:.16e},{:.16e}",
            self.empirical_distortion, self.target_distortion, self.analytic_mi_nats
        ));
        rows
    }
}

#[derive(Clone)]
struct Accum {
    sum_what: Vec<f64>,
    sum_what2: Vec<f64>,
    sum_err: Vec<f64>,
    sum_err2: Vec<f64>,
    sum_cross: Vec<f64>,
    sum_cross2: Vec<f64>,
    max_abs_what: Vec<f64>,
}

impl Accum {
    fn new(m: usize) -> Self {
        Accum {
            sum_what: vec![0.0; m],
            sum_what2: vec![0.0; m],
            sum_err: vec![0.0; m],
            sum_err2: vec![0.0; m],
            sum_cross: vec![0.0; m],
            sum_cross2: vec![0.0; m],
            max_abs_what: vec![0.0; m],
        }
    }

    fn add_sample(&mut self, w: &[f64], what: &[f64]) {
        for i in 0..w.len() {
            let e = w[i] - what[i];
            let c = what[i] * e;
            self.sum_what[i] += what[i];
            self.sum_what2[i] += what[i] * what[i];
            self.sum_err[i] += e;
            self.sum_err2[i] += e * e;
            self.sum_cross[i] += c;
            self.sum_cross2[i] += c * c;
            self.max_abs_what[i] = self.max_abs_what[i].max(what[i].abs());
        }
    }

    fn merge(&mut self, other: &Accum) {
        for i in 0..self.sum_what.len() {
            self.sum_what[i] += other.sum_what[i];
            self.sum_what2[i] += other.sum_what2[i];
            self.sum_err[i] += other.sum_err[i];
            self.sum_err2[i] += other.sum_err2[i];
            self.sum_cross[i] += other.sum_cross[i];
            self.sum_cross2[i] += other.sum_cross2[i];
            self.max_abs_what[i] = self.max_abs_what[i].max(other.max_abs_what[i]);
        }
    }
}

/// Draw `n_samples` sources, compress each, and report the empirical moments
/// next to their analytic targets. Sample `s` uses substream `s`, so the
/// result does not depend on the number of worker threads.
pub fn achievability_report(
    src: &LinearSource,
    d: f64,
    n_samples: usize,
    seed: u64,
) -> Result<AchievabilityReport> {
    if n_samples < 10_000 {
        return Err(Error::domain("achievability runs need >= 10^4 samples"));
    }
    let sol = waterfill(src, d)?;
    let m = src.dim();

    const CHUNK: usize = 4096;
    let n_chunks = n_samples.div_ceil(CHUNK);
    let partials: Vec<Accum> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * CHUNK;
            let end = ((chunk + 1) * CHUNK).min(n_samples);
            let mut acc = Accum::new(m);
            let mut w = vec![0.0; m];
            for s in start..end {
                let mut rng = substream(seed, s as u64);
                for i in 0..m {
                    let z: f64 = rng.sample(StandardNormal);
                    w[i] = src.sigma_w[i].sqrt() * z;
                }
                let what = compress_with_rng(src, &sol, &w, &mut rng);
                acc.add_sample(&w, &what);
            }
            acc
        })
        .collect();
    let mut acc = Accum::new(m);
    for p in &partials {
        acc.merge(p);
    }

    let n = n_samples as f64;
    let mut coords = Vec::with_capacity(m);
    let mut empirical_distortion = 0.0;
    for i in 0..m {
        let var_what = (acc.sum_what2[i] - acc.sum_what[i] * acc.sum_what[i] / n) / (n - 1.0);
        let cov =
            (acc.sum_cross[i] - acc.sum_what[i] * acc.sum_err[i] / n) / (n - 1.0);
        let var_cross =
            (acc.sum_cross2[i] - acc.sum_cross[i] * acc.sum_cross[i] / n) / (n - 1.0);
        let cov_se = (var_cross / n).sqrt();
        empirical_distortion += src.lambda_x[i] * acc.sum_err2[i] / n;
        coords.push(CoordStats {
            index: i,
            full: sol.is_full(src, i),
            level: sol.levels[i],
            var_what,
            var_what_expected: src.sigma_w[i] - sol.levels[i],
            cov_what_err: cov,
            cov_se,
            max_abs_what: acc.max_abs_what[i],
        });
    }

    let analytic_mi_nats: f64 = (0..m)
        .filter(|&i| !sol.is_full(src, i))
        .map(|i| 0.5 * (src.sigma_w[i] / sol.levels[i]).ln())
        .sum();

    Ok(AchievabilityReport {
        n_samples,
        target_distortion: d,
        empirical_distortion,
        analytic_mi_nats,
        rate_nats: sol.rate_nats,
        coords,
    })
}
