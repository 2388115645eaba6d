//! Analytic comparisons between one-hidden-unit ReLU models.
//!
//! For `f_w(x) = relu(w^T x)` with `x ~ N(0, diag(lambda))`, the expected
//! squared difference between two units has a closed expansion in the
//! orthonormal probabilists' Hermite coefficients of ReLU. With
//! `a^2 = w^T S w`, `b^2 = what^T S what`, `rho = w^T S what / (a b)`:
//!
//! `E[(f_w - f_what)^2] = a^2/2 + b^2/2 - 2ab * sum_p sigma_hat_p^2 rho^p`
//!
//! (positive homogeneity `relu(a t) = a relu(t)` reduces non-unit vectors to
//! the unit-vector expansion). The module also carries exhaustive verifiers
//! that compare the importance-weighted objective's argmin against the
//! analytic MSE argmin over all pruning masks or quantization assignments.
//!
//! Hermite coefficients for even `p >= 2` come from Gauss-Hermite quadrature
//! of `E[relu(Z) h_p(Z)]` rather than a printed closed form; the quadrature
//! integrand has a kink at zero, so accuracy grows like `1/nodes` and the
//! default node count is chosen large.

use std::sync::OnceLock;

use crate::{Error, Result};

const SQRT_PI: f64 = 1.772_453_850_905_516_f64;
const GH_NODES: usize = 8192;

/// Gauss-Hermite nodes/weights for `integral e^{-x^2} f(x) dx`.
///
/// Golub-Welsch on the Jacobi matrix (zero diagonal, off-diagonals
/// `sqrt(j/2)`): implicit-shift QL accumulating only the first eigenvector
/// component, from which `weight = sqrt(pi) * q0^2`.
fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let mut d = vec![0.0_f64; n];
    let mut e: Vec<f64> = (0..n)
        .map(|j| {
            if j + 1 < n {
                ((j + 1) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut q = vec![0.0_f64; n];
    q[0] = 1.0;

    for l in 0..n {
        let mut iters = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iters += 1;
            assert!(iters <= 50, "QL iteration did not converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0_f64, 1.0_f64);
            let mut p = 0.0_f64;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                f = q[i + 1];
                q[i + 1] = s * q[i] + c * f;
                q[i] = c * q[i] - s * f;
            }
            if !underflow {
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }
    }

    let mut pairs: Vec<(f64, f64)> = d
        .into_iter()
        .zip(q)
        .map(|(x, q0)| (x, SQRT_PI * q0 * q0))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mass: f64 = pairs.iter().map(|&(_, w)| w).sum();
    assert!(
        (mass - SQRT_PI).abs() < 1e-10,
        "quadrature zeroth moment off: {mass}"
    );
    pairs
}

fn gh_cache() -> &'static [(f64, f64)] {
    static CACHE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    CACHE.get_or_init(|| gauss_hermite(GH_NODES))
}

/// Quadrature values of `E[relu(Z) h_p(Z)]` for p = 0..=p_max, orthonormal
/// probabilists' basis.
fn relu_hermite_quadrature(p_max: usize) -> Vec<f64> {
    let nodes = gh_cache();
    let mut sums = vec![0.0_f64; p_max + 1];
    for &(x, wt) in nodes {
        let z = std::f64::consts::SQRT_2 * x;
        if z < 0.0 {
            continue;
        }
        let f = wt * z;
        let mut hm1 = 1.0_f64;
        sums[0] += f * hm1;
        if p_max >= 1 {
            let mut h = z;
            sums[1] += f * h;
            for p in 2..=p_max {
                let next = (z * h - ((p - 1) as f64).sqrt() * hm1) / (p as f64).sqrt();
                hm1 = h;
                h = next;
                sums[p] += f * h;
            }
        }
    }
    sums.iter_mut().for_each(|s| *s /= SQRT_PI);
    sums
}

/// ReLU expansion coefficients in the orthonormal probabilists' Hermite
/// basis. `sigma_hat[0]` and `sigma_hat[1]` are the exact constants
/// `1/sqrt(2 pi)` and `1/2`, odd orders vanish, even orders `>= 2` carry the
/// quadrature value.
#[derive(Debug, Clone)]
pub struct HermiteCoeffs {
    sigma_hat: Vec<f64>,
}

impl HermiteCoeffs {
    pub fn p_max(&self) -> usize {
        self.sigma_hat.len() - 1
    }
    pub fn sigma_hat(&self) -> &[f64] {
        &self.sigma_hat
    }
    pub fn get(&self, p: usize) -> f64 {
        self.sigma_hat[p]
    }

    /// Partial Parseval sum `sum_p sigma_hat_p^2`; approaches
    /// `E[relu(Z)^2] = 1/2` from below.
    pub fn parseval_partial(&self) -> f64 {
        self.sigma_hat.iter().map(|&s| s * s).sum()
    }

    /// `1/2 - parseval_partial`, the series mass dropped by truncation.
    pub fn truncation_gap(&self) -> f64 {
        0.5 - self.parseval_partial()
    }
}

pub fn hermite_coeffs(p_max: usize) -> Result<HermiteCoeffs> {
    if p_max < 1 {
        return Err(Error::domain("p_max must be at least 1"));
    }
    let quad = relu_hermite_quadrature(p_max);
    let mut sigma_hat = vec![0.0_f64; p_max + 1];
    sigma_hat[0] = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    sigma_hat[1] = 0.5;
    for p in (2..=p_max).step_by(2) {
        sigma_hat[p] = quad[p];
    }
    Ok(HermiteCoeffs { sigma_hat })
}

/// One row of the closed-form-vs-quadrature comparison.
#[derive(Debug, Clone)]
pub struct FormulaCheck {
    pub p: usize,
    /// Signed quadrature value of `E[relu(Z) h_p(Z)]`.
    pub quadrature: f64,
    /// `((p-3)!!)^2 / sqrt(2 pi p!)` for even p >= 2 (zero for odd p >= 3).
    pub formula_printed: f64,
    /// `(p-3)!! / sqrt(2 pi p!)` for even p >= 2.
    pub formula_corrected: f64,
}

fn double_factorial(n: i64) -> f64 {
    let mut acc = 1.0;
    let mut k = n;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Compare both candidate closed forms for the magnitude of every
/// coefficient against quadrature. The two forms agree at p = 2 and 4 and
/// split from p = 6 on; quadrature arbitrates.
pub fn hermite_formula_check(p_max: usize) -> Result<Vec<FormulaCheck>> {
    if p_max < 1 {
        return Err(Error::domain("p_max must be at least 1"));
    }
    let quad = relu_hermite_quadrature(p_max);
    let mut rows = Vec::with_capacity(p_max + 1);
    for (p, &q) in quad.iter().enumerate() {
        let (printed, corrected) = match p {
            0 => {
                let v = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
                (v, v)
            }
            1 => (0.5, 0.5),
            _ if p % 2 == 1 => (0.0, 0.0),
            _ => {
                let df = double_factorial(p as i64 - 3);
                let denom = (2.0 * std::f64::consts::PI * factorial(p)).sqrt();
                (df * df / denom, df / denom)
            }
        };
        rows.push(FormulaCheck {
            p,
            quadrature: q,
            formula_printed: printed,
            formula_corrected: corrected,
        });
    }
    Ok(rows)
}

fn check_diag(lambda: &[f64], m: usize) -> Result<()> {
    if lambda.len() != m {
        return Err(Error::shape("diagonal covariance length mismatch"));
    }
    if lambda.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::domain("covariance diagonal must be positive"));
    }
    Ok(())
}

fn quad_form(a: &[f64], b: &[f64], lambda: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(lambda)
        .map(|((&x, &y), &l)| l * x * y)
        .sum()
}

/// `(w - what)^T diag(lambda) (w - what)`, the quadratic objective the
/// golden rules minimize.
pub fn relu_weighted_objective(w: &[f64], what: &[f64], lambda: &[f64]) -> Result<f64> {
    if w.len() != what.len() {
        return Err(Error::shape("weight vectors differ in length"));
    }
    check_diag(lambda, w.len())?;
    Ok(w
        .iter()
        .zip(what)
        .zip(lambda)
        .map(|((&x, &y), &l)| l * (x - y) * (x - y))
        .sum())
}

/// The quadratic-form aliases of the expansion analysis:
/// `A = w^T S w`, `B = what^T S (what - w)`, `C = (w - what)^T S (w - what)`.
#[derive(Debug, Clone)]
pub struct DpTerms {
    pub a2: f64,
    pub b2: f64,
    pub cross: f64,
    pub rho: f64,
    pub a_term: f64,
    pub b_term: f64,
    pub c_term: f64,
}

impl DpTerms {
    pub fn new(w: &[f64], what: &[f64], lambda: &[f64]) -> Result<Self> {
        if w.len() != what.len() {
            return Err(Error::shape("weight vectors differ in length"));
        }
        check_diag(lambda, w.len())?;
        let a2 = quad_form(w, w, lambda);
        let b2 = quad_form(what, what, lambda);
        let cross = quad_form(w, what, lambda);
        let denom = (a2 * b2).sqrt();
        let rho = if denom > 0.0 { cross / denom } else { 0.0 };
        if rho.abs() > 1.0 + 1e-12 {
            return Err(Error::numeric(format!("correlation {rho} outside [-1, 1]")));
        }
        let diff: Vec<f64> = w.iter().zip(what).map(|(&x, &y)| x - y).collect();
        let c_term = quad_form(&diff, &diff, lambda);
        let b_term = cross - b2; // what^T S (w - what), negated below
        Ok(DpTerms {
            a2,
            b2,
            cross,
            rho: rho.clamp(-1.0, 1.0),
            a_term: a2,
            b_term: -b_term, // B = what^T S (what - w)
            c_term,
        })
    }
}

/// `D_p = A^p - 2 (A + B - C)^p + (A + 2B - C)^p`.
pub fn dp_term(t: &DpTerms, p: u32) -> f64 {
    let (a, b, c) = (t.a_term, t.b_term, t.c_term);
    a.powi(p as i32) - 2.0 * (a + b - c).powi(p as i32) + (a + 2.0 * b - c).powi(p as i32)
}

/// Truncated analytic MSE between the ReLU units with weights `w` and
/// `what`. The dropped series mass is `truncation_gap() * 2ab` at worst.
pub fn analytic_relu_mse(
    w: &[f64],
    what: &[f64],
    lambda: &[f64],
    coeffs: &HermiteCoeffs,
) -> Result<f64> {
    if coeffs.p_max() < 10 || coeffs.p_max() % 2 != 0 {
        return Err(Error::domain("analytic MSE needs an even p_max >= 10"));
    }
    let t = DpTerms::new(w, what, lambda)?;
    Ok(analytic_mse_from_terms(&t, coeffs))
}

/// Worst-case series mass dropped by truncating at `p_max`:
/// `(1/2 - sum sigma_hat_p^2) * 2ab`. The truncated MSE overshoots the true
/// value by at most this much (the dropped terms are nonnegative).
pub fn mse_truncation_bound(
    w: &[f64],
    what: &[f64],
    lambda: &[f64],
    coeffs: &HermiteCoeffs,
) -> Result<f64> {
    let t = DpTerms::new(w, what, lambda)?;
    Ok(2.0 * (t.a2 * t.b2).sqrt() * coeffs.truncation_gap())
}

fn analytic_mse_from_terms(t: &DpTerms, coeffs: &HermiteCoeffs) -> f64 {
    let (a, b) = (t.a2.sqrt(), t.b2.sqrt());
    if a == 0.0 || b == 0.0 {
        return 0.5 * t.a2 + 0.5 * t.b2;
    }
    let mut series = 0.0;
    let mut rho_pow = 1.0;
    for &s in coeffs.sigma_hat() {
        series += s * s * rho_pow;
        rho_pow *= t.rho;
    }
    0.5 * t.a2 + 0.5 * t.b2 - 2.0 * a * b * series
}

fn within_tie(v: f64, min: f64, tol: f64) -> bool {
    v - min <= tol * min.abs().max(1.0)
}

/// Exhaustive pruning comparison: over all masks with `keep_count` kept
/// coordinates, does the weighted-objective argmin coincide with the
/// analytic-MSE argmin? Ties within `tol` (relative) count as co-minimizers
/// and the sets must match.
#[derive(Debug, Clone)]
pub struct PruneVerdict {
    pub keep_count: usize,
    /// Bit i set = coordinate i kept.
    pub objective_argmin: u64,
    pub mse_argmin: u64,
    pub agree: bool,
    /// `mse(objective_argmin) - min mse`.
    pub gap: f64,
}

pub fn verify_prune_optimality(
    w: &[f64],
    lambda: &[f64],
    keep_count: usize,
    coeffs: &HermiteCoeffs,
    tol: f64,
) -> Result<PruneVerdict> {
    let m = w.len();
    if m > 20 {
        return Err(Error::domain("mask enumeration limited to m <= 20"));
    }
    if keep_count > m {
        return Err(Error::domain("keep_count exceeds the number of weights"));
    }
    check_diag(lambda, m)?;

    let mut masks: Vec<u64> = (0u64..(1 << m))
        .filter(|mask| mask.count_ones() as usize == keep_count)
        .collect();
    masks.sort_unstable();

    let mut what = vec![0.0; m];
    let mut evals: Vec<(u64, f64, f64)> = Vec::with_capacity(masks.len());
    for &mask in &masks {
        for i in 0..m {
            what[i] = if mask >> i & 1 == 1 { w[i] } else { 0.0 };
        }
        let obj = relu_weighted_objective(w, &what, lambda)?;
        let mse = analytic_relu_mse(w, &what, lambda, coeffs)?;
        evals.push((mask, obj, mse));
    }
    let obj_min = evals.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    let mse_min = evals.iter().map(|e| e.2).fold(f64::INFINITY, f64::min);
    let obj_set: Vec<u64> = evals
        .iter()
        .filter(|e| within_tie(e.1, obj_min, tol))
        .map(|e| e.0)
        .collect();
    let mse_set: Vec<u64> = evals
        .iter()
        .filter(|e| within_tie(e.2, mse_min, tol))
        .map(|e| e.0)
        .collect();
    let objective_argmin = obj_set[0];
    let mse_argmin = mse_set[0];
    let gap = evals
        .iter()
        .find(|e| e.0 == objective_argmin)
        .map(|e| e.2 - mse_min)
        .unwrap();
    Ok(PruneVerdict {
        keep_count,
        objective_argmin,
        mse_argmin,
        agree: obj_set == mse_set,
        gap,
    })
}

pub const VERDICT_CSV_COLUMNS: &str = "instance_id,objective_argmin,mse_argmin,agree,gap";

impl PruneVerdict {
    pub fn csv_row(&self, instance_id: usize) -> String {
        format!(
            "{instance_id},{:#06x},{:#06x},{},{:.16e}",
            self.objective_argmin, self.mse_argmin, self.agree, self.gap
        )
    }
}

impl QuantVerdict {
    pub fn csv_row(&self, instance_id: usize) -> String {
        let fmt = |a: &[usize]| {
            a.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("")
        };
        format!(
            "{instance_id},{},{},{},{:.16e}",
            fmt(&self.objective_argmin),
            fmt(&self.mse_argmin),
            self.agree,
            self.gap
        )
    }
}

/// Minimize a 1-d function by coarse grid scan plus golden-section
/// refinement around the best cell.
fn minimize_scalar(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const GRID: usize = 257;
    let step = (hi - lo) / (GRID - 1) as f64;
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..GRID {
        let v = f(lo + step * i as f64);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let mut a = lo + step * best_i.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_i + 1) as f64).min(hi);
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..90 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

fn decode_assignment(idx: usize, m: usize, k: usize) -> Vec<usize> {
    let mut a = Vec::with_capacity(m);
    let mut v = idx;
    for _ in 0..m {
        a.push(v % k);
        v /= k;
    }
    a
}

fn weighted_centroids(w: &[f64], lambda: &[f64], assign: &[usize], k: usize) -> Vec<f64> {
    let mut num = vec![0.0; k];
    let mut den = vec![0.0; k];
    for (i, &a) in assign.iter().enumerate() {
        num[a] += lambda[i] * w[i];
        den[a] += lambda[i];
    }
    (0..k)
        .map(|j| if den[j] > 0.0 { num[j] / den[j] } else { 0.0 })
        .collect()
}

fn reconstruct(assign: &[usize], cents: &[f64]) -> Vec<f64> {
    assign.iter().map(|&a| cents[a]).collect()
}

/// Exhaustive quantization comparison over all `k^m` assignments: centroids
/// for the weighted objective are per-cluster weighted means; centroids for
/// the analytic MSE come from coordinate descent with a 1-d numeric
/// minimizer. `agree` holds when the weighted argmin's MSE is within `tol`
/// of the global MSE minimum.
#[derive(Debug, Clone)]
pub struct QuantVerdict {
    pub k: usize,
    pub objective_argmin: Vec<usize>,
    pub mse_argmin: Vec<usize>,
    pub agree: bool,
    pub gap: f64,
}

pub fn verify_quant_optimality(
    w: &[f64],
    lambda: &[f64],
    k: usize,
    coeffs: &HermiteCoeffs,
    tol: f64,
) -> Result<QuantVerdict> {
    let m = w.len();
    if m > 8 || k > 3 {
        return Err(Error::domain(
            "assignment enumeration limited to m <= 8, k <= 3",
        ));
    }
    if k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    check_diag(lambda, m)?;

    let wmin = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let wmax = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pad = (wmax - wmin).max(1.0);
    let (lo, hi) = (wmin - pad, wmax + pad);

    let total = k.pow(m as u32);
    let mut best_obj = f64::INFINITY;
    let mut best_obj_assign = Vec::new();
    let mut best_obj_mse = f64::INFINITY;
    let mut best_mse = f64::INFINITY;
    let mut best_mse_assign = Vec::new();

    for idx in 0..total {
        let assign = decode_assignment(idx, m, k);
        let cents = weighted_centroids(w, lambda, &assign, k);
        let what = reconstruct(&assign, &cents);
        let obj = relu_weighted_objective(w, &what, lambda)?;

        // MSE-optimal centroids by coordinate descent from the weighted means.
        let mut mse_cents = cents;
        let occupied: Vec<usize> = (0..k).filter(|&j| assign.contains(&j)).collect();
        let eval = |cs: &[f64]| -> f64 {
            let cand = reconstruct(&assign, cs);
            let t = DpTerms::new(w, &cand, lambda).expect("checked inputs");
            analytic_mse_from_terms(&t, coeffs)
        };
        let mut current = eval(&mse_cents);
        for _ in 0..8 {
            for &j in &occupied {
                let mut probe = mse_cents.clone();
                let best = minimize_scalar(
                    |c| {
                        probe[j] = c;
                        eval(&probe)
                    },
                    lo,
                    hi,
                );
                mse_cents[j] = best;
                probe[j] = best;
            }
            let next = eval(&mse_cents);
            if current - next <= 1e-15 * current.abs().max(1.0) {
                current = next;
                break;
            }
            current = next;
        }
        let mse = current;

        if obj < best_obj {
            best_obj = obj;
            best_obj_assign = assign.clone();
            best_obj_mse = mse;
        }
        if mse < best_mse {
            best_mse = mse;
            best_mse_assign = assign;
        }
    }

    let gap = best_obj_mse - best_mse;
    Ok(QuantVerdict {
        k,
        objective_argmin: best_obj_assign,
        mse_argmin: best_mse_assign,
        agree: within_tie(best_obj_mse, best_mse, tol),
        gap,
    })
}
