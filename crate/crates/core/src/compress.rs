//! Practical compressors over a flat weight vector.
//!
//! Pruning zeroes the weights with the smallest importance-weighted scores.
//! Quantization clusters weights around shared centroids: `weighted_kmeans`
//! minimizes `sum_i I_i (w_i - c_{A_i})^2`, `quartic_weighted_kmeans`
//! minimizes the quadratic-plus-quartic objective whose per-cluster centroid
//! is the unique real root of a strictly increasing cubic.
//!
//! Both k-means variants share the same seeding, assignment, and
//! empty-cluster handling, so the quartic variant with all-zero quartic
//! scores reproduces the quadratic variant bit for bit.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::importance::ImportanceDiag;
use crate::rng::substream;
use crate::{Error, Result};

/// Keep/drop flags for every weight plus the realized keep fraction.
#[derive(Debug, Clone)]
pub struct PruneMask {
    keep: Vec<bool>,
    ratio: f64,
}

impl PruneMask {
    pub fn keep(&self) -> &[bool] {
        &self.keep
    }
    pub fn len(&self) -> usize {
        self.keep.len()
    }
    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }
    pub fn kept_count(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }
    pub fn ratio(&self) -> f64 {
        self.ratio
    }
}

/// Quantization result: shared centroids, one assignment per weight, and
/// per-cluster member counts (`sum m_j = m`, empty clusters allowed).
#[derive(Debug, Clone)]
pub struct Codebook {
    centroids: Vec<f64>,
    assignments: Vec<usize>,
    cluster_sizes: Vec<usize>,
}

impl Codebook {
    pub fn new(centroids: Vec<f64>, assignments: Vec<usize>) -> Result<Self> {
        let k = centroids.len();
        if k == 0 {
            return Err(Error::domain("codebook needs at least one centroid"));
        }
        if let Some(&bad) = assignments.iter().find(|&&a| a >= k) {
            return Err(Error::domain(format!(
                "assignment {bad} out of range for {k} centroids"
            )));
        }
        let mut cluster_sizes = vec![0usize; k];
        for &a in &assignments {
            cluster_sizes[a] += 1;
        }
        Ok(Codebook {
            centroids,
            assignments,
            cluster_sizes,
        })
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }
    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }
    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }
    pub fn cluster_sizes(&self) -> &[usize] {
        &self.cluster_sizes
    }
}

/// `sum_i I_i (w_i - what_i)^2 + sum_i H_i (w_i - what_i)^4`.
pub fn objective_value(w: &[f64], what: &[f64], imp: &ImportanceDiag) -> f64 {
    let mut acc = 0.0;
    for i in 0..w.len() {
        let d = w[i] - what[i];
        acc += imp.quadratic()[i] * d * d;
        if let Some(h) = imp.quartic() {
            acc += h[i] * d * d * d * d;
        }
    }
    acc
}

fn round_half_away(x: f64) -> usize {
    x.round() as usize
}

/// Zero the `m - round(r*m)` smallest-scored weights, score
/// `I_i w_i^2 + H_i w_i^4`, ties pruned at the lower global index first.
pub fn prune(w: &[f64], imp: &ImportanceDiag, r: f64) -> Result<(PruneMask, Vec<f64>)> {
    if imp.len() != w.len() {
        return Err(Error::shape("importance length must match weight length"));
    }
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::domain(format!("keep ratio {r} outside [0, 1]")));
    }
    let m = w.len();
    let keep_count = round_half_away(r * m as f64).min(m);
    let mut order: Vec<usize> = (0..m).collect();
    let score = |i: usize| {
        let mut s = imp.quadratic()[i] * w[i] * w[i];
        if let Some(h) = imp.quartic() {
            s += h[i] * w[i].powi(4);
        }
        s
    };
    order.sort_by(|&a, &b| score(a).total_cmp(&score(b)).then(a.cmp(&b)));
    let mut keep = vec![true; m];
    for &i in order.iter().take(m - keep_count) {
        keep[i] = false;
    }
    let what: Vec<f64> = w
        .iter()
        .zip(&keep)
        .map(|(&wi, &ki)| if ki { wi } else { 0.0 })
        .collect();
    let mask = PruneMask {
        keep,
        ratio: keep_count as f64 / m as f64,
    };
    Ok((mask, what))
}

/// Fraction of weights kept.
pub fn pruning_compression_ratio(mask: &PruneMask) -> f64 {
    if mask.is_empty() {
        return 0.0;
    }
    mask.kept_count() as f64 / mask.len() as f64
}

/// `what_i = c_{A_i}`.
pub fn apply_codebook(w: &[f64], cb: &Codebook) -> Result<Vec<f64>> {
    if cb.assignments.len() != w.len() {
        return Err(Error::shape("codebook does not cover the weight vector"));
    }
    Ok(cb.assignments.iter().map(|&a| cb.centroids[a]).collect())
}

/// Smallest `t >= 0` with `mj * 2^t >= m` (exact integer ceiling of
/// `log2(m / mj)`).
fn ceil_log2_ratio(m: u128, mj: u128) -> u32 {
    let mut t = 0u32;
    let mut cover = mj;
    while cover < m {
        cover <<= 1;
        t += 1;
    }
    t
}

/// Compression ratio of a `k`-cluster codebook over `m` weights of `b` bits:
/// `m*b / (sum_j m_j * ceil(log2(m/m_j)) + k*b)`. Empty clusters add no
/// per-weight bits but still cost `b` codebook bits.
pub fn quantization_compression_ratio(
    m: usize,
    b: u32,
    cluster_sizes: &[usize],
    k: usize,
) -> Result<f64> {
    if k == 0 || cluster_sizes.len() != k {
        return Err(Error::domain("cluster_sizes must have length k >= 1"));
    }
    if b == 0 {
        return Err(Error::domain("bits per weight must be positive"));
    }
    let total: usize = cluster_sizes.iter().sum();
    if total != m || m == 0 {
        return Err(Error::domain("cluster sizes must sum to m >= 1"));
    }
    let mut denom: u128 = (k as u128) * (b as u128);
    for &mj in cluster_sizes {
        if mj > 0 {
            denom += (mj as u128) * ceil_log2_ratio(m as u128, mj as u128) as u128;
        }
    }
    Ok((m as u128 * b as u128) as f64 / denom as f64)
}

/// Unique real root of `a x^3 + b x^2 + c x + d` for a strictly increasing
/// cubic (`a > 0`, `b^2 - 3ac < 0`): safeguarded Newton from the inflection
/// point with a bracketing bisection fallback.
pub fn cubic_real_root(a: f64, b: f64, c: f64, d: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::domain("cubic leading coefficient must be positive"));
    }
    let delta0 = b * b - 3.0 * a * c;
    if !(delta0 < 0.0) {
        return Err(Error::domain(format!(
            "cubic determinant {delta0} is not negative"
        )));
    }
    let p = |x: f64| ((a * x + b) * x + c) * x + d;
    let dp = |x: f64| (3.0 * a * x + 2.0 * b) * x + c;

    // Bracket the root around the inflection point.
    let x0 = -b / (3.0 * a);
    let mut step = 1.0_f64.max(x0.abs());
    let (mut lo, mut hi);
    if p(x0) <= 0.0 {
        lo = x0;
        hi = x0 + step;
        while p(hi) < 0.0 {
            step *= 2.0;
            hi += step;
        }
    } else {
        hi = x0;
        lo = x0 - step;
        while p(lo) > 0.0 {
            step *= 2.0;
            lo -= step;
        }
    }

    let mut x = x0;
    for _ in 0..200 {
        let fx = p(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let der = dp(x);
        let mut next = x - fx / der;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * next.abs().max(1.0) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

fn distinct_count(w: &[f64]) -> usize {
    let mut sorted: Vec<f64> = w.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    sorted.len()
}

/// Importance-weighted k-means++ seeding: the first centroid is drawn with
/// probability proportional to `I_i`, later ones proportional to
/// `I_i * dist^2` to the nearest chosen centroid.
fn kmeanspp_init(w: &[f64], iq: &[f64], k: usize, rng: &mut ChaCha12Rng) -> Vec<f64> {
    let m = w.len();
    let pick = |weights: &[f64], rng: &mut ChaCha12Rng| -> usize {
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            for (i, &p) in weights.iter().enumerate() {
                acc += p;
                if acc >= target {
                    return i;
                }
            }
            m - 1
        } else {
            rng.gen_range(0..m)
        }
    };
    let mut centroids = Vec::with_capacity(k);
    centroids.push(w[pick(iq, rng)]);
    let mut d2 = vec![0.0; m];
    for _ in 1..k {
        for i in 0..m {
            let nearest = centroids
                .iter()
                .map(|&c| (w[i] - c) * (w[i] - c))
                .fold(f64::INFINITY, f64::min);
            d2[i] = iq[i] * nearest;
        }
        centroids.push(w[pick(&d2, rng)]);
    }
    centroids
}

/// Nearest-centroid assignment in `(w_i - c_j)^2`, ties to the lower j.
fn assign_nearest(w: &[f64], centroids: &[f64]) -> Vec<usize> {
    w.iter()
        .map(|&wi| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, &c) in centroids.iter().enumerate() {
                let d = (wi - c) * (wi - c);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Re-seed every empty cluster at the weight with the largest I-weighted
/// distance to its current centroid. Returns true when anything moved.
fn fix_empty_clusters(
    w: &[f64],
    iq: &[f64],
    centroids: &mut [f64],
    assign: &mut [usize],
) -> bool {
    let k = centroids.len();
    let mut changed = false;
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assign.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return changed;
        };
        let mut best = 0;
        let mut best_d = f64::NEG_INFINITY;
        for i in 0..w.len() {
            // only steal from clusters that keep at least one member
            if sizes[assign[i]] <= 1 {
                continue;
            }
            let dc = w[i] - centroids[assign[i]];
            let d = iq[i] * dc * dc;
            if d > best_d {
                best_d = d;
                best = i;
            }
        }
        centroids[empty] = w[best];
        assign[best] = empty;
        changed = true;
    }
}

fn weighted_mean_centroid(w: &[f64], iq: &[f64], members: &[usize]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for &i in members {
        num += iq[i] * w[i];
        den += iq[i];
    }
    if den > 0.0 {
        num / den
    } else {
        let sum: f64 = members.iter().map(|&i| w[i]).sum();
        sum / members.len() as f64
    }
}

fn members_by_cluster(assign: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); k];
    for (i, &a) in assign.iter().enumerate() {
        out[a].push(i);
    }
    out
}

fn kmeans_validate(w: &[f64], imp: &ImportanceDiag, k: usize) -> Result<()> {
    if imp.len() != w.len() {
        return Err(Error::shape("importance length must match weight length"));
    }
    if w.is_empty() {
        return Err(Error::domain("cannot quantize an empty weight vector"));
    }
    if k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    if k > distinct_count(w) {
        return Err(Error::domain(format!(
            "k = {k} exceeds the {} distinct weight values",
            distinct_count(w)
        )));
    }
    Ok(())
}

enum UpdateRule {
    Quadratic,
    Quartic,
}

/// Independent seedings per call; the best final objective wins. Restart
/// `r` draws its k-means++ init from substream `r` of the run seed.
const KMEANS_RESTARTS: u64 = 8;

fn run_kmeans(
    w: &[f64],
    imp: &ImportanceDiag,
    k: usize,
    iters: usize,
    seed: u64,
    rule: UpdateRule,
) -> Result<Codebook> {
    kmeans_validate(w, imp, k)?;
    let mut best: Option<(f64, Codebook)> = None;
    for restart in 0..KMEANS_RESTARTS {
        let cb = lloyd_once(w, imp, k, iters, seed, restart, &rule)?;
        let obj = run_objective(w, imp, &cb, &rule);
        if best.as_ref().map_or(true, |(b, _)| obj < *b) {
            best = Some((obj, cb));
        }
    }
    Ok(best.expect("at least one restart").1)
}

fn run_objective(w: &[f64], imp: &ImportanceDiag, cb: &Codebook, rule: &UpdateRule) -> f64 {
    let mut acc = 0.0;
    for (i, &a) in cb.assignments.iter().enumerate() {
        let d = w[i] - cb.centroids[a];
        acc += imp.quadratic()[i] * d * d;
        if let (UpdateRule::Quartic, Some(h)) = (rule, imp.quartic()) {
            acc += h[i] * d * d * d * d;
        }
    }
    acc
}

fn lloyd_once(
    w: &[f64],
    imp: &ImportanceDiag,
    k: usize,
    iters: usize,
    seed: u64,
    restart: u64,
    rule: &UpdateRule,
) -> Result<Codebook> {
    let iq = imp.quadratic();
    let hq = match rule {
        UpdateRule::Quartic => imp.quartic(),
        UpdateRule::Quadratic => None,
    };
    let mut rng = substream(seed, restart);
    let mut centroids = kmeanspp_init(w, iq, k, &mut rng);
    let mut assign = assign_nearest(w, &centroids);
    for _ in 0..iters {
        fix_empty_clusters(w, iq, &mut centroids, &mut assign);
        for (j, members) in members_by_cluster(&assign, k).iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let sum_h: f64 = hq.map_or(0.0, |h| members.iter().map(|&i| h[i]).sum());
            centroids[j] = if sum_h > 0.0 {
                let h = hq.unwrap();
                let mut a3 = 0.0;
                let mut b2 = 0.0;
                let mut c1 = 0.0;
                let mut d0 = 0.0;
                for &i in members.iter() {
                    a3 += 4.0 * h[i];
                    b2 -= 12.0 * h[i] * w[i];
                    c1 += 12.0 * h[i] * w[i] * w[i] + 2.0 * iq[i];
                    d0 -= 4.0 * h[i] * w[i] * w[i] * w[i] + 2.0 * iq[i] * w[i];
                }
                let sum_i: f64 = members.iter().map(|&i| iq[i]).sum();
                let delta0 = b2 * b2 - 3.0 * a3 * c1;
                if sum_i > 0.0 && !(delta0 < 0.0) {
                    return Err(Error::numeric(format!(
                        "cubic determinant {delta0} not negative in a cluster with positive I"
                    )));
                }
                if delta0 < 0.0 {
                    cubic_real_root(a3, b2, c1, d0)?
                } else {
                    // all members share one value and sum_i == 0
                    let sh: f64 = members.iter().map(|&i| h[i] * w[i]).sum();
                    sh / sum_h
                }
            } else {
                weighted_mean_centroid(w, iq, members)
            };
        }
        let next = assign_nearest(w, &centroids);
        let fixed = next == assign;
        assign = next;
        if fixed {
            break;
        }
    }
    Codebook::new(centroids, assign)
}

/// Lloyd iterations for the quadratic weighted objective; centroid update is
/// the importance-weighted mean of the cluster.
pub fn weighted_kmeans(
    w: &[f64],
    imp: &ImportanceDiag,
    k: usize,
    iters: usize,
    seed: u64,
) -> Result<Codebook> {
    run_kmeans(w, imp, k, iters, seed, UpdateRule::Quadratic)
}

/// Lloyd iterations for the quadratic-plus-quartic objective; each centroid
/// update solves `(sum 4H)x^3 - (sum 12Hw)x^2 + (sum 12Hw^2 + 2I)x -
/// (sum 4Hw^3 + 2Iw) = 0`. Clusters whose quartic scores sum to zero fall
/// back to the weighted mean.
pub fn quartic_weighted_kmeans(
    w: &[f64],
    imp: &ImportanceDiag,
    k: usize,
    iters: usize,
    seed: u64,
) -> Result<Codebook> {
    run_kmeans(w, imp, k, iters, seed, UpdateRule::Quartic)
}
