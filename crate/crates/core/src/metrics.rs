//! Distortion and quality metrics plus the sweep harness.
//!
//! Distortions compare a compressed network against the original over a
//! dataset; the sweep applies every requested objective at every grid point
//! (per-layer compression, one codebook or mask per layer) and tabulates the
//! metrics into a `CompressionReport`.

use rayon::prelude::*;

use crate::autodiff::loss_value;
use crate::compress::{
    apply_codebook, prune, quartic_weighted_kmeans, weighted_kmeans, Codebook,
};
use crate::importance::{compute_importance, ImportanceDiag, ImportanceKind};
use crate::net::{Dataset, FlatIndexer, Head, Network, PROB_FLOOR};
use crate::rng::derive_seed;
use crate::{Error, Result};

fn check_same_shape(net: &Network, net_hat: &Network) -> Result<()> {
    let same = net.head() == net_hat.head()
        && net.layers().len() == net_hat.layers().len()
        && net
            .layers()
            .iter()
            .zip(net_hat.layers())
            .all(|(a, b)| a.out_dim() == b.out_dim() && a.in_dim() == b.in_dim());
    if !same {
        return Err(Error::shape("networks differ in shape or head"));
    }
    Ok(())
}

/// `(1/n) sum ||f_w(x) - f_what(x)||^2` for regression heads.
pub fn distortion_mse(net: &Network, net_hat: &Network, data: &Dataset) -> Result<f64> {
    check_same_shape(net, net_hat)?;
    if net.head() != Head::Regression {
        return Err(Error::domain(
            "squared-error distortion needs regression heads",
        ));
    }
    let mut acc = 0.0;
    for s in 0..data.len() {
        let x = data.input(s);
        let a = net.forward(x)?;
        let b = net_hat.forward(x)?;
        acc += a
            .iter()
            .zip(&b)
            .map(|(&u, &v)| (u - v) * (u - v))
            .sum::<f64>();
    }
    Ok(acc / data.len() as f64)
}

/// `sum_c p_hat_c ln(p_hat_c / max(p_c, floor))`; zero entries of `p_hat`
/// contribute zero.
pub fn kl_divergence(p_hat: &[f64], p: &[f64]) -> f64 {
    p_hat
        .iter()
        .zip(p)
        .map(|(&q, &r)| {
            if q > 0.0 {
                q * (q / r.max(PROB_FLOOR)).ln()
            } else {
                0.0
            }
        })
        .sum()
}

/// `(1/n) sum_x KL(f_what(x) || f_w(x))` — compressed distribution first.
pub fn distortion_kl(net: &Network, net_hat: &Network, data: &Dataset) -> Result<f64> {
    check_same_shape(net, net_hat)?;
    if net.head() != Head::Classification {
        return Err(Error::domain("KL distortion needs classification heads"));
    }
    let mut acc = 0.0;
    for s in 0..data.len() {
        let x = data.input(s);
        let p = net.forward(x)?;
        let p_hat = net_hat.forward(x)?;
        acc += kl_divergence(&p_hat, &p);
    }
    Ok(acc / data.len() as f64)
}

/// `(1/n) sum (L_w(x, y) - L_what(x, y))^2`.
pub fn distortion_supervised(net: &Network, net_hat: &Network, data: &Dataset) -> Result<f64> {
    check_same_shape(net, net_hat)?;
    data.validate_for(net, true)?;
    let mut acc = 0.0;
    for s in 0..data.len() {
        let x = data.input(s);
        let y = data.sample_label(s).unwrap();
        let d = loss_value(net, x, y)? - loss_value(net_hat, x, y)?;
        acc += d * d;
    }
    Ok(acc / data.len() as f64)
}

/// `(1/n) sum (L_what(x, y) - L_w(x, y))`, the signed loss change of the
/// compressed model. Reported for reference; no claims attach to it.
pub fn loss_shift(net: &Network, net_hat: &Network, data: &Dataset) -> Result<f64> {
    check_same_shape(net, net_hat)?;
    data.validate_for(net, true)?;
    let mut acc = 0.0;
    for s in 0..data.len() {
        let x = data.input(s);
        let y = data.sample_label(s).unwrap();
        acc += loss_value(net_hat, x, y)? - loss_value(net, x, y)?;
    }
    Ok(acc / data.len() as f64)
}

/// Top-1 accuracy; argmax ties resolve to the lowest class index.
pub fn accuracy(net: &Network, data: &Dataset) -> Result<f64> {
    if net.head() != Head::Classification {
        return Err(Error::domain("accuracy needs a classification head"));
    }
    data.validate_for(net, true)?;
    let mut hits = 0usize;
    for s in 0..data.len() {
        let p = net.forward(data.input(s))?;
        let mut best = 0;
        for (c, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = c;
            }
        }
        if best == data.class(s).unwrap() {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Mean cross entropy at the network's temperature.
pub fn cross_entropy(net: &Network, data: &Dataset) -> Result<f64> {
    if net.head() != Head::Classification {
        return Err(Error::domain("cross entropy needs a classification head"));
    }
    data.validate_for(net, true)?;
    let mut acc = 0.0;
    for s in 0..data.len() {
        acc += loss_value(net, data.input(s), data.sample_label(s).unwrap())?;
    }
    Ok(acc / data.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompressorKind {
    Prune,
    Quant,
    QuantQuartic,
}

impl CompressorKind {
    pub fn name(self) -> &'static str {
        match self {
            CompressorKind::Prune => "prune",
            CompressorKind::Quant => "quant",
            CompressorKind::QuantQuartic => "quant-quartic",
        }
    }
}

/// Grid of compression strengths: keep ratios for pruning, cluster counts
/// for quantization.
#[derive(Debug, Clone)]
pub enum SweepGrid {
    Ratios(Vec<f64>),
    ClusterCounts(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub iters: usize,
    pub hessian_ridge: f64,
    /// When set, sweep runs every objective at every ridge value in the
    /// grid instead of the single `hessian_ridge`.
    pub ridge_grid: Option<Vec<f64>>,
    pub bits_per_weight: u32,
    /// Compress the whole flat vector with one mask/codebook instead of one
    /// per layer.
    pub global_pool: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            iters: 100,
            hessian_ridge: 0.0,
            ridge_grid: None,
            bits_per_weight: 32,
            global_pool: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LayerBreakdown {
    pub layer: usize,
    pub params: usize,
    /// Kept parameters (pruning).
    pub kept: Option<usize>,
    /// Effective cluster count (quantization).
    pub k: Option<usize>,
    /// Encoded bits for this layer (quantization).
    pub bits: Option<u128>,
}

/// What a pool was compressed with; serialized to the sidecar document.
#[derive(Debug, Clone)]
pub enum LayerArtifact {
    Mask(crate::compress::PruneMask),
    Codebook(Codebook),
}

#[derive(Debug, Clone)]
pub struct CompressOutcome {
    pub net: Network,
    pub ratio: f64,
    pub per_layer: Vec<LayerBreakdown>,
    pub artifacts: Vec<(usize, LayerArtifact)>,
}

/// One compression strength applied to one importance vector.
#[derive(Debug, Clone, Copy)]
pub enum Strength {
    KeepRatio(f64),
    Clusters(usize),
}

/// `sum_j m_j ceil(log2(m/m_j)) + k b`, the exact encoded size of one pool.
fn codebook_bits(m: usize, b: u32, cb: &Codebook) -> u128 {
    let mut bits: u128 = (cb.k() as u128) * b as u128;
    for &mj in cb.cluster_sizes() {
        if mj > 0 {
            let mut t = 0u32;
            let mut cover = mj as u128;
            while cover < m as u128 {
                cover <<= 1;
                t += 1;
            }
            bits += mj as u128 * t as u128;
        }
    }
    bits
}

/// Compress `net` per layer (or globally when `global_pool`), with one mask
/// or codebook per pool. Quantization pools clamp `k` to the number of
/// distinct weight values in the pool; the pool for layer `l` seeds its
/// k-means with `derive_seed(seed, l)`.
pub fn compress_network(
    net: &Network,
    idx: &FlatIndexer,
    imp: &ImportanceDiag,
    compressor: CompressorKind,
    strength: Strength,
    seed: u64,
    opts: &SweepOptions,
) -> Result<CompressOutcome> {
    if imp.len() != idx.len() {
        return Err(Error::shape("importance length must match indexer size"));
    }
    let w = idx.flatten(net);
    let pools: Vec<(usize, std::ops::Range<usize>)> = if opts.global_pool {
        vec![(0, 0..idx.len())]
    } else {
        (0..idx.num_layers())
            .map(|l| (l, idx.layer_range(l)))
            .collect()
    };

    let mut what = w.clone();
    let mut per_layer = Vec::with_capacity(pools.len());
    let mut artifacts = Vec::with_capacity(pools.len());
    let mut kept_total = 0usize;
    let mut bits_total: u128 = 0;
    for (l, range) in pools {
        let wl = &w[range.clone()];
        let il = imp.slice(range.clone());
        match (compressor, strength) {
            (CompressorKind::Prune, Strength::KeepRatio(r)) => {
                let (mask, compressed) = prune(wl, &il, r)?;
                what[range.clone()].copy_from_slice(&compressed);
                kept_total += mask.kept_count();
                per_layer.push(LayerBreakdown {
                    layer: l,
                    params: wl.len(),
                    kept: Some(mask.kept_count()),
                    k: None,
                    bits: None,
                });
                artifacts.push((l, LayerArtifact::Mask(mask)));
            }
            (CompressorKind::Quant | CompressorKind::QuantQuartic, Strength::Clusters(k)) => {
                if k == 0 {
                    return Err(Error::domain("k must be at least 1"));
                }
                let mut distinct: Vec<f64> = wl.to_vec();
                distinct.sort_by(f64::total_cmp);
                distinct.dedup();
                let k_eff = k.min(distinct.len());
                let layer_seed = derive_seed(seed, l as u64);
                let cb = match compressor {
                    CompressorKind::Quant => {
                        weighted_kmeans(wl, &il, k_eff, opts.iters, layer_seed)?
                    }
                    _ => quartic_weighted_kmeans(wl, &il, k_eff, opts.iters, layer_seed)?,
                };
                let compressed = apply_codebook(wl, &cb)?;
                what[range.clone()].copy_from_slice(&compressed);
                let bits = codebook_bits(wl.len(), opts.bits_per_weight, &cb);
                bits_total += bits;
                per_layer.push(LayerBreakdown {
                    layer: l,
                    params: wl.len(),
                    kept: None,
                    k: Some(k_eff),
                    bits: Some(bits),
                });
                artifacts.push((l, LayerArtifact::Codebook(cb)));
            }
            _ => {
                return Err(Error::domain(
                    "compressor kind does not match the strength parameter",
                ))
            }
        }
    }

    let m = idx.len();
    let ratio = match compressor {
        CompressorKind::Prune => kept_total as f64 / m as f64,
        _ => (m as u128 * opts.bits_per_weight as u128) as f64 / bits_total as f64,
    };
    Ok(CompressOutcome {
        net: idx.with_weights(net, &what)?,
        ratio,
        per_layer,
        artifacts,
    })
}

#[derive(Debug, Clone)]
pub struct ReportRow {
    pub method: ImportanceKind,
    pub compressor: CompressorKind,
    /// Grid parameter: keep ratio r or cluster count k.
    pub param: f64,
    pub ratio: f64,
    pub hessian_ridge: f64,
    pub mse: Option<f64>,
    pub kl: Option<f64>,
    pub supervised_sq: Option<f64>,
    pub accuracy: Option<f64>,
    pub cross_entropy: Option<f64>,
    pub loss_shift: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CompressionReport {
    pub rows: Vec<ReportRow>,
    pub per_layer: Vec<(usize, Vec<LayerBreakdown>)>,
}

pub const REPORT_CSV_COLUMNS: &str =
    "method,compressor,param,ratio,mse,kl,supervised_sq,accuracy,cross_entropy,loss_shift,hessian_ridge";

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.16e}"))
}

impl ReportRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.16e},{:.16e},{},{},{},{},{},{},{:.16e}",
            self.method.name(),
            self.compressor.name(),
            self.param,
            self.ratio,
            fmt_opt(self.mse),
            fmt_opt(self.kl),
            fmt_opt(self.supervised_sq),
            fmt_opt(self.accuracy),
            fmt_opt(self.cross_entropy),
            fmt_opt(self.loss_shift),
            self.hessian_ridge,
        )
    }
}

pub const PLOT_CSV_COLUMNS: &str = "x,y,series";

impl CompressionReport {
    /// `(x, y, series)` triples, one per populated metric per row.
    pub fn plot_csv_rows(&self) -> Vec<String> {
        let mut out = Vec::new();
        for row in &self.rows {
            for (name, value) in [
                ("mse", row.mse),
                ("kl", row.kl),
                ("supervised_sq", row.supervised_sq),
                ("accuracy", row.accuracy),
                ("cross_entropy", row.cross_entropy),
                ("loss_shift", row.loss_shift),
            ] {
                if let Some(v) = value {
                    out.push(format!(
                        "{:.16e},{v:.16e},{}-{}-{name}",
                        row.ratio,
                        row.method.name(),
                        row.compressor.name()
                    ));
                }
            }
        }
        out
    }
}

/// Evaluate all metrics applicable to the head/labels of the pair.
pub fn metric_row(
    net: &Network,
    net_hat: &Network,
    data: &Dataset,
    method: ImportanceKind,
    compressor: CompressorKind,
    param: f64,
    ratio: f64,
    hessian_ridge: f64,
) -> Result<ReportRow> {
    let has_labels = data.labels().is_some();
    let (mse, kl, acc, ce) = match net.head() {
        Head::Regression => (Some(distortion_mse(net, net_hat, data)?), None, None, None),
        Head::Classification => (
            None,
            Some(distortion_kl(net, net_hat, data)?),
            if has_labels {
                Some(accuracy(net_hat, data)?)
            } else {
                None
            },
            if has_labels {
                Some(cross_entropy(net_hat, data)?)
            } else {
                None
            },
        ),
    };
    let (sup, shift) = if has_labels {
        (
            Some(distortion_supervised(net, net_hat, data)?),
            Some(loss_shift(net, net_hat, data)?),
        )
    } else {
        (None, None)
    };
    Ok(ReportRow {
        method,
        compressor,
        param,
        ratio,
        hessian_ridge,
        mse,
        kl,
        supervised_sq: sup,
        accuracy: acc,
        cross_entropy: ce,
        loss_shift: shift,
    })
}

/// Full sweep: for every objective kind and grid point, compute importance,
/// compress per layer, and evaluate every applicable metric. Point `p`
/// (objective-major order) seeds its compressor with
/// `derive_seed(seed, 1000 + p)`; results are independent of thread count.
pub fn sweep(
    net: &Network,
    idx: &FlatIndexer,
    data: &Dataset,
    objectives: &[ImportanceKind],
    compressor: CompressorKind,
    grid: &SweepGrid,
    seed: u64,
    opts: &SweepOptions,
) -> Result<CompressionReport> {
    if objectives.is_empty() {
        return Err(Error::domain("sweep needs at least one objective"));
    }
    let strengths: Vec<(f64, Strength)> = match (grid, compressor) {
        (SweepGrid::Ratios(rs), CompressorKind::Prune) => {
            if rs.is_empty() {
                return Err(Error::domain("sweep grid is empty"));
            }
            rs.iter().map(|&r| (r, Strength::KeepRatio(r))).collect()
        }
        (SweepGrid::ClusterCounts(ks), CompressorKind::Quant | CompressorKind::QuantQuartic) => {
            if ks.is_empty() {
                return Err(Error::domain("sweep grid is empty"));
            }
            ks.iter()
                .map(|&k| (k as f64, Strength::Clusters(k)))
                .collect()
        }
        _ => {
            return Err(Error::domain(
                "grid kind does not match the compressor kind",
            ))
        }
    };

    let ridges: Vec<f64> = opts
        .ridge_grid
        .clone()
        .unwrap_or_else(|| vec![opts.hessian_ridge]);
    if ridges.is_empty() {
        return Err(Error::domain("ridge grid is empty"));
    }

    let imps: Vec<ImportanceDiag> = objectives
        .iter()
        .flat_map(|&kind| ridges.iter().map(move |&r| (kind, r)))
        .map(|(kind, r)| compute_importance(kind, net, idx, data, r))
        .collect::<Result<_>>()?;

    let n_strengths = strengths.len();
    let points: Vec<(usize, usize, usize)> = (0..objectives.len())
        .flat_map(|o| {
            (0..ridges.len()).flat_map(move |r| (0..n_strengths).map(move |g| (o, r, g)))
        })
        .collect();
    let results: Vec<Result<(ReportRow, Vec<LayerBreakdown>)>> = points
        .par_iter()
        .enumerate()
        .map(|(p, &(o, r, g))| {
            let (param, strength) = strengths[g];
            let point_seed = derive_seed(seed, 1000 + p as u64);
            let imp = &imps[o * ridges.len() + r];
            let outcome = compress_network(net, idx, imp, compressor, strength, point_seed, opts)?;
            let row = metric_row(
                net,
                &outcome.net,
                data,
                objectives[o],
                compressor,
                param,
                outcome.ratio,
                ridges[r],
            )?;
            Ok((row, outcome.per_layer))
        })
        .collect();

    let mut rows = Vec::with_capacity(results.len());
    let mut per_layer = Vec::with_capacity(results.len());
    for (p, r) in results.into_iter().enumerate() {
        let (row, layers) = r?;
        rows.push(row);
        per_layer.push((p, layers));
    }
    Ok(CompressionReport { rows, per_layer })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, DenseLayer, Labels};

    fn reg_net(w: &[f64], b: f64) -> Network {
        let layer = DenseLayer::new(vec![w.to_vec()], vec![b], Activation::Identity).unwrap();
        Network::new(vec![layer], Head::Regression, 1.0).unwrap()
    }

    fn cls_net(rows: Vec<Vec<f64>>, bias: Vec<f64>, t: f64) -> Network {
        let layer = DenseLayer::new(rows, bias, Activation::Identity).unwrap();
        Network::new(vec![layer], Head::Classification, t).unwrap()
    }

    fn data_1d(xs: &[f64], labels: Option<Labels>) -> Dataset {
        Dataset::new(xs.to_vec(), xs.len(), 1, labels).unwrap()
    }

    #[test]
    fn identical_networks_have_zero_distortions() {
        let net = reg_net(&[1.5, -2.0], 0.3);
        let data = Dataset::new(vec![1.0, 2.0, -0.5, 0.1], 2, 2, None).unwrap();
        assert_eq!(distortion_mse(&net, &net.clone(), &data).unwrap(), 0.0);
        let cnet = cls_net(vec![vec![1.0], vec![-1.0]], vec![0.0, 0.0], 1.0);
        let cdata = data_1d(&[0.5, -0.25], None);
        assert_eq!(distortion_kl(&cnet, &cnet.clone(), &cdata).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_networks_have_unit_mse() {
        let f0 = reg_net(&[0.0], 0.0);
        let f1 = reg_net(&[0.0], 1.0);
        let data = data_1d(&[0.3, -0.7, 2.0], None);
        assert_eq!(distortion_mse(&f0, &f1, &data).unwrap(), 1.0);
    }

    #[test]
    fn linear_mse_equals_quadratic_form_in_empirical_second_moments() {
        let w = [1.2, -0.7, 0.4];
        let what = [1.0, 0.0, 0.4];
        let net = reg_net(&w, 0.0);
        let nhat = reg_net(&what, 0.0);
        let rows = [
            [0.5, 1.0, -2.0],
            [1.5, -0.3, 0.2],
            [-0.7, 0.9, 1.1],
            [2.0, 0.0, -0.4],
        ];
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data = Dataset::new(flat, 4, 3, None).unwrap();
        let mse = distortion_mse(&net, &nhat, &data).unwrap();
        let d: Vec<f64> = w.iter().zip(&what).map(|(a, b)| a - b).collect();
        let mut qf = 0.0;
        for r in &rows {
            let dot: f64 = d.iter().zip(r).map(|(a, b)| a * b).sum();
            qf += dot * dot;
        }
        qf /= rows.len() as f64;
        assert!((mse - qf).abs() <= 1e-12, "{mse} vs {qf}");
    }

    #[test]
    fn kl_hand_case() {
        let v = kl_divergence(&[0.5, 0.5], &[0.25, 0.75]);
        let expect = 0.5 * 2.0_f64.ln() + 0.5 * (2.0_f64 / 3.0).ln();
        assert!((v - expect).abs() < 1e-15);
        assert!((expect - 0.14384).abs() < 1e-5);
    }

    #[test]
    fn supervised_distortion_of_constant_shift() {
        let net = reg_net(&[0.0], 0.0);
        let nhat = reg_net(&[0.0], 1.0);
        // L = (f - y)^2: with y = 0 the losses are 0 and 1, difference 1
        let data = data_1d(
            &[0.4, -0.2],
            Some(Labels::Targets {
                values: vec![0.0, 0.0],
                dim: 1,
            }),
        );
        assert_eq!(distortion_supervised(&net, &nhat, &data).unwrap(), 1.0);
        assert_eq!(loss_shift(&net, &nhat, &data).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_and_cross_entropy_basics() {
        let net = cls_net(vec![vec![50.0], vec![-50.0]], vec![0.0, 0.0], 1.0);
        let data = data_1d(&[1.0, -1.0], Some(Labels::Classes(vec![0, 1])));
        assert_eq!(accuracy(&net, &data).unwrap(), 1.0);
        let net = cls_net(vec![vec![0.0], vec![0.0]], vec![0.0, 0.0], 1.0);
        let ce = cross_entropy(&net, &data).unwrap();
        assert!((ce - 2.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_sample_cross_entropy_hand_case() {
        let net = cls_net(vec![vec![1.0], vec![0.0]], vec![0.0, 0.0], 1.0);
        let data = data_1d(&[1.0, -2.0], Some(Labels::Classes(vec![0, 1])));
        let p0 = 1.0 / (1.0 + (-1.0_f64).exp());
        let p1 = 1.0 / (1.0 + (-2.0_f64).exp());
        let expect = (-(p0.ln()) - p1.ln()) / 2.0;
        assert!((cross_entropy(&net, &data).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn sweep_at_ratio_one_reproduces_uncompressed_metrics() {
        let net = cls_net(vec![vec![1.2], vec![-0.4]], vec![0.1, 0.0], 2.0);
        let idx = FlatIndexer::new(&net, true);
        let data = data_1d(&[0.6, -1.0, 0.2], Some(Labels::Classes(vec![0, 1, 0])));
        let report = sweep(
            &net,
            &idx,
            &data,
            &[ImportanceKind::Baseline, ImportanceKind::UnsupClassification],
            CompressorKind::Prune,
            &SweepGrid::Ratios(vec![0.5, 1.0]),
            7,
            &SweepOptions::default(),
        )
        .unwrap();
        assert_eq!(report.rows.len(), 4);
        for row in report.rows.iter().filter(|r| r.param == 1.0) {
            assert_eq!(row.kl, Some(0.0));
            assert_eq!(row.accuracy, Some(accuracy(&net, &data).unwrap()));
            assert_eq!(row.cross_entropy, Some(cross_entropy(&net, &data).unwrap()));
        }
    }

    #[test]
    fn sweep_is_deterministic_for_a_fixed_seed() {
        let net = cls_net(vec![vec![1.2, -0.3], vec![-0.4, 0.9]], vec![0.1, 0.0], 1.0);
        let idx = FlatIndexer::new(&net, true);
        let data = Dataset::new(
            vec![0.6, 1.0, -1.0, 0.4, 0.2, -0.2, 1.4, 0.3],
            4,
            2,
            Some(Labels::Classes(vec![0, 1, 0, 1])),
        )
        .unwrap();
        let run = || {
            sweep(
                &net,
                &idx,
                &data,
                &[ImportanceKind::Baseline],
                CompressorKind::Quant,
                &SweepGrid::ClusterCounts(vec![1, 2, 3]),
                42,
                &SweepOptions::default(),
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.csv_row(), rb.csv_row());
        }
    }

    #[test]
    fn quant_with_one_cluster_gives_constant_layers() {
        let net = reg_net(&[1.0, 2.0, 3.0], 0.5);
        let idx = FlatIndexer::new(&net, false);
        let imp = ImportanceDiag::baseline(idx.len());
        let out = compress_network(
            &net,
            &idx,
            &imp,
            CompressorKind::Quant,
            Strength::Clusters(1),
            0,
            &SweepOptions::default(),
        )
        .unwrap();
        let w = idx.flatten(&out.net);
        assert_eq!(w[0], w[1]);
        assert_eq!(w[1], w[2]);
        // k = 1 over m = 3 weights: ratio = m
        assert_eq!(out.ratio, 3.0);
    }
}
