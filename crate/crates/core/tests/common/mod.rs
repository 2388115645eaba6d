//! Shared oracles for the integration tests: finite differences, Monte
//! Carlo estimators, random instance generation, and exhaustive searches.
//! Everything here is independent of the library code paths it checks —
//! oracles re-derive their answers from definitions.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use rdmc_core::net::{
    Activation, Dataset, DenseLayer, FlatIndexer, Head, Labels, Network, SampleLabel,
};
use rdmc_core::rng::substream;

pub fn randn(rng: &mut ChaCha12Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Random dense net with ReLU hidden layers and an identity last layer.
pub fn random_net(rng: &mut ChaCha12Rng, dims: &[usize], head: Head) -> Network {
    assert!(dims.len() >= 2);
    let mut layers = Vec::new();
    for l in 0..dims.len() - 1 {
        let (ind, outd) = (dims[l], dims[l + 1]);
        let scale = 1.0 / (ind as f64).sqrt();
        let weights: Vec<Vec<f64>> = (0..outd)
            .map(|_| (0..ind).map(|_| scale * randn(rng)).collect())
            .collect();
        let bias: Vec<f64> = (0..outd).map(|_| 0.1 * randn(rng)).collect();
        let act = if l + 2 == dims.len() {
            Activation::Identity
        } else {
            Activation::Relu
        };
        layers.push(DenseLayer::new(weights, bias, act).unwrap());
    }
    Network::new(layers, head, 1.0).unwrap()
}

pub fn random_input(rng: &mut ChaCha12Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| randn(rng)).collect()
}

pub fn random_labeled_dataset(rng: &mut ChaCha12Rng, net: &Network, n: usize) -> Dataset {
    let d = net.input_dim();
    let inputs: Vec<f64> = (0..n * d).map(|_| randn(rng)).collect();
    let labels = match net.head() {
        Head::Classification => {
            Labels::Classes((0..n).map(|_| rng.gen_range(0..net.output_dim())).collect())
        }
        Head::Regression => Labels::Targets {
            values: (0..n * net.output_dim()).map(|_| randn(rng)).collect(),
            dim: net.output_dim(),
        },
    };
    Dataset::new(inputs, n, d, Some(labels)).unwrap()
}

/// Labeled dataset whose samples all keep ReLU pre-activations clear of the
/// finite-difference step (rejection sampling on the margin).
pub fn well_conditioned_dataset(
    rng: &mut ChaCha12Rng,
    net: &Network,
    n: usize,
    margin: f64,
) -> Dataset {
    let d = net.input_dim();
    let mut inputs = Vec::with_capacity(n * d);
    for _ in 0..n {
        loop {
            let x = random_input(rng, d);
            if relu_margin(net, &x) > margin {
                inputs.extend_from_slice(&x);
                break;
            }
        }
    }
    let labels = match net.head() {
        Head::Classification => {
            Labels::Classes((0..n).map(|_| rng.gen_range(0..net.output_dim())).collect())
        }
        Head::Regression => Labels::Targets {
            values: (0..n * net.output_dim()).map(|_| randn(rng)).collect(),
            dim: net.output_dim(),
        },
    };
    Dataset::new(inputs, n, d, Some(labels)).unwrap()
}

/// Smallest |pre-activation| over all ReLU units of the net on `x`; finite
/// differences need this to stay well above the step so no kink is crossed.
pub fn relu_margin(net: &Network, x: &[f64]) -> f64 {
    let mut margin = f64::INFINITY;
    let mut a = x.to_vec();
    for layer in net.layers() {
        let mut z = Vec::with_capacity(layer.out_dim());
        for r in 0..layer.out_dim() {
            let mut acc = layer.bias()[r];
            for c in 0..layer.in_dim() {
                acc += layer.weight(r, c) * a[c];
            }
            z.push(acc);
        }
        if layer.activation() == Activation::Relu {
            for &v in &z {
                margin = margin.min(v.abs());
            }
        }
        a = z.iter().map(|&v| layer.activation().apply(v)).collect();
    }
    margin
}

/// Draw (net, x) pairs until every ReLU pre-activation clears `margin`.
pub fn well_conditioned_net_input(
    seed: u64,
    stream: u64,
    dims: &[usize],
    head: Head,
    margin: f64,
) -> (Network, Vec<f64>, ChaCha12Rng) {
    let mut rng = substream(seed, stream);
    loop {
        let net = random_net(&mut rng, dims, head);
        let x = random_input(&mut rng, dims[0]);
        if relu_margin(&net, &x) > margin {
            return (net, x, rng);
        }
    }
}

fn perturbed(net: &Network, idx: &FlatIndexer, g: usize, delta: f64) -> Network {
    let mut w = idx.flatten(net);
    w[g] += delta;
    idx.with_weights(net, &w).unwrap()
}

/// Central finite differences of every output w.r.t. every parameter,
/// row-major `(output_dim, m)`.
pub fn fd_jacobian(net: &Network, idx: &FlatIndexer, x: &[f64], h: f64) -> Vec<f64> {
    let c_dim = net.output_dim();
    let m = idx.len();
    let mut jac = vec![0.0; c_dim * m];
    for g in 0..m {
        let plus = perturbed(net, idx, g, h).forward(x).unwrap();
        let minus = perturbed(net, idx, g, -h).forward(x).unwrap();
        for c in 0..c_dim {
            jac[c * m + g] = (plus[c] - minus[c]) / (2.0 * h);
        }
    }
    jac
}

fn sample_loss(net: &Network, x: &[f64], y: SampleLabel<'_>) -> f64 {
    // re-derived from the definitions, not via autodiff::loss_value
    let out = net.forward(x).unwrap();
    match y {
        SampleLabel::Target(t) => out
            .iter()
            .zip(t)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum(),
        SampleLabel::Class(c) => -out[c].max(1e-12).ln(),
    }
}

pub fn fd_grad(net: &Network, idx: &FlatIndexer, x: &[f64], y: SampleLabel<'_>, h: f64) -> Vec<f64> {
    (0..idx.len())
        .map(|g| {
            let lp = sample_loss(&perturbed(net, idx, g, h), x, y);
            let lm = sample_loss(&perturbed(net, idx, g, -h), x, y);
            (lp - lm) / (2.0 * h)
        })
        .collect()
}

pub fn fd_hessian_diag(
    net: &Network,
    idx: &FlatIndexer,
    x: &[f64],
    y: SampleLabel<'_>,
    h: f64,
) -> Vec<f64> {
    let l0 = sample_loss(net, x, y);
    (0..idx.len())
        .map(|g| {
            let lp = sample_loss(&perturbed(net, idx, g, h), x, y);
            let lm = sample_loss(&perturbed(net, idx, g, -h), x, y);
            (lp - 2.0 * l0 + lm) / (h * h)
        })
        .collect()
}

/// `max_i |a_i - b_i| / max(1, |a_i|, |b_i|)`.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

/// Monte Carlo `E[(relu(w.x) - relu(what.x))^2]` with standard error,
/// `x ~ N(0, diag(lambda))`.
pub fn mc_relu_mse(
    w: &[f64],
    what: &[f64],
    lambda: &[f64],
    samples: usize,
    seed: u64,
    stream: u64,
) -> (f64, f64) {
    let mut rng = substream(seed, stream);
    let m = w.len();
    let scales: Vec<f64> = lambda.iter().map(|l| l.sqrt()).collect();
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..samples {
        let mut a = 0.0;
        let mut b = 0.0;
        for i in 0..m {
            let x = scales[i] * randn(&mut rng);
            a += w[i] * x;
            b += what[i] * x;
        }
        let d = a.max(0.0) - b.max(0.0);
        let v = d * d;
        sum += v;
        sum2 += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum2 - sum * sum / n) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Exhaustive minimum of `sum lambda_i (w_i - c_{A_i})^2` over all `k^m`
/// assignments with per-cluster weighted-mean centroids.
pub fn brute_force_weighted_kmeans(w: &[f64], iq: &[f64], k: usize) -> f64 {
    let m = w.len();
    let total = k.pow(m as u32);
    let mut best = f64::INFINITY;
    for idx in 0..total {
        let mut assign = Vec::with_capacity(m);
        let mut v = idx;
        for _ in 0..m {
            assign.push(v % k);
            v /= k;
        }
        let mut num = vec![0.0; k];
        let mut den = vec![0.0; k];
        for (i, &a) in assign.iter().enumerate() {
            num[a] += iq[i] * w[i];
            den[a] += iq[i];
        }
        let cents: Vec<f64> = (0..k)
            .map(|j| if den[j] > 0.0 { num[j] / den[j] } else { 0.0 })
            .collect();
        let obj: f64 = assign
            .iter()
            .enumerate()
            .map(|(i, &a)| iq[i] * (w[i] - cents[a]) * (w[i] - cents[a]))
            .sum();
        best = best.min(obj);
    }
    best
}
