//! Bundled desk-scale experiment instance.
//!
//! A 20-64-48-2 ReLU classifier (~4.6k parameters) built constructively, no
//! training involved: a planted signal path carries `u^T x` through both
//! hidden layers into the logits, surrounded by random weights that have
//! noticeable magnitude but little effect on the output. The matching
//! dataset is a two-class Gaussian mixture with means `+-2u`, which the
//! planted path classifies with high accuracy.
//!
//! The construction separates magnitude from importance on purpose: many
//! noise weights are larger than the signal weights (`|u_i| ~ 1/sqrt(20)`),
//! so magnitude pruning destroys the signal path long before
//! importance-weighted pruning does.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::net::{Activation, Dataset, DenseLayer, Head, Labels, Network};
use crate::rng::substream;
use crate::Result;

pub const SYNTH_INPUT_DIM: usize = 20;
pub const SYNTH_HIDDEN1: usize = 64;
pub const SYNTH_HIDDEN2: usize = 48;
pub const SYNTH_CLASSES: usize = 2;

const SIGNAL_GAIN: f64 = 2.0;
const MIXTURE_SHIFT: f64 = 2.0;

fn normal(rng: &mut ChaCha12Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Unit direction shared by the network and the mixture; first draw of
/// stream 0.
fn direction(seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, 0);
    let mut u: Vec<f64> = (0..SYNTH_INPUT_DIM).map(|_| normal(&mut rng)).collect();
    let norm: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    u.iter_mut().for_each(|v| *v /= norm);
    u
}

/// The bundled classifier for `seed`. Weights draw from stream 0 after the
/// direction vector.
pub fn two_class_mlp(seed: u64) -> Network {
    let u = direction(seed);
    let mut rng = substream(seed, 0);
    for _ in 0..SYNTH_INPUT_DIM {
        normal(&mut rng); // skip the direction draws
    }

    // layer 1: rows 0/1 carry +-u, the rest are random
    let mut w1 = vec![0.0; SYNTH_HIDDEN1 * SYNTH_INPUT_DIM];
    for r in 0..SYNTH_HIDDEN1 {
        for c in 0..SYNTH_INPUT_DIM {
            w1[r * SYNTH_INPUT_DIM + c] = 0.45 * normal(&mut rng);
        }
    }
    for c in 0..SYNTH_INPUT_DIM {
        w1[c] = u[c];
        w1[SYNTH_INPUT_DIM + c] = -u[c];
    }
    let mut b1: Vec<f64> = (0..SYNTH_HIDDEN1).map(|_| 0.05 * normal(&mut rng)).collect();
    b1[0] = 0.0;
    b1[1] = 0.0;

    // layer 2: rows 0/1 recover the signed signal relu(u^T x) - relu(-u^T x)
    let mut w2 = vec![0.0; SYNTH_HIDDEN2 * SYNTH_HIDDEN1];
    for r in 0..SYNTH_HIDDEN2 {
        for c in 0..SYNTH_HIDDEN1 {
            w2[r * SYNTH_HIDDEN1 + c] = 0.25 * normal(&mut rng);
        }
    }
    for c in 0..SYNTH_HIDDEN1 {
        w2[c] = 0.0;
        w2[SYNTH_HIDDEN1 + c] = 0.0;
    }
    w2[0] = 1.0;
    w2[1] = -1.0;
    w2[SYNTH_HIDDEN1] = -1.0;
    w2[SYNTH_HIDDEN1 + 1] = 1.0;
    let mut b2: Vec<f64> = (0..SYNTH_HIDDEN2).map(|_| 0.05 * normal(&mut rng)).collect();
    b2[0] = 0.0;
    b2[1] = 0.0;

    // logits: class 1 reads +gain * signal, class 0 the negative
    let mut w3 = vec![0.0; SYNTH_CLASSES * SYNTH_HIDDEN2];
    for v in w3.iter_mut() {
        *v = 0.05 * normal(&mut rng);
    }
    w3[0] -= SIGNAL_GAIN;
    w3[1] += SIGNAL_GAIN;
    w3[SYNTH_HIDDEN2] += SIGNAL_GAIN;
    w3[SYNTH_HIDDEN2 + 1] -= SIGNAL_GAIN;
    let b3 = vec![0.0; SYNTH_CLASSES];

    let l1 = DenseLayer::from_flat(SYNTH_HIDDEN1, SYNTH_INPUT_DIM, w1, b1, Activation::Relu)
        .expect("valid layer");
    let l2 = DenseLayer::from_flat(SYNTH_HIDDEN2, SYNTH_HIDDEN1, w2, b2, Activation::Relu)
        .expect("valid layer");
    let l3 = DenseLayer::from_flat(SYNTH_CLASSES, SYNTH_HIDDEN2, w3, b3, Activation::Identity)
        .expect("valid layer");
    Network::new(vec![l1, l2, l3], Head::Classification, 1.0).expect("valid network")
}

/// The matching two-class Gaussian mixture (`x = N(0, I) +- 2u`),
/// `n` samples drawn from stream 1.
pub fn gaussian_mixture(seed: u64, n: usize) -> Result<Dataset> {
    let u = direction(seed);
    let mut rng = substream(seed, 1);
    let mut inputs = Vec::with_capacity(n * SYNTH_INPUT_DIM);
    let mut classes = Vec::with_capacity(n);
    for _ in 0..n {
        let y = rng.gen::<bool>() as usize;
        let sign = if y == 1 { 1.0 } else { -1.0 };
        for &ui in u.iter() {
            inputs.push(normal(&mut rng) + MIXTURE_SHIFT * sign * ui);
        }
        classes.push(y);
    }
    Dataset::new(inputs, n, SYNTH_INPUT_DIM, Some(Labels::Classes(classes)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{accuracy, cross_entropy};
    use crate::net::FlatIndexer;

    #[test]
    fn bundled_net_has_expected_size_and_quality() {
        let net = two_class_mlp(0);
        let idx = FlatIndexer::new(&net, true);
        assert_eq!(idx.len(), 20 * 64 + 64 + 64 * 48 + 48 + 48 * 2 + 2);
        let data = gaussian_mixture(0, 300).unwrap();
        let acc = accuracy(&net, &data).unwrap();
        let ce = cross_entropy(&net, &data).unwrap();
        assert!(acc > 0.9, "accuracy {acc}");
        assert!(ce < 0.3, "cross entropy {ce}");
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = two_class_mlp(3);
        let b = two_class_mlp(3);
        let idx = FlatIndexer::new(&a, true);
        assert_eq!(idx.flatten(&a), idx.flatten(&b));
        let da = gaussian_mixture(3, 10).unwrap();
        let db = gaussian_mixture(3, 10).unwrap();
        assert_eq!(da.input(7), db.input(7));
        let c = two_class_mlp(4);
        assert_ne!(idx.flatten(&a), idx.flatten(&c));
    }
}
