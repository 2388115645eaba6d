//! Exact derivatives with respect to every network parameter.
//!
//! Reverse mode gives output Jacobians and loss gradients. The diagonal of
//! the loss Hessian is computed by propagating the full Hessian with respect
//! to layer pre-activations backwards, which is exact for piecewise-linear
//! activations (the ReLU second derivative vanishes almost everywhere):
//!
//! - `G_z = diag(act') * G_a * diag(act')`
//! - `d^2 L / d W[r,c]^2 = input[c]^2 * G_z[r,r]`
//! - `G_a_prev = W^T * G_z * W`
//!
//! The per-sample loss is squared error `||f(x) - y||^2` (no 1/2 factor) for
//! regression and temperature-scaled cross entropy `-log f_y` for
//! classification.

use crate::net::{
    softmax_with_temperature, Activation, FlatIndexer, Head, Network, SampleLabel, PROB_FLOOR,
};
use crate::{Error, Result};

/// Per-layer forward records: `inputs[l]` feeds layer `l`, `pre[l]` is its
/// pre-activation.
struct Trace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Trace {
    fn head_input(&self, net: &Network) -> Vec<f64> {
        let last = net.layers().len() - 1;
        let act = net.layers()[last].activation();
        self.pre[last].iter().map(|&z| act.apply(z)).collect()
    }
}

fn run_trace(net: &Network, x: &[f64]) -> Result<Trace> {
    if x.len() != net.input_dim() {
        return Err(Error::shape(format!(
            "input has dimension {}, network expects {}",
            x.len(),
            net.input_dim()
        )));
    }
    let mut inputs = Vec::with_capacity(net.layers().len());
    let mut pre = Vec::with_capacity(net.layers().len());
    let mut a = x.to_vec();
    for layer in net.layers() {
        let mut z = Vec::new();
        layer.affine_into(&a, &mut z);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("forward pass produced non-finite values"));
        }
        inputs.push(std::mem::take(&mut a));
        a = z.iter().map(|&v| layer.activation().apply(v)).collect();
        pre.push(z);
    }
    Ok(Trace { inputs, pre })
}

/// Reverse sweep from a gradient with respect to the head input `a^L`.
/// Writes parameter gradients into `out` using the indexer layout.
fn backprop(net: &Network, idx: &FlatIndexer, trace: &Trace, d_head: &[f64], out: &mut [f64]) {
    let mut d_a = d_head.to_vec();
    for (l, layer) in net.layers().iter().enumerate().rev() {
        let z = &trace.pre[l];
        let input = &trace.inputs[l];
        let d_z: Vec<f64> = z
            .iter()
            .zip(&d_a)
            .map(|(&zv, &dv)| layer.activation().derivative(zv) * dv)
            .collect();
        let range = idx.layer_range(l);
        let chunk = &mut out[range];
        let (in_dim, out_dim) = (layer.in_dim(), layer.out_dim());
        for r in 0..out_dim {
            let row = &mut chunk[r * in_dim..(r + 1) * in_dim];
            for (c, slot) in row.iter_mut().enumerate() {
                *slot = d_z[r] * input[c];
            }
        }
        if idx.include_bias() {
            chunk[out_dim * in_dim..].copy_from_slice(&d_z);
        }
        if l > 0 {
            let mut prev = vec![0.0; in_dim];
            for r in 0..out_dim {
                let w_row = &layer.weights()[r * in_dim..(r + 1) * in_dim];
                for (c, pv) in prev.iter_mut().enumerate() {
                    *pv += w_row[c] * d_z[r];
                }
            }
            d_a = prev;
        }
    }
}

/// Jacobian of every network output with respect to every parameter,
/// row-major `(output_dim, m)`. Classification rows differentiate the
/// temperature-scaled softmax probabilities.
pub fn jacobian_outputs(net: &Network, idx: &FlatIndexer, x: &[f64]) -> Result<Vec<f64>> {
    let trace = run_trace(net, x)?;
    let head_in = trace.head_input(net);
    let c_dim = net.output_dim();
    let m = idx.len();
    let mut jac = vec![0.0; c_dim * m];
    match net.head() {
        Head::Regression => {
            let mut seed = vec![0.0; c_dim];
            for c in 0..c_dim {
                seed.fill(0.0);
                seed[c] = 1.0;
                backprop(net, idx, &trace, &seed, &mut jac[c * m..(c + 1) * m]);
            }
        }
        Head::Classification => {
            let f = softmax_with_temperature(&head_in, net.temperature());
            let t = net.temperature();
            let mut seed = vec![0.0; c_dim];
            for c in 0..c_dim {
                for (j, s) in seed.iter_mut().enumerate() {
                    let delta = if j == c { 1.0 } else { 0.0 };
                    *s = f[c] * (delta - f[j]) / t;
                }
                backprop(net, idx, &trace, &seed, &mut jac[c * m..(c + 1) * m]);
            }
        }
    }
    if jac.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("jacobian contains non-finite entries"));
    }
    Ok(jac)
}

fn head_loss_grad(net: &Network, head_in: &[f64], y: SampleLabel<'_>) -> Result<Vec<f64>> {
    match (net.head(), y) {
        (Head::Regression, SampleLabel::Target(t)) => {
            if t.len() != head_in.len() {
                return Err(Error::shape("target dimension mismatch"));
            }
            Ok(head_in.iter().zip(t).map(|(&a, &yv)| 2.0 * (a - yv)).collect())
        }
        (Head::Classification, SampleLabel::Class(y)) => {
            if y >= head_in.len() {
                return Err(Error::domain("class label out of range"));
            }
            let f = softmax_with_temperature(head_in, net.temperature());
            let t = net.temperature();
            Ok(f.iter()
                .enumerate()
                .map(|(j, &fj)| (fj - if j == y { 1.0 } else { 0.0 }) / t)
                .collect())
        }
        _ => Err(Error::domain("label kind does not match the network head")),
    }
}

/// Per-sample loss value.
pub fn loss_value(net: &Network, x: &[f64], y: SampleLabel<'_>) -> Result<f64> {
    let out = net.forward(x)?;
    match (net.head(), y) {
        (Head::Regression, SampleLabel::Target(t)) => {
            if t.len() != out.len() {
                return Err(Error::shape("target dimension mismatch"));
            }
            Ok(out.iter().zip(t).map(|(&a, &yv)| (a - yv) * (a - yv)).sum())
        }
        (Head::Classification, SampleLabel::Class(c)) => {
            if c >= out.len() {
                return Err(Error::domain("class label out of range"));
            }
            Ok(-out[c].max(PROB_FLOOR).ln())
        }
        _ => Err(Error::domain("label kind does not match the network head")),
    }
}

/// Gradient of the per-sample loss with respect to every parameter.
pub fn grad_loss(net: &Network, idx: &FlatIndexer, x: &[f64], y: SampleLabel<'_>) -> Result<Vec<f64>> {
    let trace = run_trace(net, x)?;
    let head_in = trace.head_input(net);
    let seed = head_loss_grad(net, &head_in, y)?;
    let mut grad = vec![0.0; idx.len()];
    backprop(net, idx, &trace, &seed, &mut grad);
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("gradient contains non-finite entries"));
    }
    Ok(grad)
}

/// Exact diagonal of the per-sample loss Hessian.
pub fn hessian_diag_loss(
    net: &Network,
    idx: &FlatIndexer,
    x: &[f64],
    y: SampleLabel<'_>,
) -> Result<Vec<f64>> {
    let trace = run_trace(net, x)?;
    let head_in = trace.head_input(net);
    let c_dim = net.output_dim();

    // Hessian of the loss with respect to the head input a^L.
    let mut g_a = vec![0.0; c_dim * c_dim];
    match (net.head(), y) {
        (Head::Regression, SampleLabel::Target(t)) => {
            if t.len() != c_dim {
                return Err(Error::shape("target dimension mismatch"));
            }
            for r in 0..c_dim {
                g_a[r * c_dim + r] = 2.0;
            }
        }
        (Head::Classification, SampleLabel::Class(c)) => {
            if c >= c_dim {
                return Err(Error::domain("class label out of range"));
            }
            // Cross entropy through softmax(a/T): (diag(f) - f f^T) / T^2,
            // independent of the label.
            let f = softmax_with_temperature(&head_in, net.temperature());
            let t2 = net.temperature() * net.temperature();
            for r in 0..c_dim {
                for s in 0..c_dim {
                    let delta = if r == s { f[r] } else { 0.0 };
                    g_a[r * c_dim + s] = (delta - f[r] * f[s]) / t2;
                }
            }
        }
        _ => return Err(Error::domain("label kind does not match the network head")),
    }

    let mut diag = vec![0.0; idx.len()];
    for (l, layer) in net.layers().iter().enumerate().rev() {
        let (in_dim, out_dim) = (layer.in_dim(), layer.out_dim());
        let z = &trace.pre[l];
        let input = &trace.inputs[l];
        // G_z = diag(act'(z)) * G_a * diag(act'(z))
        let d: Vec<f64> = z.iter().map(|&zv| layer.activation().derivative(zv)).collect();
        let mut g_z = vec![0.0; out_dim * out_dim];
        for r in 0..out_dim {
            for s in 0..out_dim {
                g_z[r * out_dim + s] = d[r] * g_a[r * out_dim + s] * d[s];
            }
        }
        let range = idx.layer_range(l);
        let chunk = &mut diag[range];
        for r in 0..out_dim {
            let grr = g_z[r * out_dim + r];
            let row = &mut chunk[r * in_dim..(r + 1) * in_dim];
            for (c, slot) in row.iter_mut().enumerate() {
                *slot = input[c] * input[c] * grr;
            }
        }
        if idx.include_bias() {
            for r in 0..out_dim {
                chunk[out_dim * in_dim + r] = g_z[r * out_dim + r];
            }
        }
        if l > 0 {
            // G_a_prev = W^T G_z W
            let w = layer.weights();
            let mut gw = vec![0.0; out_dim * in_dim];
            for r in 0..out_dim {
                for s in 0..out_dim {
                    let grs = g_z[r * out_dim + s];
                    if grs == 0.0 {
                        continue;
                    }
                    let w_row = &w[s * in_dim..(s + 1) * in_dim];
                    let gw_row = &mut gw[r * in_dim..(r + 1) * in_dim];
                    for c in 0..in_dim {
                        gw_row[c] += grs * w_row[c];
                    }
                }
            }
            let mut prev = vec![0.0; in_dim * in_dim];
            for r in 0..out_dim {
                let w_row = &w[r * in_dim..(r + 1) * in_dim];
                let gw_row = &gw[r * in_dim..(r + 1) * in_dim];
                for a in 0..in_dim {
                    let wra = w_row[a];
                    if wra == 0.0 {
                        continue;
                    }
                    let prow = &mut prev[a * in_dim..(a + 1) * in_dim];
                    for b in 0..in_dim {
                        prow[b] += wra * gw_row[b];
                    }
                }
            }
            g_a = prev;
        }
    }
    if diag.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("hessian diagonal contains non-finite entries"));
    }
    Ok(diag)
}

/// True when `act` is inactive for pre-activation `z` (used by tests).
pub fn relu_inactive(act: Activation, z: f64) -> bool {
    matches!(act, Activation::Relu) && z < 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Dataset, DenseLayer, Labels};

    fn linear_net(w: &[f64]) -> Network {
        let layer = DenseLayer::new(vec![w.to_vec()], vec![0.0], Activation::Identity).unwrap();
        Network::new(vec![layer], Head::Regression, 1.0).unwrap()
    }

    #[test]
    fn linear_model_jacobian_row_is_input() {
        let net = linear_net(&[0.3, -1.2, 2.0]);
        let idx = FlatIndexer::new(&net, false);
        let x = [1.5, -0.5, 4.0];
        let jac = jacobian_outputs(&net, &idx, &x).unwrap();
        assert_eq!(jac, x.to_vec());
    }

    #[test]
    fn dead_relu_unit_zeroes_jacobian_column() {
        // Hidden unit with pre-activation -3 on this input; all its weights
        // must have zero output derivative.
        let l1 = DenseLayer::new(vec![vec![1.0, -1.0]], vec![0.0], Activation::Relu).unwrap();
        let l2 = DenseLayer::new(vec![vec![5.0]], vec![0.0], Activation::Identity).unwrap();
        let net = Network::new(vec![l1, l2], Head::Regression, 1.0).unwrap();
        let idx = FlatIndexer::new(&net, true);
        let jac = jacobian_outputs(&net, &idx, &[2.0, 5.0]).unwrap();
        // layer-0 weights and bias are all behind the dead unit
        assert_eq!(&jac[0..3], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn linear_regression_gradient_matches_chain_rule() {
        let net = linear_net(&[2.0, -1.0]);
        let idx = FlatIndexer::new(&net, false);
        let x = [3.0, 1.0];
        let y = [4.0];
        let grad = grad_loss(&net, &idx, &x, SampleLabel::Target(&y)).unwrap();
        let residual = 2.0 * 3.0 - 1.0 - 4.0;
        assert_eq!(grad, vec![2.0 * residual * 3.0, 2.0 * residual * 1.0]);
    }

    #[test]
    fn confident_correct_prediction_has_tiny_gradient() {
        let layer = DenseLayer::new(
            vec![vec![40.0], vec![-40.0]],
            vec![0.0, 0.0],
            Activation::Identity,
        )
        .unwrap();
        let net = Network::new(vec![layer], Head::Classification, 1.0).unwrap();
        let idx = FlatIndexer::new(&net, true);
        let grad = grad_loss(&net, &idx, &[1.0], SampleLabel::Class(0)).unwrap();
        let norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(norm <= 1e-12, "norm = {norm}");
    }

    #[test]
    fn linear_regression_hessian_diag_is_two_x_squared() {
        let net = linear_net(&[2.0, -1.0]);
        let idx = FlatIndexer::new(&net, false);
        let x = [3.0, 0.5];
        let h = hessian_diag_loss(&net, &idx, &x, SampleLabel::Target(&[0.0])).unwrap();
        assert_eq!(h, vec![2.0 * 9.0, 2.0 * 0.25]);
    }

    #[test]
    fn dead_relu_unit_zeroes_hessian_diag() {
        let l1 = DenseLayer::new(vec![vec![1.0, -1.0]], vec![0.0], Activation::Relu).unwrap();
        let l2 = DenseLayer::new(vec![vec![5.0]], vec![0.0], Activation::Identity).unwrap();
        let net = Network::new(vec![l1, l2], Head::Regression, 1.0).unwrap();
        let idx = FlatIndexer::new(&net, true);
        let h = hessian_diag_loss(&net, &idx, &[2.0, 5.0], SampleLabel::Target(&[1.0])).unwrap();
        assert_eq!(&h[0..3], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn loss_value_regression_has_no_half_factor() {
        let net = linear_net(&[1.0]);
        let v = loss_value(&net, &[3.0], SampleLabel::Target(&[0.0])).unwrap();
        assert_eq!(v, 9.0);
    }

    #[test]
    fn dataset_sample_label_roundtrip() {
        let ds = Dataset::new(
            vec![1.0, 2.0],
            2,
            1,
            Some(Labels::Classes(vec![0, 1])),
        )
        .unwrap();
        assert!(matches!(ds.sample_label(1), Some(SampleLabel::Class(1))));
    }
}
