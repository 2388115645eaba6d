//! Minimal dense feed-forward network.
//!
//! A `Network` is a stack of `DenseLayer`s followed by an output head:
//! `regression` returns the last layer's activations unchanged,
//! `classification` pushes them through a temperature-scaled softmax.
//! Weights use row-major layout with shape `(out_dim, in_dim)`.
//!
//! `FlatIndexer` defines the bijection between `(layer, row, col-or-bias)`
//! coordinates and a single global parameter index; everything downstream
//! (importance scores, pruning masks, codebooks) is addressed through it.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Floor applied to output probabilities before any division by them.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z >= 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Identity => z,
        }
    }

    /// Derivative at `z`; the ReLU kink at 0 uses the `z >= 0` branch.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Regression,
    Classification,
}

/// A dense layer `y = activation(Wx + b)` with row-major `W`.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    out_dim: usize,
    in_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        let out_dim = weights.len();
        if out_dim == 0 {
            return Err(Error::shape("layer must have at least one output row"));
        }
        let in_dim = weights[0].len();
        if in_dim == 0 {
            return Err(Error::shape("layer must have at least one input column"));
        }
        if bias.len() != out_dim {
            return Err(Error::shape(format!(
                "bias length {} does not match {} rows",
                bias.len(),
                out_dim
            )));
        }
        let mut flat = Vec::with_capacity(out_dim * in_dim);
        for row in &weights {
            if row.len() != in_dim {
                return Err(Error::shape("ragged weight matrix"));
            }
            flat.extend_from_slice(row);
        }
        if flat.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::numeric("layer contains non-finite entries"));
        }
        Ok(DenseLayer {
            out_dim,
            in_dim,
            weights: flat,
            bias,
            activation,
        })
    }

    pub fn from_flat(
        out_dim: usize,
        in_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.len() != out_dim * in_dim || bias.len() != out_dim {
            return Err(Error::shape("flat layer buffers do not match dimensions"));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::numeric("layer contains non-finite entries"));
        }
        Ok(DenseLayer {
            out_dim,
            in_dim,
            weights,
            bias,
            activation,
        })
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }
    pub fn activation(&self) -> Activation {
        self.activation
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn bias(&self) -> &[f64] {
        &self.bias
    }
    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.in_dim + col]
    }

    /// `z = Wx + b` written into `out`.
    pub(crate) fn affine_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.out_dim {
            let row = &self.weights[r * self.in_dim..(r + 1) * self.in_dim];
            let mut acc = self.bias[r];
            for (w, xv) in row.iter().zip(x) {
                acc += w * xv;
            }
            out.push(acc);
        }
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    layers: Vec<DenseLayer>,
    head: Head,
    temperature: f64,
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>, head: Head, temperature: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::shape("network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::shape(format!(
                    "layer output dim {} does not feed layer input dim {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(Error::domain("temperature must be a positive finite real"));
        }
        Ok(Network {
            layers,
            head,
            temperature,
        })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }
    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }
    pub fn head(&self) -> Head {
        self.head
    }
    pub fn temperature(&self) -> f64 {
        self.temperature
    }
    pub fn set_temperature(&mut self, t: f64) -> Result<()> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::domain("temperature must be a positive finite real"));
        }
        self.temperature = t;
        Ok(())
    }
    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }
    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    /// Head input: the last layer's activations `a^L` (pre-softmax for
    /// classification nets).
    pub fn head_input(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::shape(format!(
                "input has dimension {}, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut a = x.to_vec();
        let mut z = Vec::new();
        for layer in &self.layers {
            layer.affine_into(&a, &mut z);
            a.clear();
            a.extend(z.iter().map(|&v| layer.activation.apply(v)));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("forward pass produced non-finite values"));
        }
        Ok(a)
    }

    /// Network output: raw activations for regression, temperature-scaled
    /// softmax probabilities for classification.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let a = self.head_input(x)?;
        Ok(match self.head {
            Head::Regression => a,
            Head::Classification => softmax_with_temperature(&a, self.temperature),
        })
    }
}

/// Stable softmax of `logits / t` (max subtraction before exponentiation).
pub fn softmax_with_temperature(logits: &[f64], t: f64) -> Vec<f64> {
    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| ((z - mx) / t).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Coordinates of one parameter: `col = None` addresses the bias of `row`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlatCoord {
    pub layer: usize,
    pub row: usize,
    pub col: Option<usize>,
}

/// Bijection between per-layer parameter coordinates and a global index.
///
/// Layout: layers in order; within a layer the weight matrix row-major,
/// then (when `include_bias`) the bias vector. The mapping depends only on
/// the network shape, so one indexer serves the original network and every
/// compressed copy of it.
#[derive(Debug, Clone)]
pub struct FlatIndexer {
    include_bias: bool,
    dims: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    total: usize,
}

impl FlatIndexer {
    pub fn new(net: &Network, include_bias: bool) -> Self {
        let dims: Vec<(usize, usize)> = net
            .layers
            .iter()
            .map(|l| (l.out_dim, l.in_dim))
            .collect();
        let mut offsets = Vec::with_capacity(dims.len());
        let mut total = 0;
        for &(o, i) in &dims {
            offsets.push(total);
            total += o * i + if include_bias { o } else { 0 };
        }
        FlatIndexer {
            include_bias,
            dims,
            offsets,
            total,
        }
    }

    pub fn len(&self) -> usize {
        self.total
    }
    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
    pub fn include_bias(&self) -> bool {
        self.include_bias
    }
    pub fn num_layers(&self) -> usize {
        self.dims.len()
    }

    /// Global index range covered by layer `l`.
    pub fn layer_range(&self, l: usize) -> std::ops::Range<usize> {
        let (o, i) = self.dims[l];
        let start = self.offsets[l];
        start..start + o * i + if self.include_bias { o } else { 0 }
    }

    pub fn to_global(&self, c: FlatCoord) -> Option<usize> {
        let &(o, i) = self.dims.get(c.layer)?;
        if c.row >= o {
            return None;
        }
        let local = match c.col {
            Some(col) => {
                if col >= i {
                    return None;
                }
                c.row * i + col
            }
            None => {
                if !self.include_bias {
                    return None;
                }
                o * i + c.row
            }
        };
        Some(self.offsets[c.layer] + local)
    }

    pub fn from_global(&self, g: usize) -> Option<FlatCoord> {
        if g >= self.total {
            return None;
        }
        let layer = match self.offsets.binary_search(&g) {
            Ok(l) => l,
            Err(l) => l - 1,
        };
        let (o, i) = self.dims[layer];
        let local = g - self.offsets[layer];
        Some(if local < o * i {
            FlatCoord {
                layer,
                row: local / i,
                col: Some(local % i),
            }
        } else {
            FlatCoord {
                layer,
                row: local - o * i,
                col: None,
            }
        })
    }

    /// Copy the addressed parameters out of `net` in global-index order.
    pub fn flatten(&self, net: &Network) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total);
        for layer in &net.layers {
            out.extend_from_slice(&layer.weights);
            if self.include_bias {
                out.extend_from_slice(&layer.bias);
            }
        }
        out
    }

    /// Rebuild a network with the addressed parameters replaced by `w`;
    /// parameters outside the indexer (biases when excluded) are kept.
    pub fn with_weights(&self, net: &Network, w: &[f64]) -> Result<Network> {
        if w.len() != self.total {
            return Err(Error::shape(format!(
                "weight vector has length {}, indexer covers {}",
                w.len(),
                self.total
            )));
        }
        let mut out = net.clone();
        for (l, layer) in out.layers_mut().iter_mut().enumerate() {
            let range = self.layer_range(l);
            let chunk = &w[range];
            let nw = layer.out_dim * layer.in_dim;
            layer.weights.copy_from_slice(&chunk[..nw]);
            if self.include_bias {
                layer.bias.copy_from_slice(&chunk[nw..]);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub enum Labels {
    /// Class indices in `[0, C)`.
    Classes(Vec<usize>),
    /// Row-major regression targets, one row of `dim` per sample.
    Targets { values: Vec<f64>, dim: usize },
}

/// One sample's label, borrowed from a `Dataset`.
#[derive(Debug, Clone, Copy)]
pub enum SampleLabel<'a> {
    Class(usize),
    Target(&'a [f64]),
}

#[derive(Debug, Clone)]
pub struct Dataset {
    inputs: Vec<f64>,
    n: usize,
    input_dim: usize,
    labels: Option<Labels>,
}

impl Dataset {
    pub fn new(
        inputs: Vec<f64>,
        n: usize,
        input_dim: usize,
        labels: Option<Labels>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("dataset must contain at least one sample"));
        }
        if inputs.len() != n * input_dim {
            return Err(Error::shape("input buffer does not match n x input_dim"));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("dataset contains non-finite inputs"));
        }
        match &labels {
            Some(Labels::Classes(c)) if c.len() != n => {
                return Err(Error::shape("label count does not match sample count"));
            }
            Some(Labels::Targets { values, dim }) if values.len() != n * dim => {
                return Err(Error::shape("target buffer does not match n x dim"));
            }
            _ => {}
        }
        Ok(Dataset {
            inputs,
            n,
            input_dim,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }
    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }
    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    pub fn class(&self, i: usize) -> Option<usize> {
        match &self.labels {
            Some(Labels::Classes(c)) => Some(c[i]),
            _ => None,
        }
    }

    pub fn target(&self, i: usize) -> Option<&[f64]> {
        match &self.labels {
            Some(Labels::Targets { values, dim }) => Some(&values[i * dim..(i + 1) * dim]),
            _ => None,
        }
    }

    pub fn sample_label(&self, i: usize) -> Option<SampleLabel<'_>> {
        match &self.labels {
            Some(Labels::Classes(c)) => Some(SampleLabel::Class(c[i])),
            Some(Labels::Targets { values, dim }) => {
                Some(SampleLabel::Target(&values[i * dim..(i + 1) * dim]))
            }
            None => None,
        }
    }

    /// Check input dimension and label kind against a network's shape/head.
    pub fn validate_for(&self, net: &Network, need_labels: bool) -> Result<()> {
        if self.input_dim != net.input_dim() {
            return Err(Error::shape(format!(
                "dataset inputs have dimension {}, network expects {}",
                self.input_dim,
                net.input_dim()
            )));
        }
        match (&self.labels, net.head()) {
            (Some(Labels::Classes(c)), Head::Classification) => {
                let cmax = net.output_dim();
                if c.iter().any(|&y| y >= cmax) {
                    return Err(Error::domain(format!(
                        "class label out of range for {cmax} outputs"
                    )));
                }
            }
            (Some(Labels::Targets { dim, .. }), Head::Regression) => {
                if *dim != net.output_dim() {
                    return Err(Error::shape(format!(
                        "targets have dimension {dim}, network outputs {}",
                        net.output_dim()
                    )));
                }
            }
            (Some(_), _) => {
                return Err(Error::domain(
                    "label kind does not match the network head",
                ));
            }
            (None, _) if need_labels => {
                return Err(Error::domain("operation requires labels"));
            }
            (None, _) => {}
        }
        Ok(())
    }
}
