//! Small bias-free feedforward and convolutional networks.
//!
//! A [`Network`] is an ordered list of weight layers split at `split_index`
//! into a feature extractor (layers `0..split_index`) and a head (the rest).
//! Every layer computes `act(A · x)`; the last layer always uses the identity
//! activation, so [`Network::forward`] returns raw pre-softmax scores.
//!
//! Inputs are handled in batches as `n × d` matrices (one example per row).
//! Convolutional activations are flattened channel-major: `(channel, y, x)`.

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = Array2<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }

    /// Derivative evaluated at the pre-activation value (ReLU uses 0 at the kink).
    #[inline]
    pub fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Spatial layout of a valid-padding 2D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub in_height: usize,
    pub in_width: usize,
    pub kernel_height: usize,
    pub kernel_width: usize,
    pub stride: usize,
}

impl ConvGeometry {
    pub fn validate(&self) -> Result<()> {
        let ok = self.in_channels > 0
            && self.kernel_height > 0
            && self.kernel_width > 0
            && self.stride > 0
            && self.kernel_height <= self.in_height
            && self.kernel_width <= self.in_width;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArchitecture(format!(
                "inconsistent convolution geometry {self:?}"
            )))
        }
    }

    pub fn out_height(&self) -> usize {
        (self.in_height - self.kernel_height) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.in_width - self.kernel_width) / self.stride + 1
    }

    /// Number of output spatial positions (the filter is applied this many times).
    pub fn positions(&self) -> usize {
        self.out_height() * self.out_width()
    }

    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_height * self.kernel_width
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.in_height * self.in_width
    }

    /// Flat input indices read by each patch, `positions × patch_len`, in
    /// `(channel, ky, kx)` order to match the columns of the filter matrix.
    pub fn patch_table(&self) -> Vec<usize> {
        let (oh, ow) = (self.out_height(), self.out_width());
        let mut table = Vec::with_capacity(oh * ow * self.patch_len());
        for oy in 0..oh {
            for ox in 0..ow {
                for c in 0..self.in_channels {
                    for ky in 0..self.kernel_height {
                        for kx in 0..self.kernel_width {
                            let y = oy * self.stride + ky;
                            let x = ox * self.stride + kx;
                            table.push((c * self.in_height + y) * self.in_width + x);
                        }
                    }
                }
            }
        }
        table
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    /// `out × in` weight matrix.
    pub weights: Matrix,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    /// `out_channels × (in_channels · k_h · k_w)` filter matrix.
    pub filters: Matrix,
    pub geometry: ConvGeometry,
    pub activation: Activation,
}

impl ConvLayer {
    pub fn out_channels(&self) -> usize {
        self.filters.nrows()
    }

    /// Patch matrix of one flattened input, `positions × patch_len`.
    pub(crate) fn patches(&self, x: ArrayView1<f64>, table: &[usize]) -> Matrix {
        let g = &self.geometry;
        let (p, k) = (g.positions(), g.patch_len());
        Array2::from_shape_fn((p, k), |(i, j)| x[table[i * k + j]])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Dense(DenseLayer),
    Conv(ConvLayer),
}

impl Layer {
    pub fn dense(weights: Matrix, activation: Activation) -> Self {
        Layer::Dense(DenseLayer { weights, activation })
    }

    pub fn conv(filters: Matrix, geometry: ConvGeometry, activation: Activation) -> Self {
        Layer::Conv(ConvLayer {
            filters,
            geometry,
            activation,
        })
    }

    pub fn weights(&self) -> &Matrix {
        match self {
            Layer::Dense(d) => &d.weights,
            Layer::Conv(c) => &c.filters,
        }
    }

    pub fn weights_mut(&mut self) -> &mut Matrix {
        match self {
            Layer::Dense(d) => &mut d.weights,
            Layer::Conv(c) => &mut c.filters,
        }
    }

    pub fn activation(&self) -> Activation {
        match self {
            Layer::Dense(d) => d.activation,
            Layer::Conv(c) => c.activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Layer::Dense(d) => d.weights.ncols(),
            Layer::Conv(c) => c.geometry.input_len(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Layer::Dense(d) => d.weights.nrows(),
            Layer::Conv(c) => c.out_channels() * c.geometry.positions(),
        }
    }

    /// Number of times the weight matrix is applied (output spatial positions).
    /// Dense layers count as a single application.
    pub fn applications(&self) -> usize {
        match self {
            Layer::Dense(_) => 1,
            Layer::Conv(c) => c.geometry.positions(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Layer::Conv(c) = self {
            c.geometry.validate()?;
            if c.filters.ncols() != c.geometry.patch_len() {
                return Err(Error::InvalidArchitecture(format!(
                    "filter matrix has {} columns but geometry needs {}",
                    c.filters.ncols(),
                    c.geometry.patch_len()
                )));
            }
        }
        let w = self.weights();
        if w.is_empty() {
            return Err(Error::InvalidArchitecture("empty weight matrix".into()));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer weights".into()));
        }
        Ok(())
    }

    /// Pre-activation outputs for a batch, `n × output_dim`.
    pub fn pre_activation(&self, x: &Matrix) -> Matrix {
        match self {
            Layer::Dense(d) => x.dot(&d.weights.t()),
            Layer::Conv(c) => {
                let g = &c.geometry;
                let table = g.patch_table();
                let positions = g.positions();
                let mut out = Array2::zeros((x.nrows(), self.output_dim()));
                for (row, mut out_row) in x.outer_iter().zip(out.outer_iter_mut()) {
                    // positions × out_channels
                    let y = c.patches(row, &table).dot(&c.filters.t());
                    for ((p, o), v) in y.indexed_iter() {
                        out_row[o * positions + p] = *v;
                    }
                }
                out
            }
        }
    }

    /// Given the layer input `x` and the loss gradient w.r.t. the
    /// pre-activation `delta`, returns `(dL/dW, dL/dx)`.
    pub fn backward(&self, x: &Matrix, delta: &Matrix) -> (Matrix, Matrix) {
        match self {
            Layer::Dense(d) => (delta.t().dot(x), delta.dot(&d.weights)),
            Layer::Conv(c) => {
                let g = &c.geometry;
                let table = g.patch_table();
                let (positions, k) = (g.positions(), g.patch_len());
                let oc = c.out_channels();
                let mut grad_w = Array2::zeros(c.filters.raw_dim());
                let mut grad_x = Array2::zeros(x.raw_dim());
                for ((row, d_row), mut gx_row) in x.outer_iter().zip(delta.outer_iter()).zip(grad_x.outer_iter_mut()) {
                    let patches = c.patches(row, &table);
                    let d = Array2::from_shape_fn((oc, positions), |(o, p)| d_row[o * positions + p]);
                    grad_w += &d.dot(&patches);
                    let grad_patches = d.t().dot(&c.filters);
                    for ((p, j), v) in grad_patches.indexed_iter() {
                        gx_row[table[p * k + j]] += *v;
                    }
                }
                (grad_w, grad_x)
            }
        }
    }

    /// Largest Euclidean norm of any patch this layer reads from `x`.
    /// A dense layer reads the whole vector as its only patch.
    pub fn max_patch_norm(&self, x: &Matrix) -> f64 {
        match self {
            Layer::Dense(_) => x.outer_iter().map(|r| r.dot(&r).sqrt()).fold(0.0, f64::max),
            Layer::Conv(c) => {
                let k = c.geometry.patch_len();
                let table = c.geometry.patch_table();
                let mut best = 0.0f64;
                for row in x.outer_iter() {
                    for patch in table.chunks(k) {
                        let sq: f64 = patch.iter().map(|&i| row[i] * row[i]).sum();
                        best = best.max(sq.sqrt());
                    }
                }
                best
            }
        }
    }

    /// Full forward step: activation of the pre-activation.
    pub fn forward(&self, x: &Matrix) -> Matrix {
        let act = self.activation();
        let mut z = self.pre_activation(x);
        if act != Activation::Identity {
            z.mapv_inplace(|v| act.apply(v));
        }
        z
    }
}

fn check_chain(layers: &[Layer]) -> Result<()> {
    for layer in layers {
        layer.validate()?;
    }
    for (i, pair) in layers.windows(2).enumerate() {
        if pair[0].output_dim() != pair[1].input_dim() {
            return Err(Error::InvalidArchitecture(format!(
                "layer {} outputs {} values but layer {} expects {}",
                i,
                pair[0].output_dim(),
                i + 1,
                pair[1].input_dim()
            )));
        }
    }
    Ok(())
}

pub(crate) fn forward_layers(layers: &[Layer], x: &Matrix) -> Matrix {
    let mut iter = layers.iter();
    let first = iter.next().expect("non-empty layer stack").forward(x);
    iter.fold(first, |h, layer| layer.forward(&h))
}

fn check_batch(layers: &[Layer], x: &Matrix, context: &'static str) -> Result<()> {
    let expected = layers[0].input_dim();
    if x.ncols() != expected {
        return Err(Error::ShapeMismatch {
            context,
            expected,
            found: x.ncols(),
        });
    }
    Ok(())
}

/// Lower layers `w`, frozen once transfer begins. Only shared access is exposed.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureExtractor {
    layers: Vec<Layer>,
}

impl FeatureExtractor {
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn features(&self, x: &Matrix) -> Result<Matrix> {
        check_batch(&self.layers, x, "feature extractor")?;
        Ok(forward_layers(&self.layers, x))
    }
}

/// Upper layers mapping features to class scores (`h` on the source task, `k` on the target).
#[derive(Clone, Debug, PartialEq)]
pub struct Head {
    layers: Vec<Layer>,
}

impl Head {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArchitecture("head has no layers".into()));
        }
        check_chain(&layers)?;
        if layers[layers.len() - 1].activation() != Activation::Identity {
            return Err(Error::InvalidArchitecture(
                "final layer must use the identity activation".into(),
            ));
        }
        Ok(Head { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn scores(&self, features: &Matrix) -> Result<Matrix> {
        check_batch(&self.layers, features, "head")?;
        Ok(forward_layers(&self.layers, features))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    split_index: usize,
}

impl Network {
    pub fn new(layers: Vec<Layer>, split_index: usize) -> Result<Self> {
        if split_index == 0 || split_index >= layers.len() {
            return Err(Error::InvalidArchitecture(format!(
                "split index {split_index} must satisfy 1 <= L < {}",
                layers.len()
            )));
        }
        check_chain(&layers)?;
        if layers[layers.len() - 1].activation() != Activation::Identity {
            return Err(Error::InvalidArchitecture(
                "final layer must use the identity activation".into(),
            ));
        }
        Ok(Network { layers, split_index })
    }

    pub fn from_parts(extractor: FeatureExtractor, head: Head) -> Result<Self> {
        let split_index = extractor.layers.len();
        let mut layers = extractor.layers;
        layers.extend(head.layers);
        Network::new(layers, split_index)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn split_index(&self) -> usize {
        self.split_index
    }

    /// Total depth `L_T`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.layers[self.split_index - 1].output_dim()
    }

    /// Maximum layer width over layers `1..=L_T`, counting all channels.
    pub fn max_width(&self) -> usize {
        self.layers.iter().map(Layer::output_dim).max().unwrap_or(0)
    }

    pub fn weights(&self) -> Vec<&Matrix> {
        self.layers.iter().map(Layer::weights).collect()
    }

    pub fn has_conv(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, Layer::Conv(_)))
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let batch = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row vector shape");
        Ok(self.forward_batch(&batch)?.row(0).to_vec())
    }

    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        check_batch(&self.layers, x, "network input")?;
        Ok(forward_layers(&self.layers, x))
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    pub fn predict_batch(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(predict_from_scores(&self.forward_batch(x)?))
    }

    pub fn split(&self) -> (FeatureExtractor, Head) {
        let (lower, upper) = self.layers.split_at(self.split_index);
        (
            FeatureExtractor { layers: lower.to_vec() },
            Head { layers: upper.to_vec() },
        )
    }

    /// Copies the current weights for later use as reference matrices.
    pub fn snapshot(&self) -> InitSnapshot {
        InitSnapshot {
            matrices: self.layers.iter().map(|l| l.weights().clone()).collect(),
        }
    }
}

/// Weight matrices recorded at initialization, one per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct InitSnapshot {
    pub matrices: Vec<Matrix>,
}

impl InitSnapshot {
    pub fn zeros_like(net: &Network) -> Self {
        InitSnapshot {
            matrices: net
                .layers()
                .iter()
                .map(|l| Array2::zeros(l.weights().raw_dim()))
                .collect(),
        }
    }

    pub fn check_matches(&self, net: &Network) -> Result<()> {
        if self.matrices.len() != net.depth() {
            return Err(Error::ShapeMismatch {
                context: "reference matrices (layer count)",
                expected: net.depth(),
                found: self.matrices.len(),
            });
        }
        for (m, l) in self.matrices.iter().zip(net.layers()) {
            if m.dim() != l.weights().dim() {
                return Err(Error::ShapeMismatch {
                    context: "reference matrix entries",
                    expected: l.weights().len(),
                    found: m.len(),
                });
            }
        }
        Ok(())
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate().skip(1) {
        if v > scores[best] {
            best = i;
        }
    }
    best
}

pub fn predict_from_scores(scores: &Matrix) -> Vec<usize> {
    scores
        .outer_iter()
        .map(|row| match row.as_slice() {
            Some(s) => argmax(s),
            None => argmax(&row.to_vec()),
        })
        .collect()
}

/// Exact risk as an integer count over a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCount {
    pub errors: usize,
    pub total: usize,
}

impl ErrorCount {
    pub fn rate(&self) -> f64 {
        self.errors as f64 / self.total as f64
    }
}

fn check_labels(scores: &Matrix, labels: &[usize]) -> Result<()> {
    if scores.nrows() != labels.len() {
        return Err(Error::LengthMismatch {
            inputs: scores.nrows(),
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let bound = scores.ncols();
    if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= bound) {
        return Err(Error::LabelOutOfRange {
            role: "class",
            row,
            label,
            bound,
        });
    }
    Ok(())
}

pub fn zero_one_errors(scores: &Matrix, labels: &[usize]) -> Result<ErrorCount> {
    check_labels(scores, labels)?;
    let errors = predict_from_scores(scores)
        .iter()
        .zip(labels)
        .filter(|(p, l)| p != l)
        .count();
    Ok(ErrorCount {
        errors,
        total: labels.len(),
    })
}

/// Counts examples with `score[t] < gamma + max_{u != t} score[u]`.
pub fn margin_errors(scores: &Matrix, labels: &[usize], gamma: f64) -> Result<ErrorCount> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "margin must be a finite non-negative number, got {gamma}"
        )));
    }
    check_labels(scores, labels)?;
    let errors = scores
        .outer_iter()
        .zip(labels)
        .filter(|(row, &t)| {
            let runner_up = row
                .iter()
                .enumerate()
                .filter(|&(u, _)| u != t)
                .map(|(_, &v)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            row[t] < gamma + runner_up
        })
        .count();
    Ok(ErrorCount {
        errors,
        total: labels.len(),
    })
}

pub fn empirical_risk_01(net: &Network, inputs: &Matrix, labels: &[usize]) -> Result<f64> {
    check_len(inputs, labels)?;
    Ok(zero_one_errors(&net.forward_batch(inputs)?, labels)?.rate())
}

pub fn empirical_risk_margin(net: &Network, inputs: &Matrix, labels: &[usize], gamma: f64) -> Result<f64> {
    check_len(inputs, labels)?;
    Ok(margin_errors(&net.forward_batch(inputs)?, labels, gamma)?.rate())
}

fn check_len(inputs: &Matrix, labels: &[usize]) -> Result<()> {
    if inputs.nrows() != labels.len() {
        return Err(Error::LengthMismatch {
            inputs: inputs.nrows(),
            labels: labels.len(),
        });
    }
    Ok(())
}

/// Held-out estimate of the 0-1 true risk with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub risk: f64,
    pub std_error: f64,
    pub n: usize,
}

pub fn true_risk_estimate(net: &Network, heldout_inputs: &Matrix, heldout_labels: &[usize]) -> Result<RiskEstimate> {
    if heldout_labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let risk = empirical_risk_01(net, heldout_inputs, heldout_labels)?;
    let n = heldout_labels.len();
    Ok(RiskEstimate {
        risk,
        std_error: (risk * (1.0 - risk) / n as f64).sqrt(),
        n,
    })
}

/// Stacks row vectors into an `n × d` batch.
pub fn batch_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let d = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::ShapeMismatch {
            context: "input rows",
            expected: d,
            found: bad.len(),
        });
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec((rows.len(), d), flat).expect("rectangular rows"))
}

pub(crate) fn select_rows(x: &Matrix, idx: &[usize]) -> Matrix {
    x.select(Axis(0), idx)
}

pub(crate) fn row_norm_max(x: &Matrix) -> f64 {
    x.outer_iter().map(|r| r.dot(&r).sqrt()).fold(0.0, f64::max)
}
