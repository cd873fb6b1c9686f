//! Source training, frozen-feature head training, and the head-feasibility check.
//!
//! Both training problems minimize mean softmax cross-entropy with
//! mini-batch SGD + momentum. The exact 0-1 / margin minimizers are
//! intractable; the margin-based inequalities are instead checked with
//! exact integer risk counts on whatever the surrogate produced.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labelstats::{
    empirical_joint, fit_majority_predictor, make_dummy_source, mpa_hits, MajorityPredictor, PairedLabelDataset,
};
use crate::tinynet::{
    forward_layers, margin_errors, predict_from_scores, select_rows, zero_one_errors, Activation, ConvGeometry,
    ErrorCount, Head, InitSnapshot, Layer, Matrix, Network,
};

/// Margins scanned by the feasibility check unless overridden.
pub const DEFAULT_GAMMA_GRID: [f64; 7] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplicative decay applied every `decay_every` epochs.
    pub lr_decay: f64,
    pub decay_every: usize,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 40,
            batch_size: 32,
            learning_rate: 0.01,
            lr_decay: 0.1,
            decay_every: 10,
            momentum: 0.9,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("train config: {what}")));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay.is_finite()) {
            return bad("lr_decay must be > 0");
        }
        if self.decay_every == 0 {
            return bad("decay_every must be >= 1");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        TrainConfig { seed, ..self.clone() }
    }

    pub fn rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_decay.powi((epoch / self.decay_every) as i32)
    }
}

/// Independent seed for a named sub-stream of one run.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_SOURCE: u64 = 1;
const STREAM_CANDIDATE_INIT: u64 = 2;
const STREAM_CANDIDATE_FIT: u64 = 3;
const STREAM_TARGET_FIT: u64 = 4;
const STREAM_CANDIDATE_MERGED_FIT: u64 = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    Dense {
        units: usize,
        activation: Activation,
    },
    Conv2d {
        out_channels: usize,
        #[serde(flatten)]
        geometry: ConvGeometry,
        activation: Activation,
    },
}

impl LayerSpec {
    fn output_dim(&self) -> usize {
        match self {
            LayerSpec::Dense { units, .. } => *units,
            LayerSpec::Conv2d {
                out_channels, geometry, ..
            } => out_channels * geometry.positions(),
        }
    }
}

/// Layer shapes of a network; weights are drawn by [`Architecture::initialize`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
    pub split_index: usize,
}

impl Architecture {
    /// Fully connected ReLU network with an identity output layer.
    pub fn mlp(input_dim: usize, hidden: &[usize], split_index: usize, outputs: usize) -> Self {
        let mut layers: Vec<LayerSpec> = hidden
            .iter()
            .map(|&units| LayerSpec::Dense {
                units,
                activation: Activation::Relu,
            })
            .collect();
        layers.push(LayerSpec::Dense {
            units: outputs,
            activation: Activation::Identity,
        });
        Architecture {
            input_dim,
            layers,
            split_index,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, LayerSpec::output_dim)
    }

    pub fn feature_dim(&self) -> usize {
        self.layers[self.split_index - 1].output_dim()
    }

    /// Head layer specs with the output layer resized to `outputs` classes.
    pub fn head_specs(&self, outputs: usize) -> Vec<LayerSpec> {
        let mut head = self.layers[self.split_index..].to_vec();
        if let Some(LayerSpec::Dense { units, .. }) = head.last_mut() {
            *units = outputs;
        }
        head
    }

    pub fn initialize(&self, rng: &mut ChaCha8Rng) -> Result<Network> {
        if self.split_index == 0 || self.split_index >= self.layers.len() {
            return Err(Error::InvalidArchitecture(format!(
                "split index {} must satisfy 1 <= L < {}",
                self.split_index,
                self.layers.len()
            )));
        }
        let layers = init_layers(&self.layers, self.input_dim, rng)?;
        Network::new(layers, self.split_index)
    }
}

/// Glorot-uniform: entries in `[-a, a]`, `a = sqrt(6 / (fan_in + fan_out))`.
fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-a, a).expect("finite bounds");
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

pub fn init_layers(specs: &[LayerSpec], input_dim: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Layer>> {
    let mut fan_in = input_dim;
    let mut layers = Vec::with_capacity(specs.len());
    for spec in specs {
        let layer = match spec {
            LayerSpec::Dense { units, activation } => Layer::dense(glorot(*units, fan_in, rng), *activation),
            LayerSpec::Conv2d {
                out_channels,
                geometry,
                activation,
            } => {
                geometry.validate()?;
                Layer::conv(glorot(*out_channels, geometry.patch_len(), rng), *geometry, *activation)
            }
        };
        if layer.input_dim() != fan_in {
            return Err(Error::InvalidArchitecture(format!(
                "layer expects {} inputs but receives {}",
                layer.input_dim(),
                fan_in
            )));
        }
        fan_in = layer.output_dim();
        layers.push(layer);
    }
    Ok(layers)
}

/// Mean cross-entropy and its gradient w.r.t. every weight matrix.
#[derive(Clone, Debug)]
pub struct LossGradient {
    pub loss: f64,
    pub grads: Vec<Matrix>,
}

pub fn cross_entropy_loss(layers: &[Layer], inputs: &Matrix, labels: &[usize]) -> Result<f64> {
    check_batch(layers, inputs, labels)?;
    let scores = forward_layers(layers, inputs);
    Ok(softmax_residual(&scores, labels).0)
}

/// `(mean loss, (softmax - onehot) / n)` for a batch of scores.
fn softmax_residual(scores: &Matrix, labels: &[usize]) -> (f64, Matrix) {
    let n = labels.len() as f64;
    let mut residual = scores.clone();
    let mut loss = 0.0;
    for ((mut row, &t), raw) in residual.outer_iter_mut().zip(labels).zip(scores.outer_iter()) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let z: f64 = row.sum();
        loss += z.ln() - (raw[t] - max);
        row.mapv_inplace(|v| v / z / n);
        row[t] -= 1.0 / n;
    }
    (loss / n, residual)
}

fn check_batch(layers: &[Layer], inputs: &Matrix, labels: &[usize]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if inputs.nrows() != labels.len() {
        return Err(Error::LengthMismatch {
            inputs: inputs.nrows(),
            labels: labels.len(),
        });
    }
    let d = layers[0].input_dim();
    if inputs.ncols() != d {
        return Err(Error::ShapeMismatch {
            context: "training batch",
            expected: d,
            found: inputs.ncols(),
        });
    }
    let m = layers[layers.len() - 1].output_dim();
    if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= m) {
        return Err(Error::LabelOutOfRange {
            role: "class",
            row,
            label,
            bound: m,
        });
    }
    Ok(())
}

pub fn cross_entropy_gradient(layers: &[Layer], inputs: &Matrix, labels: &[usize]) -> Result<LossGradient> {
    check_batch(layers, inputs, labels)?;
    // layer inputs and pre-activations, kept for the backward pass
    let mut acts: Vec<Matrix> = Vec::with_capacity(layers.len() + 1);
    let mut pres: Vec<Matrix> = Vec::with_capacity(layers.len());
    acts.push(inputs.clone());
    for layer in layers {
        let pre = layer.pre_activation(acts.last().expect("input"));
        let act = layer.activation();
        acts.push(pre.mapv(|v| act.apply(v)));
        pres.push(pre);
    }
    let (loss, mut delta) = softmax_residual(&acts[layers.len()], labels);
    let mut grads = vec![Matrix::zeros((0, 0)); layers.len()];
    for i in (0..layers.len()).rev() {
        let (gw, gx) = layers[i].backward(&acts[i], &delta);
        grads[i] = gw;
        if i > 0 {
            let act = layers[i - 1].activation();
            delta = gx;
            delta.zip_mut_with(&pres[i - 1], |d, &p| *d *= act.derivative(p));
        }
    }
    Ok(LossGradient { loss, grads })
}

impl Network {
    pub fn gradient(&self, inputs: &Matrix, labels: &[usize]) -> Result<LossGradient> {
        cross_entropy_gradient(self.layers(), inputs, labels)
    }
}

/// Mini-batch SGD with (heavy-ball) momentum on `layers`, in place.
fn sgd(layers: &mut [Layer], inputs: &Matrix, labels: &[usize], cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    check_batch(layers, inputs, labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut velocity: Vec<Matrix> = layers.iter().map(|l| Matrix::zeros(l.weights().raw_dim())).collect();
    let mut order: Vec<usize> = (0..labels.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = cfg.rate_at(epoch);
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let x = select_rows(inputs, chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let LossGradient { loss, grads } = cross_entropy_gradient(layers, &x, &y)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            for ((layer, v), g) in layers.iter_mut().zip(&mut velocity).zip(&grads) {
                v.zip_mut_with(g, |v, &g| *v = cfg.momentum * *v + g);
                layer.weights_mut().scaled_add(-lr, v);
            }
        }
        if layers.iter().any(|l| l.weights().iter().any(|w| !w.is_finite())) {
            return Err(Error::TrainingDiverged { epoch });
        }
    }
    Ok(())
}

/// Trains `(w*, h*)` from a seeded initialization; the snapshot is taken before the first step.
pub fn train_source(
    inputs: &Matrix,
    labels: &[usize],
    arch: &Architecture,
    cfg: &TrainConfig,
) -> Result<(Network, InitSnapshot)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_SOURCE));
    let net = arch.initialize(&mut rng)?;
    let snapshot = net.snapshot();
    let split = net.split_index();
    let mut layers = net.layers().to_vec();
    sgd(
        &mut layers,
        inputs,
        labels,
        &cfg.with_seed(derive_seed(cfg.seed, STREAM_SOURCE + 100)),
    )?;
    Ok((Network::new(layers, split)?, snapshot))
}

/// Trains a head on fixed features, starting from `head`.
pub fn fit_head(features: &Matrix, labels: &[usize], head: Head, cfg: &TrainConfig) -> Result<Head> {
    let mut head = head;
    sgd(head.layers_mut(), features, labels, cfg)?;
    Ok(head)
}

/// Trains a new head `k*` on top of the frozen feature extractor of `source`.
pub fn train_target_head(
    source: &Network,
    inputs: &Matrix,
    labels: &[usize],
    initial_head: Head,
    cfg: &TrainConfig,
) -> Result<Network> {
    let (extractor, _) = source.split();
    let features = extractor.features(inputs)?;
    let head = fit_head(&features, labels, initial_head, cfg)?;
    Network::from_parts(extractor, head)
}

pub fn random_head(arch: &Architecture, outputs: usize, seed: u64) -> Result<Head> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Head::new(init_layers(&arch.head_specs(outputs), arch.feature_dim(), &mut rng)?)
}

pub fn validate_gamma_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("margin grid is empty".into()));
    }
    if grid.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(Error::InvalidParameter("margin grid values must be positive".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "margin grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub gamma: f64,
    pub errors: ErrorCount,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub feasible: bool,
    /// Largest feasible grid margin, 0 when none is feasible.
    pub gamma_bar: f64,
    pub candidate: String,
    /// Target 0-1 errors of the composed classifier `f_mp ∘ h* ∘ w*`.
    pub rhs: ErrorCount,
    pub lhs: Vec<GridPoint>,
}

/// Outcome of the feasibility check, including the trained candidate head `k̄`.
#[derive(Clone, Debug)]
pub struct AssumptionCheck {
    pub report: AssumptionReport,
    pub candidate: Network,
    /// Weights the chosen candidate started from; reference matrices for the target head.
    pub candidate_init: Head,
}

/// Target errors of predicting `f_mp(argmax h*(w*(x)))`.
pub fn composed_errors(
    source: &Network,
    f_mp: &MajorityPredictor,
    target_inputs: &Matrix,
    target_labels: &[usize],
) -> Result<ErrorCount> {
    if target_inputs.nrows() != target_labels.len() {
        return Err(Error::LengthMismatch {
            inputs: target_inputs.nrows(),
            labels: target_labels.len(),
        });
    }
    if target_labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dummy = predict_from_scores(&source.forward_batch(target_inputs)?);
    let errors = dummy
        .iter()
        .zip(target_labels)
        .filter(|(&s, &t)| f_mp.predict(s) != t)
        .count();
    Ok(ErrorCount {
        errors,
        total: target_labels.len(),
    })
}

/// Largest factor applied to a candidate's output layer when stretching its margins.
const MAX_MARGIN_SCALE: f64 = 1e6;

/// Source head with its output rows summed per target class: row `t` is the sum
/// of the rows of `h*` for every source class that `f_mp` sends to `t`. When
/// `f_mp` is a bijection this predicts exactly `f_mp ∘ h*`.
pub fn merged_source_head(source: &Network, f_mp: &MajorityPredictor) -> Option<Head> {
    let (_, head) = source.split();
    let mut layers = head.layers().to_vec();
    let Some(Layer::Dense(last)) = layers.last_mut() else {
        return None;
    };
    let mut merged = Matrix::zeros((f_mp.num_target(), last.weights.ncols()));
    for (s, row) in last.weights.outer_iter().enumerate() {
        let mut target = merged.row_mut(f_mp.predict(s));
        target += &row;
    }
    last.weights = merged;
    Head::new(layers).ok()
}

/// Scales the output layer so that every correctly classified point with a positive
/// margin clears `margin`; the head is bias-free, so scores scale by the same factor.
/// Returns the factor used.
fn stretch_margins(head: &mut Head, features: &Matrix, labels: &[usize], margin: f64) -> Result<f64> {
    let scores = head.scores(features)?;
    let smallest = scores
        .outer_iter()
        .zip(labels)
        .filter_map(|(row, &t)| {
            let other = row
                .iter()
                .enumerate()
                .filter(|&(u, _)| u != t)
                .map(|(_, &v)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            let m = row[t] - other;
            (m > 0.0).then_some(m)
        })
        .fold(f64::INFINITY, f64::min);
    if !smallest.is_finite() {
        return Ok(1.0);
    }
    let factor = (2.0 * margin / smallest).clamp(1.0, MAX_MARGIN_SCALE);
    if factor > 1.0 {
        let layers = head.layers_mut();
        let last = layers.len() - 1;
        layers[last].weights_mut().mapv_inplace(|w| w * factor);
    }
    Ok(factor)
}

struct Candidate {
    description: String,
    init: Head,
    head: Head,
    lhs: Vec<GridPoint>,
    gamma_bar: f64,
}

/// Scans `gamma_grid` for the largest margin at which a candidate head `k̄` is
/// no worse than the composed baseline `f_mp ∘ h*`.
///
/// Candidates, all with the shape of the source head (output resized to the
/// target classes):
/// - a randomly initialized head trained for three times the configured epochs,
///   with a proportionally stretched learning-rate schedule;
/// - the merged source head ([`merged_source_head`]) trained the same way;
/// - the merged source head as is.
///
/// Each candidate's output layer is then scaled so its margins clear the largest
/// grid value ([`MAX_MARGIN_SCALE`] caps the factor). The candidate with the
/// largest feasible margin is kept, ties going to fewer errors at the smallest
/// grid margin and then to the earlier candidate.
pub fn check_assumption1(
    source: &Network,
    arch: &Architecture,
    f_mp: &MajorityPredictor,
    target_inputs: &Matrix,
    target_labels: &[usize],
    gamma_grid: &[f64],
    cfg: &TrainConfig,
) -> Result<AssumptionCheck> {
    validate_gamma_grid(gamma_grid)?;
    let rhs = composed_errors(source, f_mp, target_inputs, target_labels)?;
    let (extractor, _) = source.split();
    let features = extractor.features(target_inputs)?;
    let long_cfg = |stream: u64| TrainConfig {
        epochs: cfg.epochs * 3,
        decay_every: cfg.decay_every * 3,
        seed: derive_seed(cfg.seed, stream),
        ..cfg.clone()
    };
    let init_seed = derive_seed(cfg.seed, STREAM_CANDIDATE_INIT);
    let random_init = random_head(arch, f_mp.num_target(), init_seed)?;
    let mut raw = vec![(
        format!(
            "random init (seed {init_seed}), cross-entropy for {} epochs",
            cfg.epochs * 3
        ),
        random_init.clone(),
        fit_head(&features, target_labels, random_init, &long_cfg(STREAM_CANDIDATE_FIT))?,
    )];
    if let Some(merged) = merged_source_head(source, f_mp) {
        raw.push((
            format!("merged source head, cross-entropy for {} epochs", cfg.epochs * 3),
            merged.clone(),
            fit_head(
                &features,
                target_labels,
                merged.clone(),
                &long_cfg(STREAM_CANDIDATE_MERGED_FIT),
            )?,
        ));
        raw.push(("merged source head, untrained".to_string(), merged.clone(), merged));
    }

    let widest = gamma_grid[gamma_grid.len() - 1];
    let mut best: Option<Candidate> = None;
    for (description, init, mut head) in raw {
        let factor = stretch_margins(&mut head, &features, target_labels, widest)?;
        let scores = head.scores(&features)?;
        let lhs = gamma_grid
            .iter()
            .map(|&gamma| {
                let errors = margin_errors(&scores, target_labels, gamma)?;
                Ok(GridPoint {
                    gamma,
                    errors,
                    satisfied: errors.errors <= rhs.errors,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let gamma_bar = lhs.iter().filter(|p| p.satisfied).map(|p| p.gamma).fold(0.0, f64::max);
        let candidate = Candidate {
            description: format!("{description}; output layer scaled by {factor:?}"),
            init,
            head,
            lhs,
            gamma_bar,
        };
        let better = match &best {
            None => true,
            Some(b) => {
                candidate.gamma_bar > b.gamma_bar
                    || (candidate.gamma_bar == b.gamma_bar && candidate.lhs[0].errors.errors < b.lhs[0].errors.errors)
            }
        };
        if better {
            best = Some(candidate);
        }
    }
    let chosen = best.expect("at least one candidate");
    let report = AssumptionReport {
        feasible: chosen.gamma_bar > 0.0,
        gamma_bar: chosen.gamma_bar,
        candidate: chosen.description,
        rhs,
        lhs: chosen.lhs,
    };
    Ok(AssumptionCheck {
        report,
        candidate: Network::from_parts(extractor, chosen.head)?,
        candidate_init: chosen.init,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// Source and target label the same inputs.
    SharedInputs,
    /// Target inputs are disjoint; MPA uses dummy source labels from `h* ∘ w*`.
    DifferentInputs,
}

/// Training data for one transfer run.
#[derive(Clone, Debug)]
pub struct TransferTask {
    pub source_inputs: Matrix,
    pub source_labels: Vec<usize>,
    /// `None` means the target task shares the source inputs.
    pub target_inputs: Option<Matrix>,
    pub target_labels: Vec<usize>,
    pub num_source: usize,
    pub num_target: usize,
}

impl TransferTask {
    pub fn setting(&self) -> Setting {
        if self.target_inputs.is_some() {
            Setting::DifferentInputs
        } else {
            Setting::SharedInputs
        }
    }

    pub fn target_inputs(&self) -> &Matrix {
        self.target_inputs.as_ref().unwrap_or(&self.source_inputs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginPoint {
    pub gamma: f64,
    /// Margin errors of the trained head `k*`.
    pub trained: ErrorCount,
    /// Margin errors of the candidate head `k̄`.
    pub candidate: ErrorCount,
    /// The better of the two; this is the `k*` used in the inequality checks.
    pub best: ErrorCount,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpaSummary {
    pub value: f64,
    pub hits: usize,
    pub n: usize,
    pub mapping: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct TransferOutcome {
    pub setting: Setting,
    pub source_model: Network,
    pub source_init: InitSnapshot,
    pub target_model: Network,
    /// Reference matrices for the target network: source initialization for
    /// the extractor layers, candidate-head initialization for the head layers.
    pub target_init: InitSnapshot,
    pub candidate_model: Network,
    pub source_errors: ErrorCount,
    pub target_errors: ErrorCount,
    pub margin: Vec<MarginPoint>,
    pub mpa: MpaSummary,
    pub assumption: AssumptionReport,
    pub config: TrainConfig,
    pub gamma_grid: Vec<f64>,
}

impl TransferOutcome {
    pub fn target_sample_size(&self) -> usize {
        self.mpa.n
    }
}

pub fn run_transfer(
    task: &TransferTask,
    arch: &Architecture,
    cfg: &TrainConfig,
    gamma_grid: &[f64],
) -> Result<TransferOutcome> {
    validate_gamma_grid(gamma_grid)?;
    if arch.output_dim() != task.num_source {
        return Err(Error::InvalidArchitecture(format!(
            "architecture has {} outputs but the source task has {} classes",
            arch.output_dim(),
            task.num_source
        )));
    }
    let (source_model, source_init) = train_source(&task.source_inputs, &task.source_labels, arch, cfg)?;
    let source_errors = zero_one_errors(&source_model.forward_batch(&task.source_inputs)?, &task.source_labels)?;

    let target_inputs = task.target_inputs();
    let pairs = match task.setting() {
        Setting::SharedInputs => PairedLabelDataset::from_labels(
            &task.source_labels,
            &task.target_labels,
            task.num_source,
            task.num_target,
        )?,
        Setting::DifferentInputs => {
            make_dummy_source(&source_model, target_inputs, &task.target_labels, task.num_target)?
        }
    };
    let f_mp = fit_majority_predictor(&empirical_joint(&pairs));
    let hits = mpa_hits(&pairs);
    let mpa = MpaSummary {
        value: hits as f64 / pairs.len() as f64,
        hits,
        n: pairs.len(),
        mapping: f_mp.mapping().to_vec(),
    };

    let check = check_assumption1(
        &source_model,
        arch,
        &f_mp,
        target_inputs,
        &task.target_labels,
        gamma_grid,
        cfg,
    )?;
    let (_, candidate_head) = check.candidate.split();
    let target_model = train_target_head(
        &source_model,
        target_inputs,
        &task.target_labels,
        candidate_head,
        &cfg.with_seed(derive_seed(cfg.seed, STREAM_TARGET_FIT)),
    )?;

    let trained_scores = target_model.forward_batch(target_inputs)?;
    let candidate_scores = check.candidate.forward_batch(target_inputs)?;
    let target_errors = zero_one_errors(&trained_scores, &task.target_labels)?;
    let margin = gamma_grid
        .iter()
        .map(|&gamma| {
            let trained = margin_errors(&trained_scores, &task.target_labels, gamma)?;
            let candidate = margin_errors(&candidate_scores, &task.target_labels, gamma)?;
            let best = if trained.errors <= candidate.errors {
                trained
            } else {
                candidate
            };
            Ok(MarginPoint {
                gamma,
                trained,
                candidate,
                best,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let split = source_model.split_index();
    let mut target_refs = source_init.matrices[..split].to_vec();
    target_refs.extend(check.candidate_init.layers().iter().map(|l| l.weights().clone()));

    Ok(TransferOutcome {
        setting: task.setting(),
        source_model,
        source_init,
        target_model,
        target_init: InitSnapshot { matrices: target_refs },
        candidate_model: check.candidate,
        source_errors,
        target_errors,
        margin,
        mpa,
        assumption: check.report,
        config: cfg.clone(),
        gamma_grid: gamma_grid.to_vec(),
    })
}
