//! Matrix norms and the weight-norm capacity terms of the transfer bounds.
//!
//! The bounds carry unspecified universal constants and log factors, so no
//! single scalar "bound" is produced. [`BoundReport`] keeps the empirical
//! part, the scaled capacity term and the confidence term separate.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tinynet::{row_norm_max, ConvGeometry, ConvLayer, ErrorCount, InitSnapshot, Layer, Matrix, Network};
use crate::transfer::{Setting, TransferOutcome};

const POWER_MAX_ITERS: usize = 1000;
const POWER_REL_TOL: f64 = 1e-10;

fn check_finite(a: &Matrix) -> Result<()> {
    if a.is_empty() {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix".into()));
    }
    Ok(())
}

pub fn frobenius(a: &Matrix) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest row Euclidean norm, `max_i ‖A_{i,•}‖`.
pub fn max_row_norm(a: &Matrix) -> f64 {
    row_norm_max(a)
}

/// `‖A‖_{2,1}`: sum of the Euclidean norms of the columns.
pub fn norm_21(a: &Matrix) -> Result<f64> {
    check_finite(a)?;
    Ok(a.columns().into_iter().map(|c| c.dot(&c).sqrt()).sum())
}

/// Power iteration on `AᵀA` from the normalized all-ones vector, returning
/// `sqrt(λ_max)`.
///
/// If the all-ones start happens to be orthogonal to the top right singular
/// vector, iteration is repeated from the basis vector of the largest column
/// and the larger of the two estimates is kept.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    check_finite(a)?;
    let n = a.ncols();
    let ones = vec![1.0 / (n as f64).sqrt(); n];
    let first = power_iterate(a, ones);
    let widest = a
        .columns()
        .into_iter()
        .map(|c| c.dot(&c))
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |best, (j, v)| if v > best.1 { (j, v) } else { best },
        )
        .0;
    let mut basis = vec![0.0; n];
    basis[widest] = 1.0;
    Ok(first.max(power_iterate(a, basis)))
}

fn power_iterate(a: &Matrix, start: Vec<f64>) -> f64 {
    let mut v = ndarray::Array1::from(start);
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = a.t().dot(&a.dot(&v));
        let next = v.dot(&w);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        let converged = (next - lambda).abs() <= POWER_REL_TOL * next.abs();
        lambda = next;
        if converged {
            break;
        }
    }
    lambda.max(0.0).sqrt()
}

/// Per-layer norms of a weight stack against its reference matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormProfile {
    pub frobenius: Vec<f64>,
    pub spectral: Vec<f64>,
    /// `‖A^i - M^i‖_{2,1}` (column orientation).
    pub displacement_21: Vec<f64>,
    pub final_max_row: f64,
    pub spectral_product: f64,
}

impl NormProfile {
    pub fn compute(weights: &[&Matrix], refs: &[&Matrix]) -> Result<Self> {
        check_refs(weights, refs)?;
        let spectral = weights.iter().map(|a| spectral_norm(a)).collect::<Result<Vec<_>>>()?;
        let displacement_21 = weights
            .iter()
            .zip(refs)
            .map(|(a, m)| norm_21(&(*a - *m)))
            .collect::<Result<Vec<_>>>()?;
        Ok(NormProfile {
            frobenius: weights.iter().map(|a| frobenius(a)).collect(),
            spectral_product: spectral.iter().product(),
            spectral,
            displacement_21,
            final_max_row: max_row_norm(weights[weights.len() - 1]),
        })
    }
}

fn check_refs(weights: &[&Matrix], refs: &[&Matrix]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidArchitecture("no layers".into()));
    }
    if weights.len() != refs.len() {
        return Err(Error::ShapeMismatch {
            context: "reference matrices (layer count)",
            expected: weights.len(),
            found: refs.len(),
        });
    }
    for (a, m) in weights.iter().zip(refs) {
        if a.dim() != m.dim() {
            return Err(Error::ShapeMismatch {
                context: "reference matrix entries",
                expected: a.len(),
                found: m.len(),
            });
        }
    }
    Ok(())
}

/// `F_A` for a fully connected stack of `L_T` matrices:
///
/// `L_T · ρ · Π_{i<L_T} ‖A^i‖_σ · (Σ_{i<L_T} (‖A^i − M^i‖_{2,1} / ‖A^i‖_σ)^{2/3} + (‖A^{L_T}‖_Fr / ρ)^{2/3})^{3/2}`
///
/// where `ρ` is the largest row norm of the final matrix.
pub fn capacity_fc(weights: &[&Matrix], refs: &[&Matrix]) -> Result<f64> {
    check_refs(weights, refs)?;
    let depth = weights.len();
    let last = weights[depth - 1];
    check_finite(last)?;
    let rho = max_row_norm(last);
    if rho == 0.0 {
        return Err(Error::SingularLayer { layer: depth });
    }
    let mut product = 1.0;
    let mut sum = 0.0;
    for (i, (a, m)) in weights[..depth - 1].iter().zip(refs).enumerate() {
        let sigma = spectral_norm(a)?;
        if sigma == 0.0 {
            return Err(Error::SingularLayer { layer: i + 1 });
        }
        product *= sigma;
        sum += (norm_21(&(*a - *m))? / sigma).powf(2.0 / 3.0);
    }
    sum += (frobenius(last) / rho).powf(2.0 / 3.0);
    Ok(depth as f64 * rho * product * sum.powf(1.5))
}

pub fn capacity_fc_network(net: &Network, refs: &InitSnapshot) -> Result<f64> {
    if net.has_conv() {
        return Err(Error::UnsupportedArchitecture(
            "fully connected capacity requires dense layers only".into(),
        ));
    }
    refs.check_matches(net)?;
    let r: Vec<&Matrix> = refs.matrices.iter().collect();
    capacity_fc(&net.weights(), &r)
}

/// Full linear map of a convolution over the flattened input.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvUnrolled {
    /// `(out_channels · positions) × input_len`; row `o · positions + p`.
    pub matrix: Matrix,
    pub geometry: ConvGeometry,
    pub out_channels: usize,
}

pub fn conv_unroll(layer: &ConvLayer) -> Result<ConvUnrolled> {
    let g = layer.geometry;
    g.validate()?;
    if layer.filters.ncols() != g.patch_len() {
        return Err(Error::ShapeMismatch {
            context: "filter columns vs. geometry",
            expected: g.patch_len(),
            found: layer.filters.ncols(),
        });
    }
    let (positions, k) = (g.positions(), g.patch_len());
    let table = g.patch_table();
    let oc = layer.out_channels();
    let mut matrix = Array2::zeros((oc * positions, g.input_len()));
    for o in 0..oc {
        for p in 0..positions {
            for j in 0..k {
                matrix[[o * positions + p, table[p * k + j]]] += layer.filters[[o, j]];
            }
        }
    }
    Ok(ConvUnrolled {
        matrix,
        geometry: g,
        out_channels: oc,
    })
}

/// `B_0 .. B_{L_T-1}`: the largest patch norm each layer reads, over all inputs.
pub fn patch_norms(layers: &[Layer], inputs: &Matrix) -> Result<Vec<f64>> {
    if inputs.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if layers.is_empty() {
        return Err(Error::InvalidArchitecture("no layers".into()));
    }
    if inputs.ncols() != layers[0].input_dim() {
        return Err(Error::ShapeMismatch {
            context: "patch norm inputs",
            expected: layers[0].input_dim(),
            found: inputs.ncols(),
        });
    }
    let mut out = Vec::with_capacity(layers.len());
    let mut h = inputs.clone();
    for (i, layer) in layers.iter().enumerate() {
        out.push(layer.max_patch_norm(&h));
        if i + 1 < layers.len() {
            h = layer.forward(&h);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnCapacity {
    pub value: f64,
    /// `T_1 .. T_{L_T}`.
    pub terms: Vec<f64>,
    /// `‖Ã^i‖_σ'` per layer; the last entry is the final layer's largest row norm.
    pub sigma_prime: Vec<f64>,
}

fn unrolled_spectral(layer: &Layer) -> Result<f64> {
    match layer {
        Layer::Dense(d) => spectral_norm(&d.weights),
        Layer::Conv(c) => spectral_norm(&conv_unroll(c)?.matrix),
    }
}

/// `G_A = (Σ_i T_i^{2/3})^{3/2}` for a ReLU convolutional stack without pooling.
///
/// With 1-based layer `i < L_T`,
/// `T_i = B_{i-1} · ‖(A^i − M^i)ᵀ‖_{2,1} · sqrt(w_i) · max_{i ≤ U ≤ L_T−1} Π_{u=i+1}^{U} ‖Ã^u‖_σ' / B_U`,
/// and `T_{L_T} = B_{L_T−1} · ‖A^{L_T} − M^{L_T}‖_Fr / γ`. `w_i` is the number of
/// output positions of layer `i` (1 for dense layers).
pub fn capacity_cnn(layers: &[Layer], refs: &[&Matrix], patch: &[f64], gamma: f64) -> Result<CnnCapacity> {
    let weights: Vec<&Matrix> = layers.iter().map(Layer::weights).collect();
    check_refs(&weights, refs)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("margin must be positive, got {gamma}")));
    }
    let depth = layers.len();
    if patch.len() != depth {
        return Err(Error::ShapeMismatch {
            context: "patch norms",
            expected: depth,
            found: patch.len(),
        });
    }
    // 1-based accessors
    let b = |u: usize| patch[u];
    let mut sigma_prime = Vec::with_capacity(depth);
    for layer in &layers[..depth - 1] {
        sigma_prime.push(unrolled_spectral(layer)?);
    }
    sigma_prime.push(max_row_norm(weights[depth - 1]));
    let sp = |u: usize| sigma_prime[u - 1];

    let mut terms = Vec::with_capacity(depth);
    for i in 1..depth {
        let diff = weights[i - 1] - refs[i - 1];
        let disp = norm_21(&diff.t().to_owned())?;
        let width = (layers[i - 1].applications() as f64).sqrt();
        let mut worst = 0.0f64;
        let mut product = 1.0;
        for u in i..depth {
            if u > i {
                product *= sp(u);
            }
            if b(u) == 0.0 {
                return Err(Error::DegenerateActivation { index: u });
            }
            worst = worst.max(product / b(u));
        }
        terms.push(b(i - 1) * disp * width * worst);
    }
    let last = weights[depth - 1] - refs[depth - 1];
    terms.push(b(depth - 1) * frobenius(&last) / gamma);

    let value = terms.iter().map(|t| t.powf(2.0 / 3.0)).sum::<f64>().powf(1.5);
    Ok(CnnCapacity {
        value,
        terms,
        sigma_prime,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// Reference matrices are the recorded initial weights.
    Init,
    /// Reference matrices are all zero.
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityKind {
    FullyConnected,
    Convolutional,
}

pub const CAVEAT: &str = "terms are reported up to unspecified universal constants and logarithmic factors";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub setting: Setting,
    pub capacity_kind: CapacityKind,
    pub reference: Reference,
    /// `R̂_S + 1 − MPA` (shared inputs) or `1 − MPA` (different inputs).
    pub empirical_part: f64,
    pub source_risk: Option<f64>,
    pub mpa: f64,
    /// `F_A` or `G_A`.
    pub capacity_value: f64,
    pub capacity_terms: Vec<f64>,
    /// Capacity times its scale factor: `max‖x‖·F_A·log W̄ / (γ√n)` or `G_A·log W̄ / √n`.
    pub capacity_term: f64,
    /// `sqrt(log(1/δ) / n)`.
    pub confidence_term: f64,
    pub max_input_norm: f64,
    pub gamma: f64,
    pub gamma_bar: f64,
    pub delta: f64,
    pub sample_size: usize,
    pub max_width: usize,
    pub log_max_width: f64,
    pub up_to_constants: bool,
    pub caveat: String,
}

/// Everything a bound report needs from a transfer run; the CLI rebuilds this from saved files.
#[derive(Clone, Copy, Debug)]
pub struct BoundInputs<'a> {
    pub setting: Setting,
    pub target_model: &'a Network,
    pub target_init: &'a InitSnapshot,
    pub source_errors: ErrorCount,
    pub mpa: f64,
    pub sample_size: usize,
    pub gamma_bar: f64,
}

impl<'a> BoundInputs<'a> {
    pub fn from_outcome(outcome: &'a TransferOutcome) -> Self {
        BoundInputs {
            setting: outcome.setting,
            target_model: &outcome.target_model,
            target_init: &outcome.target_init,
            source_errors: outcome.source_errors,
            mpa: outcome.mpa.value,
            sample_size: outcome.target_sample_size(),
            gamma_bar: outcome.assumption.gamma_bar,
        }
    }
}

pub fn assemble_bound_report(
    outcome: &TransferOutcome,
    target_inputs: &Matrix,
    delta: f64,
    gamma: f64,
    reference: Reference,
) -> Result<BoundReport> {
    bound_report(
        &BoundInputs::from_outcome(outcome),
        target_inputs,
        delta,
        gamma,
        reference,
    )
}

pub fn bound_report(
    run: &BoundInputs<'_>,
    target_inputs: &Matrix,
    delta: f64,
    gamma: f64,
    reference: Reference,
) -> Result<BoundReport> {
    let gamma_bar = run.gamma_bar;
    if !(gamma > 0.0 && gamma <= gamma_bar) {
        return Err(Error::GammaOutOfRange { gamma, gamma_bar });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let net = run.target_model;
    let n = run.sample_size;
    if target_inputs.nrows() != n {
        return Err(Error::ShapeMismatch {
            context: "bound inputs (rows)",
            expected: n,
            found: target_inputs.nrows(),
        });
    }
    let refs = match reference {
        Reference::Init => run.target_init.clone(),
        Reference::Zero => InitSnapshot::zeros_like(net),
    };
    refs.check_matches(net)?;
    let ref_views: Vec<&Matrix> = refs.matrices.iter().collect();

    let mpa = run.mpa;
    let (empirical_part, source_risk) = match run.setting {
        Setting::SharedInputs => {
            let r = run.source_errors.rate();
            (r + 1.0 - mpa, Some(r))
        }
        Setting::DifferentInputs => (1.0 - mpa, None),
    };

    let sqrt_n = (n as f64).sqrt();
    let max_width = net.max_width();
    let log_w = (max_width as f64).ln();
    let max_input_norm = row_norm_max(target_inputs);
    let (capacity_kind, capacity_value, capacity_terms, capacity_term) = if net.has_conv() {
        let b = patch_norms(net.layers(), target_inputs)?;
        let cap = capacity_cnn(net.layers(), &ref_views, &b, gamma)?;
        let scaled = cap.value * log_w / sqrt_n;
        (CapacityKind::Convolutional, cap.value, cap.terms, scaled)
    } else {
        let f = capacity_fc(&net.weights(), &ref_views)?;
        let scaled = max_input_norm * f * log_w / (gamma * sqrt_n);
        (CapacityKind::FullyConnected, f, Vec::new(), scaled)
    };

    Ok(BoundReport {
        setting: run.setting,
        capacity_kind,
        reference,
        empirical_part,
        source_risk,
        mpa,
        capacity_value,
        capacity_terms,
        capacity_term,
        confidence_term: ((1.0 / delta).ln() / n as f64).sqrt(),
        max_input_norm,
        gamma,
        gamma_bar,
        delta,
        sample_size: n,
        max_width,
        log_max_width: log_w,
        up_to_constants: true,
        caveat: CAVEAT.to_string(),
    })
}
