//! JSON model files.
//!
//! ```json
//! {
//!   "layers": [
//!     {"kind": "conv2d", "weights": [[...]], "activation": "relu",
//!      "in_channels": 1, "in_height": 4, "in_width": 4,
//!      "kernel_height": 2, "kernel_width": 2, "stride": 1},
//!     {"kind": "dense", "weights": [[...]], "activation": "identity"}
//!   ],
//!   "split_index": 1,
//!   "init_weights": [[[...]], [[...]]]
//! }
//! ```
//!
//! Weights are row-major nested arrays. Floats are written in shortest
//! round-trip form and parsed back exactly.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tinynet::{Activation, ConvGeometry, InitSnapshot, Layer, Matrix, Network};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub kind: String,
    pub weights: Vec<Vec<f64>>,
    pub activation: Activation,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<ConvGeometry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub layers: Vec<LayerRecord>,
    pub split_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_weights: Option<Vec<Vec<Vec<f64>>>>,
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<Matrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if let Some(r) = rows.iter().find(|r| r.len() != cols) {
        return Err(Error::ShapeMismatch {
            context: "weight matrix row",
            expected: cols,
            found: r.len(),
        });
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec((rows.len(), cols), flat).expect("rectangular"))
}

impl ModelFile {
    pub fn from_network(net: &Network, init: Option<&InitSnapshot>) -> Self {
        let layers = net
            .layers()
            .iter()
            .map(|l| match l {
                Layer::Dense(d) => LayerRecord {
                    kind: "dense".into(),
                    weights: matrix_to_rows(&d.weights),
                    activation: d.activation,
                    geometry: None,
                },
                Layer::Conv(c) => LayerRecord {
                    kind: "conv2d".into(),
                    weights: matrix_to_rows(&c.filters),
                    activation: c.activation,
                    geometry: Some(c.geometry),
                },
            })
            .collect();
        ModelFile {
            layers,
            split_index: net.split_index(),
            init_weights: init.map(|s| s.matrices.iter().map(matrix_to_rows).collect()),
        }
    }

    pub fn to_network(&self) -> Result<(Network, Option<InitSnapshot>)> {
        let layers = self
            .layers
            .iter()
            .map(|rec| {
                let weights = rows_to_matrix(&rec.weights)?;
                match rec.kind.as_str() {
                    "dense" => Ok(Layer::dense(weights, rec.activation)),
                    "conv2d" => {
                        let geometry = rec
                            .geometry
                            .ok_or_else(|| Error::InvalidArchitecture("conv2d layer without geometry fields".into()))?;
                        Ok(Layer::conv(weights, geometry, rec.activation))
                    }
                    k if k.contains("pool") => Err(Error::UnsupportedArchitecture(format!(
                        "pooling layer `{k}` is not supported"
                    ))),
                    k => Err(Error::UnsupportedArchitecture(format!("unknown layer kind `{k}`"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let net = Network::new(layers, self.split_index)?;
        let init = match &self.init_weights {
            None => None,
            Some(mats) => {
                let snapshot = InitSnapshot {
                    matrices: mats.iter().map(|m| rows_to_matrix(m)).collect::<Result<_>>()?,
                };
                snapshot.check_matches(&net)?;
                Some(snapshot)
            }
        };
        Ok((net, init))
    }
}

pub fn save_model(path: impl AsRef<Path>, net: &Network, init: Option<&InitSnapshot>) -> Result<()> {
    let json = serde_json::to_string_pretty(&ModelFile::from_network(net, init))?;
    fs::write(path, json + "\n")?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(Network, Option<InitSnapshot>)> {
    let text = fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    file.to_network()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn conv_net(vals: &[f64]) -> Network {
        let g = ConvGeometry {
            in_channels: 1,
            in_height: 3,
            in_width: 3,
            kernel_height: 2,
            kernel_width: 2,
            stride: 1,
        };
        let f = Array2::from_shape_vec((2, 4), vals[..8].to_vec()).unwrap();
        let d = Array2::from_shape_vec((2, 8), vals[8..24].to_vec()).unwrap();
        Network::new(
            vec![
                Layer::conv(f, g, Activation::Relu),
                Layer::dense(d, Activation::Identity),
            ],
            1,
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn model_json_round_trip_is_bit_exact(vals in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 48)) {
            let net = conv_net(&vals);
            let init = InitSnapshot { matrices: conv_net(&vals[24..]).snapshot().matrices };
            let text = serde_json::to_string(&ModelFile::from_network(&net, Some(&init))).unwrap();
            let back: ModelFile = serde_json::from_str(&text).unwrap();
            let (net2, init2) = back.to_network().unwrap();
            prop_assert_eq!(net2, net);
            prop_assert_eq!(init2, Some(init));
        }
    }

    #[test]
    fn pooling_and_unknown_kinds_are_rejected() {
        let text = r#"{"layers":[{"kind":"maxpool2d","weights":[[1.0]],"activation":"identity"},
                      {"kind":"dense","weights":[[1.0]],"activation":"identity"}],"split_index":1}"#;
        let file: ModelFile = serde_json::from_str(text).unwrap();
        assert!(matches!(file.to_network(), Err(Error::UnsupportedArchitecture(_))));
    }

    #[test]
    fn invalid_split_index_is_rejected() {
        let text = r#"{"layers":[{"kind":"dense","weights":[[1.0]],"activation":"relu"},
                      {"kind":"dense","weights":[[1.0]],"activation":"identity"}],"split_index":2}"#;
        let file: ModelFile = serde_json::from_str(text).unwrap();
        assert!(matches!(file.to_network(), Err(Error::InvalidArchitecture(_))));
    }
}
