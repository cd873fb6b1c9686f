//! Majority predictor accuracy (MPA) as a transferability estimate for
//! frozen-feature transfer learning, together with the tooling to test it:
//! tiny bias-free networks, source/target training, exact empirical-risk
//! checks, and norm-based capacity terms for fully connected and
//! convolutional heads.

pub mod bounds;
pub mod error;
pub mod experiment;
pub mod io;
pub mod labelstats;
pub mod model_file;
pub mod tinynet;
pub mod transfer;

pub use error::{Error, Result};
pub use labelstats::{
    compute_mpa, empirical_joint, fit_majority_predictor, make_dummy_source, mpa_hits, EmpiricalJoint,
    MajorityPredictor, PairedLabelDataset,
};
pub use tinynet::{Activation, ConvGeometry, ErrorCount, FeatureExtractor, Head, InitSnapshot, Layer, Matrix, Network};
pub use transfer::{
    check_assumption1, run_transfer, train_source, train_target_head, Architecture, LayerSpec, Setting, TrainConfig,
    TransferOutcome, TransferTask,
};
