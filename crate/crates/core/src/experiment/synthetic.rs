//! Gaussian-mixture task suites with tunable source/target label alignment.
//!
//! The mixture component of each input is its source label. A target task
//! with alignment `alpha` labels each example with `g(s)` for a fixed random
//! map `g` with probability `alpha`, and with a uniformly random label
//! otherwise. `alpha = 1` makes the target a function of the source label;
//! `alpha = 0` makes it independent of it.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tinynet::Matrix;
use crate::transfer::{derive_seed, Architecture, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct Mixture {
    pub centers: Matrix,
}

impl Mixture {
    /// Component centers at distance `separation` from the origin in random directions.
    pub fn random(components: usize, dim: usize, separation: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut centers: Matrix = Array2::from_shape_simple_fn((components, dim), || StandardNormal.sample(&mut *rng));
        for mut row in centers.outer_iter_mut() {
            let norm = row.dot(&row).sqrt().max(f64::MIN_POSITIVE);
            row.mapv_inplace(|v| v * separation / norm);
        }
        Mixture { centers }
    }

    pub fn components(&self) -> usize {
        self.centers.nrows()
    }

    /// Draws `n` points with uniformly chosen components and unit isotropic noise.
    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> (Matrix, Vec<usize>) {
        let k = self.components();
        let dim = self.centers.ncols();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let mut x = Array2::zeros((n, dim));
        for (mut row, &c) in x.outer_iter_mut().zip(&labels) {
            for (v, &m) in row.iter_mut().zip(self.centers.row(c)) {
                let noise: f64 = StandardNormal.sample(&mut *rng);
                *v = m + noise;
            }
        }
        (x, labels)
    }
}

/// Random map `[m_S] → [m_T]`, onto whenever `m_S ≥ m_T`.
pub fn random_label_map(num_source: usize, num_target: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..num_source).collect();
    order.shuffle(rng);
    let mut targets: Vec<usize> = (0..num_target).collect();
    targets.shuffle(rng);
    let mut map = vec![0; num_source];
    for (i, &s) in order.iter().enumerate() {
        map[s] = targets[i % num_target];
    }
    map
}

pub fn align_labels(
    sources: &[usize],
    map: &[usize],
    alpha: f64,
    num_target: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    sources
        .iter()
        .map(|&s| {
            if rng.random::<f64>() < alpha {
                map[s]
            } else {
                rng.random_range(0..num_target)
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSpec {
    pub dim: usize,
    pub n_train: usize,
    pub n_heldout: usize,
    pub num_source: usize,
    pub num_target: usize,
    pub separation: f64,
    pub alphas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub hidden: Vec<usize>,
    pub split_index: usize,
    pub train: TrainConfig,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        SuiteSpec {
            dim: 16,
            n_train: 2000,
            n_heldout: 2000,
            num_source: 4,
            num_target: 2,
            separation: 3.0,
            alphas: (0..20).map(|i| i as f64 / 19.0).collect(),
            seeds: (0..5).collect(),
            hidden: vec![32, 16],
            split_index: 2,
            train: TrainConfig::default(),
        }
    }
}

impl SuiteSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(format!("suite: {m}")));
        if self.dim == 0 || self.n_train == 0 || self.n_heldout == 0 {
            return bad("dim, n_train and n_heldout must be positive".into());
        }
        if self.num_source < 1 || self.num_target < 2 {
            return bad("need at least 1 source class and 2 target classes".into());
        }
        if self.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return bad("alphas must lie in [0, 1]".into());
        }
        if self.alphas.len() < 10 {
            return bad(format!("need at least 10 target tasks, got {}", self.alphas.len()));
        }
        if self.split_index == 0 || self.split_index > self.hidden.len() {
            return bad("split_index must select a hidden layer".into());
        }
        self.train.validate()
    }

    pub fn architecture(&self) -> Architecture {
        Architecture::mlp(self.dim, &self.hidden, self.split_index, self.num_source)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetTask {
    pub alpha: f64,
    pub map: Vec<usize>,
    pub train_labels: Vec<usize>,
    pub heldout_labels: Vec<usize>,
}

/// One seeded realization of a [`SuiteSpec`].
#[derive(Clone, Debug)]
pub struct SyntheticTaskSuite {
    pub spec: SuiteSpec,
    pub seed: u64,
    pub mixture: Mixture,
    pub train_inputs: Matrix,
    pub train_sources: Vec<usize>,
    pub heldout_inputs: Matrix,
    pub heldout_sources: Vec<usize>,
    pub tasks: Vec<TargetTask>,
}

impl SyntheticTaskSuite {
    pub fn generate(spec: &SuiteSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5017E));
        let mixture = Mixture::random(spec.num_source, spec.dim, spec.separation, &mut rng);
        let (train_inputs, train_sources) = mixture.sample(spec.n_train, &mut rng);
        let (heldout_inputs, heldout_sources) = mixture.sample(spec.n_heldout, &mut rng);
        let tasks = spec
            .alphas
            .iter()
            .enumerate()
            .map(|(i, &alpha)| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x7A5C_0000 + i as u64));
                let map = random_label_map(spec.num_source, spec.num_target, &mut rng);
                let train_labels = align_labels(&train_sources, &map, alpha, spec.num_target, &mut rng);
                let heldout_labels = align_labels(&heldout_sources, &map, alpha, spec.num_target, &mut rng);
                TargetTask {
                    alpha,
                    map,
                    train_labels,
                    heldout_labels,
                }
            })
            .collect();
        Ok(SyntheticTaskSuite {
            spec: spec.clone(),
            seed,
            mixture,
            train_inputs,
            train_sources,
            heldout_inputs,
            heldout_sources,
            tasks,
        })
    }
}
