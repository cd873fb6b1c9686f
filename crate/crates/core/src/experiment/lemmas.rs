//! Exact checks of the empirical-risk inequalities on seeded transfer runs.
//!
//! Shared inputs: `R̂_{T,γ}(w*, k*) ≤ R̂_S(w*, h*) + 1 − MPA(T|S)`.
//! Different inputs: `R̂_{T,γ}(w*, k*) ≤ 1 − MPA(T|S̃)`.
//!
//! All risks share the target sample size as denominator, so both sides are
//! compared as integer error counts. Grid margins above `γ̄` (or every margin,
//! when the feasibility check fails) are not checked.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::synthetic::{align_labels, random_label_map, Mixture};
use crate::error::{Error, Result};
use crate::tinynet::{ErrorCount, Matrix};
use crate::transfer::{
    derive_seed, run_transfer, Architecture, Setting, TrainConfig, TransferOutcome, TransferTask, DEFAULT_GAMMA_GRID,
};

/// Parameters of one synthetic transfer run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaInstance {
    pub seed: u64,
    pub dim: usize,
    /// Source sample size `n`.
    pub n_source: usize,
    /// Target sample size `p` (different-inputs setting only).
    pub n_target: usize,
    pub num_source: usize,
    pub num_target: usize,
    pub alpha: f64,
    pub separation: f64,
    pub hidden: Vec<usize>,
    pub split_index: usize,
    pub train: TrainConfig,
    pub gamma_grid: Vec<f64>,
}

impl Default for LemmaInstance {
    fn default() -> Self {
        LemmaInstance {
            seed: 0,
            dim: 16,
            n_source: 2000,
            n_target: 2000,
            num_source: 4,
            num_target: 2,
            alpha: 0.5,
            separation: 3.0,
            hidden: vec![32, 16],
            split_index: 2,
            train: TrainConfig::default(),
            gamma_grid: DEFAULT_GAMMA_GRID.to_vec(),
        }
    }
}

impl LemmaInstance {
    /// Desk-scale instance with alignment and source class count drawn from `seed`.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x1E44A));
        LemmaInstance {
            seed,
            alpha: rng.random_range(0.0..=1.0),
            num_source: if rng.random::<bool>() { 2 } else { 4 },
            train: TrainConfig::default().with_seed(seed),
            ..LemmaInstance::default()
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture::mlp(self.dim, &self.hidden, self.split_index, self.num_source)
    }

    pub fn build_task(&self, setting: Setting) -> Result<TransferTask> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, 0xDA7A));
        let mixture = Mixture::random(self.num_source, self.dim, self.separation, &mut rng);
        let map = random_label_map(self.num_source, self.num_target, &mut rng);
        let (source_inputs, source_labels) = mixture.sample(self.n_source, &mut rng);
        match setting {
            Setting::SharedInputs => {
                let target_labels = align_labels(&source_labels, &map, self.alpha, self.num_target, &mut rng);
                Ok(TransferTask {
                    source_inputs,
                    source_labels,
                    target_inputs: None,
                    target_labels,
                    num_source: self.num_source,
                    num_target: self.num_target,
                })
            }
            Setting::DifferentInputs => {
                let (target_inputs, components) = mixture.sample(self.n_target, &mut rng);
                ensure_disjoint(&source_inputs, &target_inputs)?;
                let target_labels = align_labels(&components, &map, self.alpha, self.num_target, &mut rng);
                Ok(TransferTask {
                    source_inputs,
                    source_labels,
                    target_inputs: Some(target_inputs),
                    target_labels,
                    num_source: self.num_source,
                    num_target: self.num_target,
                })
            }
        }
    }
}

fn ensure_disjoint(a: &Matrix, b: &Matrix) -> Result<()> {
    let key = |r: ndarray::ArrayView1<f64>| r.iter().map(|v| v.to_bits()).collect::<Vec<u64>>();
    let seen: HashSet<Vec<u64>> = a.outer_iter().map(key).collect();
    if b.outer_iter().any(|r| seen.contains(&key(r))) {
        return Err(Error::InvalidParameter("source and target input sets overlap".into()));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Holds,
    Violated,
    /// The feasibility check found no admissible margin; nothing to check.
    Vacuous,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaPoint {
    pub gamma: f64,
    pub lhs: ErrorCount,
    /// Right-hand side as an error count over the same denominator.
    pub rhs_errors: usize,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaVerdict {
    pub setting: Setting,
    pub status: VerdictStatus,
    pub gamma_bar: f64,
    pub source_errors: ErrorCount,
    pub mpa: f64,
    pub mpa_hits: usize,
    pub points: Vec<LemmaPoint>,
}

impl LemmaVerdict {
    pub fn violated(&self) -> bool {
        self.status == VerdictStatus::Violated
    }
}

/// Evaluates the inequality for `outcome.setting` at every admissible grid margin.
pub fn lemma_verdict(outcome: &TransferOutcome) -> LemmaVerdict {
    let n = outcome.mpa.n;
    let misses = n - outcome.mpa.hits;
    let rhs_errors = match outcome.setting {
        Setting::SharedInputs => {
            debug_assert_eq!(outcome.source_errors.total, n);
            outcome.source_errors.errors + misses
        }
        Setting::DifferentInputs => misses,
    };
    let report = &outcome.assumption;
    let points: Vec<LemmaPoint> = if report.feasible {
        outcome
            .margin
            .iter()
            .filter(|m| m.gamma <= report.gamma_bar)
            .map(|m| LemmaPoint {
                gamma: m.gamma,
                lhs: m.best,
                rhs_errors,
                holds: m.best.errors <= rhs_errors,
            })
            .collect()
    } else {
        Vec::new()
    };
    let status = if !report.feasible {
        VerdictStatus::Vacuous
    } else if points.iter().all(|p| p.holds) {
        VerdictStatus::Holds
    } else {
        VerdictStatus::Violated
    };
    LemmaVerdict {
        setting: outcome.setting,
        status,
        gamma_bar: report.gamma_bar,
        source_errors: outcome.source_errors,
        mpa: outcome.mpa.value,
        mpa_hits: outcome.mpa.hits,
        points,
    }
}

pub fn run_instance(instance: &LemmaInstance, setting: Setting) -> Result<TransferOutcome> {
    let task = instance.build_task(setting)?;
    run_transfer(&task, &instance.architecture(), &instance.train, &instance.gamma_grid)
}

pub fn verify_lemma1(instance: &LemmaInstance) -> Result<LemmaVerdict> {
    Ok(lemma_verdict(&run_instance(instance, Setting::SharedInputs)?))
}

pub fn verify_lemma2(instance: &LemmaInstance) -> Result<LemmaVerdict> {
    Ok(lemma_verdict(&run_instance(instance, Setting::DifferentInputs)?))
}
