//! Desk-scale transferability experiments.
//!
//! A source network is trained once per suite seed; every target task then
//! gets a fresh head on the frozen features. The MPA of each task (computed
//! on training pairs) is correlated with the transferred model's held-out
//! accuracy.

pub mod lemmas;
pub mod stats;
pub mod synthetic;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use lemmas::{lemma_verdict, verify_lemma1, verify_lemma2, LemmaInstance, LemmaPoint, LemmaVerdict, VerdictStatus};
pub use stats::{p_value, pearson_r};
pub use synthetic::{SuiteSpec, SyntheticTaskSuite};

use crate::error::{Error, Result};
use crate::labelstats::{mpa_hits, PairedLabelDataset};
use crate::tinynet::zero_one_errors;
use crate::transfer::{derive_seed, random_head, train_source, train_target_head, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task: usize,
    pub alpha: f64,
    pub mpa: f64,
    pub mpa_hits: usize,
    pub n_train: usize,
    pub heldout_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub seed: u64,
    /// Which pairs MPA was computed on.
    pub mpa_pairs: String,
    pub source_train_error: f64,
    pub tasks: Vec<TaskResult>,
    pub r: f64,
    pub p_value: f64,
    pub train: TrainConfig,
}

/// MPA of one task on its training pairs.
pub fn task_pairs(suite: &SyntheticTaskSuite, task: usize) -> Result<PairedLabelDataset> {
    PairedLabelDataset::from_labels(
        &suite.train_sources,
        &suite.tasks[task].train_labels,
        suite.spec.num_source,
        suite.spec.num_target,
    )
}

pub fn run_correlation_experiment(suite: &SyntheticTaskSuite, cfg: &TrainConfig) -> Result<CorrelationResult> {
    if suite.tasks.len() < 3 {
        return Err(Error::InvalidParameter("suite needs at least 3 target tasks".into()));
    }
    let arch = suite.spec.architecture();
    let (source, _) = train_source(&suite.train_inputs, &suite.train_sources, &arch, cfg)?;
    let source_train_error = zero_one_errors(&source.forward_batch(&suite.train_inputs)?, &suite.train_sources)?.rate();

    let tasks = (0..suite.tasks.len())
        .into_par_iter()
        .map(|i| {
            run_task(suite, &source, &arch, cfg, i).map_err(|e| Error::Task {
                task: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mpa: Vec<f64> = tasks.iter().map(|t| t.mpa).collect();
    let acc: Vec<f64> = tasks.iter().map(|t| t.heldout_accuracy).collect();
    let r = pearson_r(&mpa, &acc)?;
    Ok(CorrelationResult {
        seed: suite.seed,
        mpa_pairs: "train".into(),
        source_train_error,
        p_value: p_value(r, tasks.len())?,
        r,
        tasks,
        train: cfg.clone(),
    })
}

fn run_task(
    suite: &SyntheticTaskSuite,
    source: &crate::tinynet::Network,
    arch: &crate::transfer::Architecture,
    cfg: &TrainConfig,
    i: usize,
) -> Result<TaskResult> {
    let task = &suite.tasks[i];
    let pairs = task_pairs(suite, i)?;
    let hits = mpa_hits(&pairs);
    let head_seed = derive_seed(cfg.seed, 0x4EAD_0000 + i as u64);
    let head = random_head(arch, suite.spec.num_target, head_seed)?;
    let target = train_target_head(
        source,
        &suite.train_inputs,
        &task.train_labels,
        head,
        &cfg.with_seed(derive_seed(head_seed, 1)),
    )?;
    let heldout = zero_one_errors(&target.forward_batch(&suite.heldout_inputs)?, &task.heldout_labels)?;
    Ok(TaskResult {
        task: i,
        alpha: task.alpha,
        mpa: hits as f64 / pairs.len() as f64,
        mpa_hits: hits,
        n_train: pairs.len(),
        heldout_accuracy: 1.0 - heldout.rate(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub spec: SuiteSpec,
    pub runs: Vec<CorrelationResult>,
    pub median_r: f64,
    pub median_p_value: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs the correlation experiment for every listed suite seed.
pub fn run_suite(spec: &SuiteSpec) -> Result<SuiteResult> {
    spec.validate()?;
    if spec.seeds.is_empty() {
        return Err(Error::InvalidParameter("suite has no seeds".into()));
    }
    let runs = spec
        .seeds
        .par_iter()
        .map(|&seed| {
            let suite = SyntheticTaskSuite::generate(spec, seed)?;
            run_correlation_experiment(&suite, &spec.train.with_seed(derive_seed(spec.train.seed, seed)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteResult {
        spec: spec.clone(),
        median_r: median(runs.iter().map(|r| r.r).collect()),
        median_p_value: median(runs.iter().map(|r| r.p_value).collect()),
        runs,
    })
}
