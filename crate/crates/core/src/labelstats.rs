//! Empirical label statistics and the majority predictor accuracy (MPA).
//!
//! Given aligned `(source label, target label)` pairs, the majority predictor
//! maps every source label to the target label it co-occurs with most often.
//! MPA is the fraction of pairs on which that map is right. All counting is
//! done in integers; argmax comparisons never touch floating point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tinynet::{predict_from_scores, Matrix, Network};

/// Aligned `(s_i, t_i)` pairs with dense 0-based labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedLabelDataset {
    num_source: usize,
    num_target: usize,
    pairs: Vec<(usize, usize)>,
}

impl PairedLabelDataset {
    pub fn new(pairs: Vec<(usize, usize)>, num_source: usize, num_target: usize) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (row, &(s, t)) in pairs.iter().enumerate() {
            if s >= num_source {
                return Err(Error::LabelOutOfRange {
                    role: "source",
                    row,
                    label: s,
                    bound: num_source,
                });
            }
            if t >= num_target {
                return Err(Error::LabelOutOfRange {
                    role: "target",
                    row,
                    label: t,
                    bound: num_target,
                });
            }
        }
        Ok(PairedLabelDataset {
            num_source,
            num_target,
            pairs,
        })
    }

    /// Infers `m_S` and `m_T` as one past the largest observed label.
    pub fn from_pairs(pairs: Vec<(usize, usize)>) -> Result<Self> {
        let m_s = pairs.iter().map(|p| p.0 + 1).max().unwrap_or(0);
        let m_t = pairs.iter().map(|p| p.1 + 1).max().unwrap_or(0);
        Self::new(pairs, m_s, m_t)
    }

    pub fn from_labels(source: &[usize], target: &[usize], num_source: usize, num_target: usize) -> Result<Self> {
        if source.len() != target.len() {
            return Err(Error::LengthMismatch {
                inputs: source.len(),
                labels: target.len(),
            });
        }
        let pairs = source.iter().copied().zip(target.iter().copied()).collect();
        Self::new(pairs, num_source, num_target)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn num_source(&self) -> usize {
        self.num_source
    }

    pub fn num_target(&self) -> usize {
        self.num_target
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn source_labels(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    pub fn target_labels(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.1).collect()
    }
}

/// Joint count table, `m_S × m_T`, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalJoint {
    num_source: usize,
    num_target: usize,
    counts: Vec<u64>,
    n: u64,
}

impl EmpiricalJoint {
    /// Builds a joint directly from a count table (rows are source labels).
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let num_source = counts.len();
        let num_target = counts.first().map_or(0, Vec::len);
        if num_source == 0 || num_target == 0 {
            return Err(Error::EmptyDataset);
        }
        if let Some(row) = counts.iter().find(|r| r.len() != num_target) {
            return Err(Error::ShapeMismatch {
                context: "count table row",
                expected: num_target,
                found: row.len(),
            });
        }
        let flat: Vec<u64> = counts.into_iter().flatten().collect();
        let n = flat.iter().sum();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(EmpiricalJoint {
            num_source,
            num_target,
            counts: flat,
            n,
        })
    }

    pub fn num_source(&self) -> usize {
        self.num_source
    }

    pub fn num_target(&self) -> usize {
        self.num_target
    }

    pub fn total(&self) -> u64 {
        self.n
    }

    pub fn count(&self, s: usize, t: usize) -> u64 {
        self.counts[s * self.num_target + t]
    }

    pub fn row(&self, s: usize) -> &[u64] {
        &self.counts[s * self.num_target..(s + 1) * self.num_target]
    }

    pub fn row_total(&self, s: usize) -> u64 {
        self.row(s).iter().sum()
    }

    pub fn target_totals(&self) -> Vec<u64> {
        (0..self.num_target)
            .map(|t| (0..self.num_source).map(|s| self.count(s, t)).sum())
            .collect()
    }

    pub fn counts(&self) -> Vec<Vec<u64>> {
        (0..self.num_source).map(|s| self.row(s).to_vec()).collect()
    }

    pub fn joint_prob(&self, s: usize, t: usize) -> f64 {
        self.count(s, t) as f64 / self.n as f64
    }

    pub fn source_marginal(&self, s: usize) -> f64 {
        self.row_total(s) as f64 / self.n as f64
    }

    /// `P̂(t|s)`, undefined when source label `s` was never observed.
    pub fn conditional(&self, t: usize, s: usize) -> Option<f64> {
        let row = self.row_total(s);
        (row > 0).then(|| self.count(s, t) as f64 / row as f64)
    }
}

fn argmax_count(row: &[u64]) -> usize {
    let mut best = 0;
    for (i, &c) in row.iter().enumerate().skip(1) {
        if c > row[best] {
            best = i;
        }
    }
    best
}

pub fn empirical_joint(data: &PairedLabelDataset) -> EmpiricalJoint {
    let mut counts = vec![0u64; data.num_source * data.num_target];
    for &(s, t) in &data.pairs {
        counts[s * data.num_target + t] += 1;
    }
    EmpiricalJoint {
        num_source: data.num_source,
        num_target: data.num_target,
        counts,
        n: data.pairs.len() as u64,
    }
}

/// Source label → target label, lowest target index on ties.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MajorityPredictor {
    mapping: Vec<usize>,
    num_target: usize,
}

impl MajorityPredictor {
    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn num_target(&self) -> usize {
        self.num_target
    }

    pub fn predict(&self, source_label: usize) -> usize {
        self.mapping[source_label]
    }
}

/// Rows with no observations fall back to the globally most frequent target label.
pub fn fit_majority_predictor(joint: &EmpiricalJoint) -> MajorityPredictor {
    let fallback = argmax_count(&joint.target_totals());
    let mapping = (0..joint.num_source)
        .map(|s| {
            if joint.row_total(s) == 0 {
                fallback
            } else {
                argmax_count(joint.row(s))
            }
        })
        .collect();
    MajorityPredictor {
        mapping,
        num_target: joint.num_target,
    }
}

/// Number of pairs with `t_i = f_mp(s_i)`, the numerator of MPA over `data.len()`.
pub fn mpa_hits(data: &PairedLabelDataset) -> usize {
    let f = fit_majority_predictor(&empirical_joint(data));
    data.pairs.iter().filter(|&&(s, t)| f.predict(s) == t).count()
}

pub fn compute_mpa(data: &PairedLabelDataset) -> f64 {
    mpa_hits(data) as f64 / data.len() as f64
}

/// Labels the target inputs with the source model's predictions, giving the
/// dummy-source pairs `(argmax h*(w*(z_i)), t_i)`.
pub fn make_dummy_source(
    model: &Network,
    target_inputs: &Matrix,
    target_labels: &[usize],
    num_target: usize,
) -> Result<PairedLabelDataset> {
    if target_inputs.nrows() != target_labels.len() {
        return Err(Error::LengthMismatch {
            inputs: target_inputs.nrows(),
            labels: target_labels.len(),
        });
    }
    let dummy = predict_from_scores(&model.forward_batch(target_inputs)?);
    PairedLabelDataset::from_labels(&dummy, target_labels, model.output_dim(), num_target)
}
