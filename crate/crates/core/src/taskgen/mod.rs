//! Task generation: parameterized synthetic classification families, the
//! tic-tac-toe best-move task and grouped (leakage-free) splitting.
//!
//! Every generator is a pure function of its spec and seed.

mod bestmove;
mod io;
mod split;
mod synthetic;

use std::cell::Cell;

pub use bestmove::{
    encode_position, gen_bestmove_task, gen_game_records, legal_nonterminal_positions, solve_position, Board, Cell as BoardCell,
    BESTMOVE_FEATURES, BESTMOVE_TASK_ID,
};
pub use io::{read_dataset, write_dataset, DatasetRecord};
pub use split::grouped_split;
pub use synthetic::{gen_synthetic_suite, gen_task, Family, TaskSpec};

use crate::error::{LabError, Result};

thread_local! {
    static LABEL_READS: Cell<u64> = const { Cell::new(0) };
}

/// Number of ground-truth label reads performed on the current thread.
///
/// Student training paths must never move this counter; tests snapshot it
/// before and after a run.
pub fn label_reads() -> u64 {
    LABEL_READS.with(Cell::get)
}

fn record_label_read() {
    LABEL_READS.with(|c| c.set(c.get() + 1));
}

/// One unit of supervision.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    soft_label: Vec<f64>,
    pub group_id: u64,
    pub meta: Option<String>,
}

impl Example {
    pub fn new(features: Vec<f64>, soft_label: Vec<f64>, group_id: u64) -> Result<Self> {
        if features.iter().any(|v| !v.is_finite()) {
            return Err(LabError::InvalidArgument("non-finite feature".into()));
        }
        check_distribution(&soft_label)?;
        Ok(Self {
            features,
            soft_label,
            group_id,
            meta: None,
        })
    }

    pub fn with_meta(mut self, meta: impl Into<String>) -> Self {
        self.meta = Some(meta.into());
        self
    }

    /// Ground-truth soft label. Every call is counted by the supervision audit.
    pub fn soft_label(&self) -> &[f64] {
        record_label_read();
        &self.soft_label
    }

    /// Ground-truth class (argmax of the soft label, lowest index on ties).
    pub fn truth(&self) -> usize {
        argmax(self.soft_label())
    }

    pub fn n_classes(&self) -> usize {
        self.soft_label.len()
    }
}

/// A named collection of examples sharing dimension and class count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub task_id: String,
    pub examples: Vec<Example>,
    /// Names of the auxiliary binary concepts, in column order.
    pub concept_names: Vec<String>,
    /// One row of 0/1 flags per example, aligned with `concept_names`.
    pub concept_labels: Option<Vec<Vec<u8>>>,
}

impl Dataset {
    pub fn new(task_id: impl Into<String>, examples: Vec<Example>) -> Result<Self> {
        let ds = Self {
            task_id: task_id.into(),
            examples,
            concept_names: Vec::new(),
            concept_labels: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_concepts(mut self, names: Vec<String>, labels: Vec<Vec<u8>>) -> Result<Self> {
        if labels.len() != self.examples.len() {
            return Err(LabError::LengthMismatch {
                left: labels.len(),
                right: self.examples.len(),
            });
        }
        if labels.iter().any(|row| row.len() != names.len() || row.iter().any(|&v| v > 1)) {
            return Err(LabError::InvalidArgument("concept rows must be 0/1 flags, one per concept".into()));
        }
        self.concept_names = names;
        self.concept_labels = Some(labels);
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let first = self
            .examples
            .first()
            .ok_or_else(|| LabError::InvalidArgument(format!("dataset {} is empty", self.task_id)))?;
        let (d, c) = (first.features.len(), first.soft_label.len());
        for ex in &self.examples {
            if ex.features.len() != d {
                return Err(LabError::DimensionMismatch {
                    expected: d,
                    got: ex.features.len(),
                });
            }
            if ex.soft_label.len() != c {
                return Err(LabError::DimensionMismatch {
                    expected: c,
                    got: ex.soft_label.len(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.examples[0].features.len()
    }

    pub fn n_classes(&self) -> usize {
        self.examples[0].soft_label.len()
    }

    /// Feature vectors only. Reading them never touches labels.
    pub fn features(&self) -> Vec<Vec<f64>> {
        self.examples.iter().map(|e| e.features.clone()).collect()
    }

    /// Ground-truth soft labels (audited).
    pub fn soft_labels(&self) -> Vec<Vec<f64>> {
        self.examples.iter().map(|e| e.soft_label().to_vec()).collect()
    }

    /// Ground-truth classes (audited).
    pub fn truths(&self) -> Vec<usize> {
        self.examples.iter().map(Example::truth).collect()
    }

    pub fn group_ids(&self) -> std::collections::BTreeSet<u64> {
        self.examples.iter().map(|e| e.group_id).collect()
    }

    /// Column `idx` of the concept table.
    pub fn concept(&self, idx: usize) -> Result<Vec<u8>> {
        let rows = self
            .concept_labels
            .as_ref()
            .ok_or_else(|| LabError::InvalidArgument(format!("dataset {} has no concept labels", self.task_id)))?;
        if idx >= self.concept_names.len() {
            return Err(LabError::InvalidArgument(format!(
                "concept index {idx} out of range ({} concepts)",
                self.concept_names.len()
            )));
        }
        Ok(rows.iter().map(|r| r[idx]).collect())
    }

    /// Per-feature mean over the dataset.
    pub fn feature_means(&self) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d];
        for ex in &self.examples {
            for (acc, v) in m.iter_mut().zip(&ex.features) {
                *acc += v;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Sub-dataset holding the given example indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let examples = indices.iter().map(|&i| self.examples[i].clone()).collect();
        let mut ds = Dataset::new(self.task_id.clone(), examples)?;
        if let Some(rows) = &self.concept_labels {
            ds.concept_names = self.concept_names.clone();
            ds.concept_labels = Some(indices.iter().map(|&i| rows[i].clone()).collect());
        }
        Ok(ds)
    }
}

/// Two disjoint halves of a dataset with no shared group.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub d1: Dataset,
    pub d2: Dataset,
}

pub(crate) fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(LabError::InvalidArgument("empty distribution".into()));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
        return Err(LabError::InvalidArgument(format!("distribution entries outside [0,1]: {p:?}")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(LabError::InvalidArgument(format!("distribution sums to {s}")));
    }
    Ok(())
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
