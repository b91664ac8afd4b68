use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::modelkit::Model;
use crate::taskgen::{check_distribution, Dataset};

/// Supervisor predictions over the d2 half, one distribution per example.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakLabelSet {
    pub labels: Vec<Vec<f64>>,
    pub supervisor_capacity: usize,
    pub source_task: String,
}

impl WeakLabelSet {
    pub fn new(labels: Vec<Vec<f64>>, supervisor_capacity: usize, source_task: impl Into<String>) -> Result<Self> {
        for l in &labels {
            check_distribution(l)?;
        }
        Ok(Self {
            labels,
            supervisor_capacity,
            source_task: source_task.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn hard(&self) -> Vec<usize> {
        self.labels.iter().map(|l| crate::taskgen::argmax(l)).collect()
    }

    pub(crate) fn check_against(&self, d2: &Dataset) -> Result<()> {
        if self.labels.len() != d2.len() {
            return Err(LabError::LengthMismatch {
                left: self.labels.len(),
                right: d2.len(),
            });
        }
        Ok(())
    }
}

/// Runs the supervisor over every d2 input.
pub fn generate_weak_labels(supervisor: &Model, d2: &Dataset) -> Result<WeakLabelSet> {
    let labels = d2
        .examples
        .iter()
        .map(|e| supervisor.forward(&e.features))
        .collect::<Result<Vec<_>>>()?;
    WeakLabelSet::new(labels, supervisor.capacity(), d2.task_id.clone())
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRecord {
    idx: usize,
    label: Vec<f64>,
    supervisor_capacity: usize,
}

pub fn write_weak_labels(set: &WeakLabelSet, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for (idx, label) in set.labels.iter().enumerate() {
        let rec = LabelRecord {
            idx,
            label: label.clone(),
            supervisor_capacity: set.supervisor_capacity,
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_weak_labels(path: &Path, source_task: &str) -> Result<WeakLabelSet> {
    let mut labels = Vec::new();
    let mut capacity = None;
    for (line_no, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| LabError::Parse {
            what: "weak label record",
            path: path.to_path_buf(),
            line: line_no + 1,
            reason,
        };
        let rec: LabelRecord = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        if rec.idx != labels.len() {
            return Err(err(format!("expected idx {}, found {}", labels.len(), rec.idx)));
        }
        if *capacity.get_or_insert(rec.supervisor_capacity) != rec.supervisor_capacity {
            return Err(err("mixed supervisor capacities".into()));
        }
        check_distribution(&rec.label).map_err(|e| err(e.to_string()))?;
        labels.push(rec.label);
    }
    let capacity = capacity.ok_or_else(|| LabError::InvalidArgument(format!("{} holds no labels", path.display())))?;
    WeakLabelSet::new(labels, capacity, source_task)
}
