//! Line-delimited JSON dataset files: one record per example with the fields
//! `task_id`, `idx`, `group`, `features`, `soft_label`, `concepts`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Example};
use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub task_id: String,
    pub idx: usize,
    pub group: u64,
    pub features: Vec<f64>,
    pub soft_label: Vec<f64>,
    pub concepts: Vec<u8>,
}

pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for (idx, ex) in dataset.examples.iter().enumerate() {
        let record = DatasetRecord {
            task_id: dataset.task_id.clone(),
            idx,
            group: ex.group_id,
            features: ex.features.clone(),
            soft_label: ex.soft_label.clone(),
            concepts: dataset
                .concept_labels
                .as_ref()
                .map(|rows| rows[idx].clone())
                .unwrap_or_default(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a dataset file. Concept names are not stored on disk, so columns
/// come back as `concept_0`, `concept_1`, ...
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let reader = BufReader::new(File::open(path)?);
    let mut task_id = None;
    let mut examples = Vec::new();
    let mut concepts = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |reason: String| LabError::Parse {
            what: "dataset record",
            path: path.to_path_buf(),
            line: line_no + 1,
            reason,
        };
        let rec: DatasetRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if rec.idx != examples.len() {
            return Err(parse_err(format!("expected idx {}, found {}", examples.len(), rec.idx)));
        }
        task_id.get_or_insert_with(|| rec.task_id.clone());
        examples.push(Example::new(rec.features, rec.soft_label, rec.group).map_err(|e| parse_err(e.to_string()))?);
        concepts.push(rec.concepts);
    }
    let task_id = task_id.ok_or_else(|| LabError::InvalidArgument(format!("{} holds no records", path.display())))?;
    let ds = Dataset::new(task_id, examples)?;
    let width = concepts.first().map_or(0, Vec::len);
    if width == 0 {
        return Ok(ds);
    }
    let names = (0..width).map(|i| format!("concept_{i}")).collect();
    ds.with_concepts(names, concepts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskgen::{gen_task, Family, TaskSpec};

    #[test]
    fn round_trip_is_exact() {
        let ds = gen_task(&TaskSpec::new(Family::NestedSpheres).with_size(64), 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&ds, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.examples.len(), ds.examples.len());
        for (a, b) in back.examples.iter().zip(&ds.examples) {
            assert_eq!(a.features, b.features);
            assert_eq!(a.soft_label, b.soft_label);
            assert_eq!(a.group_id, b.group_id);
        }
        assert_eq!(back.concept_labels, ds.concept_labels);
        let first = std::fs::read_to_string(&path).unwrap();
        let first_line = first.lines().next().unwrap();
        for field in ["\"task_id\"", "\"idx\"", "\"group\"", "\"features\"", "\"soft_label\"", "\"concepts\""] {
            assert!(first_line.contains(field), "missing {field}");
        }
    }
}
