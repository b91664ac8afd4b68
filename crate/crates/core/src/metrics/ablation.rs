use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ErrorHistogram;
use crate::error::{LabError, Result};

/// One (task, method, weak capacity, strong capacity, seed) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task: String,
    pub method: String,
    pub weak_cap: usize,
    pub strong_cap: usize,
    pub seed: u64,
    pub acc_weak: f64,
    pub acc_ws: f64,
    pub acc_strong: f64,
    /// `None` when the strong ceiling equals the weak accuracy.
    pub pgr: Option<f64>,
    pub agreement: f64,
    /// Probe accuracy on the designated concept: random init, start of
    /// student training, end of student training. `None` for linear students
    /// or concept-free tasks.
    pub probe_init: Option<f64>,
    pub probe_start: Option<f64>,
    pub probe_after: Option<f64>,
    pub errors: ErrorHistogram,
    pub wall_time_s: f64,
    pub config_hash: String,
}

pub const FULL_METHOD: &str = "full";

/// Removed component and the leave-one-out method that lacks it.
pub const ABLATION_COMPONENTS: [(&str, &str); 3] = [
    ("aux_confidence", "full-no-confidence"),
    ("bootstrapping", "full-no-bootstrap"),
    ("generative_finetuning", "full-no-genft"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// `none` for the full method.
    pub removed: String,
    pub method: String,
    pub n: usize,
    pub median_accuracy: f64,
    /// Median over records whose PGR is defined.
    pub median_pgr: Option<f64>,
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// The full method followed by one leave-one-out row per component.
pub fn ablation_table(records: &[RunRecord]) -> Result<Vec<AblationRow>> {
    let mut by_method: BTreeMap<&str, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        by_method.entry(r.method.as_str()).or_default().push(r);
    }
    let rows = std::iter::once(("none", FULL_METHOD)).chain(ABLATION_COMPONENTS);
    rows.map(|(removed, method)| {
        let rs = by_method
            .get(method)
            .ok_or_else(|| LabError::MissingConfiguration(format!("no records for method `{method}`")))?;
        let acc: Vec<f64> = rs.iter().map(|r| r.acc_ws).collect();
        let pgrs: Vec<f64> = rs.iter().filter_map(|r| r.pgr).collect();
        Ok(AblationRow {
            removed: removed.to_string(),
            method: method.to_string(),
            n: rs.len(),
            median_accuracy: median(&acc).expect("non-empty group"),
            median_pgr: median(&pgrs),
        })
    })
    .collect()
}
