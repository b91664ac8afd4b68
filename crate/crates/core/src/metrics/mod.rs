//! Performance gap recovered, student-supervisor agreement, paired tests,
//! concept saliency, the error taxonomy and ablation tables.

mod ablation;
mod errors;
mod stats;

pub use ablation::{ablation_table, median, AblationRow, RunRecord, ABLATION_COMPONENTS, FULL_METHOD};
pub use errors::{categorize, categorize_errors, ErrorCase, ErrorCategory, ErrorHistogram};
pub use stats::{paired_t_test, sign_test, student_t_two_sided_p, SignTest, TTest};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::modelkit::{fit_linear_probe, Model};
use crate::taskgen::Dataset;

/// Test accuracies of the weak supervisor, the student and the strong ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreTriple {
    pub p_weak: f64,
    pub p_ws: f64,
    pub p_strong: f64,
}

impl ScoreTriple {
    pub fn new(p_weak: f64, p_ws: f64, p_strong: f64) -> Self {
        Self { p_weak, p_ws, p_strong }
    }
}

/// `(p_ws - p_weak) / (p_strong - p_weak)`, never clamped.
pub fn pgr(t: ScoreTriple) -> Result<f64> {
    if ![t.p_weak, t.p_ws, t.p_strong].iter().all(|v| v.is_finite()) {
        return Err(LabError::InvalidArgument(format!("non-finite score in {t:?}")));
    }
    let gap = t.p_strong - t.p_weak;
    if gap == 0.0 {
        return Err(LabError::UndefinedPgr(t.p_weak));
    }
    Ok((t.p_ws - t.p_weak) / gap)
}

/// True when a PGR value falls outside the unit interval; such runs are
/// flagged in reports rather than clamped.
pub fn pgr_out_of_range(value: f64) -> bool {
    !(0.0..=1.0).contains(&value)
}

/// Fraction of positions where the two prediction sequences match.
pub fn agreement(student_preds: &[usize], supervisor_preds: &[usize]) -> Result<f64> {
    if student_preds.len() != supervisor_preds.len() {
        return Err(LabError::LengthMismatch {
            left: student_preds.len(),
            right: supervisor_preds.len(),
        });
    }
    if student_preds.is_empty() {
        return Err(LabError::InvalidArgument("agreement of empty sequences".into()));
    }
    let same = student_preds.iter().zip(supervisor_preds).filter(|(a, b)| a == b).count();
    Ok(same as f64 / student_preds.len() as f64)
}

/// Linear-probe accuracy for concept `concept_idx` on the final trunk
/// activations of two models, fitted on identical splits.
pub fn saliency_delta(
    model_before: &Model,
    model_after: &Model,
    data: &Dataset,
    concept_idx: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if model_before.config.widths() != model_after.config.widths() {
        return Err(LabError::InvalidArgument("saliency models differ in architecture".into()));
    }
    Ok((
        concept_probe(model_before, data, concept_idx, seed)?,
        concept_probe(model_after, data, concept_idx, seed)?,
    ))
}

/// Linear-probe accuracy for one concept on a model's final trunk activations.
pub fn concept_probe(model: &Model, data: &Dataset, concept_idx: usize, seed: u64) -> Result<f64> {
    let concept = data.concept(concept_idx)?;
    let acts = data
        .examples
        .iter()
        .map(|e| model.extract_activations(&e.features))
        .collect::<Result<Vec<_>>>()?;
    fit_linear_probe(&acts, &concept, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgr_midpoint_and_endpoints() {
        assert!((pgr(ScoreTriple::new(0.6, 0.75, 0.9)).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(pgr(ScoreTriple::new(0.6, 0.6, 0.9)).unwrap(), 0.0);
        assert_eq!(pgr(ScoreTriple::new(0.6, 0.9, 0.9)).unwrap(), 1.0);
    }

    #[test]
    fn pgr_undefined_when_gap_is_zero() {
        assert!(matches!(pgr(ScoreTriple::new(0.7, 0.8, 0.7)), Err(LabError::UndefinedPgr(_))));
    }

    #[test]
    fn pgr_is_not_clamped() {
        let v = pgr(ScoreTriple::new(0.6, 0.5, 0.8)).unwrap();
        assert!((v + 0.5).abs() < 1e-12);
        assert!(pgr_out_of_range(v));
    }

    #[test]
    fn agreement_basics() {
        assert_eq!(agreement(&[0, 1, 1], &[0, 1, 1]).unwrap(), 1.0);
        assert_eq!(agreement(&[0, 1, 0], &[1, 0, 1]).unwrap(), 0.0);
        assert!(agreement(&[0], &[0, 1]).is_err());
        assert!(agreement(&[], &[]).is_err());
    }
}
