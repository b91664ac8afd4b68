use std::fmt;

use serde::{Deserialize, Serialize};

/// Prediction-pattern analogs of the qualitative failure modes.
///
/// - `OverfitWeakErrors`: the student copied a wrong weak label.
/// - `EvidenceExtraction`: the supervisor was right and the student still erred.
/// - `SelectionOther`: both wrong, in different ways.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    OverfitWeakErrors,
    EvidenceExtraction,
    SelectionOther,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 3] = [
        ErrorCategory::OverfitWeakErrors,
        ErrorCategory::EvidenceExtraction,
        ErrorCategory::SelectionOther,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorCategory::OverfitWeakErrors => "overfit_weak_errors",
            ErrorCategory::EvidenceExtraction => "evidence_extraction",
            ErrorCategory::SelectionOther => "selection_other",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One evaluated query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCase {
    pub query_idx: usize,
    pub student_pred: usize,
    pub weak_pred: usize,
    pub truth: usize,
}

/// Category of one row, `None` when the student is correct.
pub fn categorize(row: &ErrorCase) -> Option<ErrorCategory> {
    if row.student_pred == row.truth {
        None
    } else if row.weak_pred == row.truth {
        Some(ErrorCategory::EvidenceExtraction)
    } else if row.student_pred == row.weak_pred {
        Some(ErrorCategory::OverfitWeakErrors)
    } else {
        Some(ErrorCategory::SelectionOther)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    pub overfit_weak_errors: usize,
    pub evidence_extraction: usize,
    pub selection_other: usize,
}

impl ErrorHistogram {
    pub fn get(&self, c: ErrorCategory) -> usize {
        match c {
            ErrorCategory::OverfitWeakErrors => self.overfit_weak_errors,
            ErrorCategory::EvidenceExtraction => self.evidence_extraction,
            ErrorCategory::SelectionOther => self.selection_other,
        }
    }

    fn bump(&mut self, c: ErrorCategory) {
        match c {
            ErrorCategory::OverfitWeakErrors => self.overfit_weak_errors += 1,
            ErrorCategory::EvidenceExtraction => self.evidence_extraction += 1,
            ErrorCategory::SelectionOther => self.selection_other += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.overfit_weak_errors + self.evidence_extraction + self.selection_other
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }
}

pub fn categorize_errors(records: &[ErrorCase]) -> ErrorHistogram {
    let mut h = ErrorHistogram::default();
    for c in records.iter().filter_map(categorize) {
        h.bump(c);
    }
    h
}
