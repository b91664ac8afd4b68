//! Experiment orchestration: sweep configuration, the resumable scaling
//! sweep over (task, capacities, method, seed), record persistence and
//! report emission.

mod config;
mod report;
mod svg;
mod sweep;

pub use config::{SweepConfig, TaskOverrides};
pub use report::{
    ablation_methods, agreement_declines, largest_gap, report, scaling_rows, significance_rows, ReportKind, ScalingRow,
    SignificanceRow, SIGNIFICANCE_METHODS,
};
pub use svg::{bar_chart, line_chart};
pub use sweep::{
    accuracy, build_task, evaluation_split, load_records, pretrained_strong, pretraining_pool, report_from_records, run_sweep,
    strong_ceiling, strong_init, student_train_config, weak_train_config, write_metrics_csv, CellFailure, RunReport,
    SweepOutcome, CONFIG_FILE, FAILURES_FILE, METRICS_FILE, RECORDS_FILE,
};

use serde::{Deserialize, Serialize};

/// Position of a model relative to the human reference accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelClass {
    Weak,
    Strong,
    AtHuman,
}

/// Strictly below the reference is weak, strictly above is strong.
pub fn classify_model(score: f64, s_h: f64) -> ModelClass {
    if score < s_h {
        ModelClass::Weak
    } else if score > s_h {
        ModelClass::Strong
    } else {
        ModelClass::AtHuman
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_boundaries() {
        assert_eq!(classify_model(0.4, 0.7), ModelClass::Weak);
        assert_eq!(classify_model(0.9, 0.7), ModelClass::Strong);
        assert_eq!(classify_model(0.7, 0.7), ModelClass::AtHuman);
    }
}
