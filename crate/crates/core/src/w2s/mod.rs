//! The weak-to-strong pipeline: supervisors trained on ground truth, weak
//! labels over the held-out half, and the student regimes (plain
//! weak-label training, auxiliary confidence, bootstrapping through
//! intermediate capacities and generative finetuning).
//!
//! Student regimes only ever see d2 features and weak labels; the
//! ground-truth audit counter in [`crate::taskgen`] must not move while they
//! run.

mod bootstrap;
mod confidence;
mod generative;
mod labels;
mod recipe;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bootstrap::{train_student_bootstrap, BootstrapTrace, StageRecord};
pub use confidence::{
    alpha_at, alpha_with_warmup, confidence_loss, default_alpha_max, threshold_self, thresholded_class,
    ConfidenceObjective, DEFAULT_WARMUP_FRACTION,
};
pub use generative::{denoise, generative_finetune, DenoiseReport};
pub use recipe::{train_student, Recipe};
pub use labels::{generate_weak_labels, read_weak_labels, write_weak_labels, WeakLabelSet};

use crate::error::{LabError, Result};
use crate::modelkit::{
    init_model, train, CrossEntropy, EarlyStopMetric, LabeledData, Model, ModelConfig, TrainConfig, TrainResult,
};
use crate::rng::derive_seed;
use crate::taskgen::{grouped_split, Dataset, SplitPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Baseline,
    AuxConfidence,
    Bootstrap,
    GenerativeFinetune,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Baseline,
        Method::AuxConfidence,
        Method::Bootstrap,
        Method::GenerativeFinetune,
    ];

    /// Short CLI name.
    pub fn cli_name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::AuxConfidence => "confidence",
            Method::Bootstrap => "bootstrap",
            Method::GenerativeFinetune => "genft",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for Method {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Method::Baseline),
            "confidence" | "aux_confidence" => Ok(Method::AuxConfidence),
            "bootstrap" => Ok(Method::Bootstrap),
            "genft" | "generative_finetune" => Ok(Method::GenerativeFinetune),
            other => Err(LabError::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

/// Hyperparameters shared by the student regimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: Method,
    pub alpha_max: f64,
    pub warmup_fraction: f64,
    pub bootstrap_rounds: usize,
    /// Capacities visited by bootstrapping, ending at the student's.
    pub chain: Vec<usize>,
    pub lr_decay_per_stage: f64,
    pub gen_lr: f64,
    pub gen_batch: usize,
    pub gen_epochs: usize,
    pub mask_fraction: f64,
}

impl MethodConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            alpha_max: 0.5,
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
            bootstrap_rounds: 3,
            chain: Vec::new(),
            lr_decay_per_stage: 10.0,
            gen_lr: 5e-5,
            gen_batch: 16,
            gen_epochs: 1,
            mask_fraction: 0.25,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha_max) {
            return Err(LabError::InvalidArgument(format!("alpha_max {} outside [0,1]", self.alpha_max)));
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err(LabError::InvalidArgument(format!(
                "warmup_fraction {} outside [0,1]",
                self.warmup_fraction
            )));
        }
        if self.chain.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LabError::InvalidArgument(format!("bootstrap chain {:?} is not strictly increasing", self.chain)));
        }
        if self.lr_decay_per_stage <= 1.0 {
            return Err(LabError::InvalidArgument(format!(
                "lr_decay_per_stage {} must exceed 1",
                self.lr_decay_per_stage
            )));
        }
        if self.bootstrap_rounds == 0 || self.gen_batch == 0 {
            return Err(LabError::InvalidArgument("bootstrap_rounds and gen_batch must be >= 1".into()));
        }
        if !(self.mask_fraction > 0.0 && self.mask_fraction <= 1.0) {
            return Err(LabError::InvalidArgument(format!("mask_fraction {} outside (0,1]", self.mask_fraction)));
        }
        Ok(())
    }
}

/// Ground-truth targets of a dataset (audited reads).
pub fn ground_truth_data(dataset: &Dataset) -> Result<LabeledData> {
    LabeledData::new(dataset.features(), dataset.soft_labels())
}

/// Trains `model` on the ground truth of `dataset`.
pub fn train_on_ground_truth(model: &Model, dataset: &Dataset, train_cfg: &TrainConfig) -> Result<TrainResult> {
    train(model, &ground_truth_data(dataset)?, train_cfg, &CrossEntropy)
}

/// Splits `dataset` into d1/d2 by group and trains a supervisor on d1.
pub fn make_weak_supervisor(dataset: &Dataset, weak_cfg: ModelConfig, train_cfg: &TrainConfig) -> Result<(Model, SplitPair)> {
    let split = grouped_split(dataset, 0.5, derive_seed(train_cfg.seed, "d1d2"))?;
    let cfg = train_cfg.clone().with_metric(EarlyStopMetric::ValidationAccuracy);
    let result = train_on_ground_truth(&init_model(weak_cfg)?, &split.d1, &cfg)?;
    Ok((result.model, split))
}

fn weak_data(weak: &WeakLabelSet, d2: &Dataset) -> Result<LabeledData> {
    weak.check_against(d2)?;
    LabeledData::new(d2.features(), weak.labels.clone())
}

fn require_weak_agreement(train_cfg: &TrainConfig) -> Result<()> {
    if train_cfg.early_stop_metric != EarlyStopMetric::WeakAgreement {
        return Err(LabError::InvalidArgument(
            "student training must early-stop on weak_agreement".into(),
        ));
    }
    Ok(())
}

/// Cross-entropy against soft weak labels, starting from `student`.
pub fn train_student_baseline(
    student: &Model,
    weak: &WeakLabelSet,
    d2: &Dataset,
    train_cfg: &TrainConfig,
) -> Result<TrainResult> {
    require_weak_agreement(train_cfg)?;
    train(student, &weak_data(weak, d2)?, train_cfg, &CrossEntropy)
}

/// Weak labels mixed with the student's own hardened predictions.
pub fn train_student_confidence(
    student: &Model,
    weak: &WeakLabelSet,
    d2: &Dataset,
    cfg: &MethodConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainResult> {
    require_weak_agreement(train_cfg)?;
    cfg.validate()?;
    let objective = ConfidenceObjective {
        alpha_max: cfg.alpha_max,
        warmup_fraction: cfg.warmup_fraction,
    };
    train(student, &weak_data(weak, d2)?, train_cfg, &objective)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.cli_name().parse::<Method>().unwrap(), m);
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = MethodConfig::new(Method::Bootstrap);
        cfg.chain = vec![1, 3, 2];
        assert!(cfg.validate().is_err());
        cfg.chain = vec![1, 2, 3];
        assert!(cfg.validate().is_ok());
        cfg.lr_decay_per_stage = 1.0;
        assert!(cfg.validate().is_err());
    }
}
