use super::{generate_weak_labels, require_weak_agreement, weak_data, MethodConfig, WeakLabelSet};
use crate::error::{LabError, Result};
use crate::modelkit::{train, CrossEntropy, Model, Objective, TrainConfig, TrainResult};
use crate::rng::derive_seed;
use crate::taskgen::Dataset;

/// One intermediate model trained during bootstrapping.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub stage: usize,
    pub round: usize,
    pub capacity: usize,
    pub learning_rate: f64,
    /// Validation agreement with the labels this model was trained on.
    pub input_agreement: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapTrace {
    pub result: TrainResult,
    pub stages: Vec<StageRecord>,
    /// Labels the final student was trained on.
    pub final_labels: WeakLabelSet,
}

/// Bootstrapping through `cfg.chain`.
///
/// Each intermediate stage runs `bootstrap_rounds` rounds; every round
/// trains a fresh model of that stage's capacity on the current labels and
/// relabels d2 with it. The round whose model best agrees (on validation)
/// with its own input labels hands its labels to the next stage. Stage `s`
/// trains at `learning_rate / lr_decay_per_stage^s`; the final student is
/// the last chain entry and trains with `final_objective`.
pub fn train_student_bootstrap(
    init: &dyn Fn(usize) -> Result<Model>,
    weak: &WeakLabelSet,
    d2: &Dataset,
    cfg: &MethodConfig,
    train_cfg: &TrainConfig,
    final_objective: &dyn Objective,
) -> Result<BootstrapTrace> {
    require_weak_agreement(train_cfg)?;
    cfg.validate()?;
    let (&target, intermediates) = cfg
        .chain
        .split_last()
        .ok_or_else(|| LabError::InvalidArgument("bootstrap chain is empty".into()))?;

    let mut labels = weak.clone();
    let mut stages = Vec::new();
    for (stage, &capacity) in intermediates.iter().enumerate() {
        let lr = train_cfg.learning_rate / cfg.lr_decay_per_stage.powi(stage as i32);
        let mut best: Option<(f64, WeakLabelSet, usize)> = None;
        let mut current = labels.clone();
        for round in 0..cfg.bootstrap_rounds {
            let round_cfg = train_cfg
                .clone()
                .with_learning_rate(lr)
                .with_seed(derive_seed(train_cfg.seed, &format!("bootstrap/{stage}/{round}")));
            let result = train(&init(capacity)?, &weak_data(&current, d2)?, &round_cfg, &CrossEntropy)?;
            let agreement = result.history[result.best_epoch].metric;
            let relabelled = generate_weak_labels(&result.model, d2)?;
            stages.push(StageRecord {
                stage,
                round,
                capacity,
                learning_rate: lr,
                input_agreement: agreement,
                selected: false,
            });
            if best.as_ref().is_none_or(|b| agreement > b.0) {
                best = Some((agreement, relabelled.clone(), stages.len() - 1));
            }
            current = relabelled;
        }
        let (_, chosen, at) = best.expect("at least one round");
        stages[at].selected = true;
        labels = chosen;
    }
    let final_stage = intermediates.len();
    let final_cfg = train_cfg
        .clone()
        .with_learning_rate(train_cfg.learning_rate / cfg.lr_decay_per_stage.powi(final_stage as i32));
    let result = train(&init(target)?, &weak_data(&labels, d2)?, &final_cfg, final_objective)?;
    Ok(BootstrapTrace {
        result,
        stages,
        final_labels: labels,
    })
}
