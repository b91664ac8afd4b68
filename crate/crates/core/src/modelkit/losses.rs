use super::model::Model;

/// Lower clamp applied to predicted probabilities inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// `-sum(target * ln(max(pred, 1e-12)))`.
pub fn cross_entropy(pred: &[f64], target: &[f64]) -> f64 {
    -pred
        .iter()
        .zip(target)
        // A NaN prediction must surface as a NaN loss, which `f64::max` would hide.
        .map(|(p, t)| if *t == 0.0 { 0.0 } else { t * if *p < PROB_FLOOR { PROB_FLOOR } else { *p }.ln() })
        .sum::<f64>()
}

/// Gradient of [`cross_entropy`] with respect to the logits behind `probs`.
///
/// Coordinates whose probability sits under the clamp contribute no slope,
/// matching the clamped loss exactly.
pub fn cross_entropy_logit_grad(probs: &[f64], target: &[f64]) -> Vec<f64> {
    let active: f64 = probs
        .iter()
        .zip(target)
        .filter(|(p, _)| **p >= PROB_FLOOR)
        .map(|(_, t)| t)
        .sum();
    probs
        .iter()
        .zip(target)
        .map(|(p, t)| p * active - if *p >= PROB_FLOOR { *t } else { 0.0 })
        .collect()
}

/// Position inside a training run, for schedules such as warm-ups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    pub step: usize,
    pub total: usize,
}

/// A per-example differentiable training objective.
///
/// `idx` is the example's index in the training data. When `grad` is given
/// the parameter gradient of the returned loss is added into it.
pub trait Objective: Sync {
    fn loss(
        &self,
        model: &Model,
        x: &[f64],
        target: &[f64],
        idx: usize,
        progress: Progress,
        grad: Option<&mut [f64]>,
    ) -> f64;
}

/// Cross-entropy of the model's prediction against the example's target.
#[derive(Debug, Clone, Copy, Default)]
pub struct CrossEntropy;

impl Objective for CrossEntropy {
    fn loss(&self, model: &Model, x: &[f64], target: &[f64], _idx: usize, _p: Progress, grad: Option<&mut [f64]>) -> f64 {
        let trace = model.trace(x);
        if let Some(g) = grad {
            let dz = cross_entropy_logit_grad(&trace.probs, target);
            model.backward(&trace, &dz, None, Some(g));
        }
        cross_entropy(&trace.probs, target)
    }
}
