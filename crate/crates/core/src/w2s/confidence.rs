use crate::error::{LabError, Result};
use crate::modelkit::{cross_entropy, cross_entropy_logit_grad, Model, Objective, Progress};
use crate::taskgen::argmax;

pub const DEFAULT_WARMUP_FRACTION: f64 = 0.2;

/// One-hot at the prediction's argmax; exact ties go to the weak label's argmax.
pub fn threshold_self(pred: &[f64], weak: &[f64]) -> Vec<f64> {
    let top = pred.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = (0..pred.len()).filter(|&i| pred[i] == top).collect();
    let pick = if tied.len() == 1 {
        tied[0]
    } else {
        *tied
            .iter()
            .max_by(|&&a, &&b| weak[a].partial_cmp(&weak[b]).unwrap().then(b.cmp(&a)))
            .expect("non-empty")
    };
    let mut out = vec![0.0; pred.len()];
    out[pick] = 1.0;
    out
}

/// `(1 - alpha) * CE(pred, weak) + alpha * CE(pred, self_threshold)`.
pub fn confidence_loss(pred: &[f64], weak: &[f64], self_threshold: &[f64], alpha: f64) -> f64 {
    (1.0 - alpha) * cross_entropy(pred, weak) + alpha * cross_entropy(pred, self_threshold)
}

/// Linear warm-up of the confidence weight over the first 20% of steps.
pub fn alpha_at(step: usize, total_steps: usize, alpha_max: f64) -> Result<f64> {
    alpha_with_warmup(step, total_steps, alpha_max, DEFAULT_WARMUP_FRACTION)
}

pub fn alpha_with_warmup(step: usize, total_steps: usize, alpha_max: f64, warmup_fraction: f64) -> Result<f64> {
    if total_steps == 0 {
        return Err(LabError::InvalidArgument("alpha schedule needs total_steps >= 1".into()));
    }
    if warmup_fraction <= 0.0 {
        return Ok(alpha_max);
    }
    let ramp = step as f64 / (warmup_fraction * total_steps as f64);
    Ok(alpha_max * ramp.min(1.0))
}

/// 0.75 for the top half of the capacity ladder `0..=max_capacity`, else 0.5.
pub fn default_alpha_max(capacity: usize, max_capacity: usize) -> f64 {
    if 2 * capacity > max_capacity {
        0.75
    } else {
        0.5
    }
}

/// Cross-entropy against weak labels mixed with the student's own hardened
/// predictions, which are held constant inside each gradient step.
#[derive(Debug, Clone, Copy)]
pub struct ConfidenceObjective {
    pub alpha_max: f64,
    pub warmup_fraction: f64,
}

impl Objective for ConfidenceObjective {
    fn loss(&self, model: &Model, x: &[f64], weak: &[f64], _idx: usize, p: Progress, grad: Option<&mut [f64]>) -> f64 {
        let trace = model.trace(x);
        let alpha = alpha_with_warmup(p.step, p.total.max(1), self.alpha_max, self.warmup_fraction).expect("total >= 1");
        if alpha == 0.0 {
            if let Some(g) = grad {
                let dz = cross_entropy_logit_grad(&trace.probs, weak);
                model.backward(&trace, &dz, None, Some(g));
            }
            return cross_entropy(&trace.probs, weak);
        }
        let ft = threshold_self(&trace.probs, weak);
        if let Some(g) = grad {
            let mixed: Vec<f64> = weak.iter().zip(&ft).map(|(w, t)| (1.0 - alpha) * w + alpha * t).collect();
            let dz = cross_entropy_logit_grad(&trace.probs, &mixed);
            model.backward(&trace, &dz, None, Some(g));
        }
        confidence_loss(&trace.probs, weak, &ft, alpha)
    }
}

/// Predicted class with the threshold tie rule, for callers that need it.
pub fn thresholded_class(pred: &[f64], weak: &[f64]) -> usize {
    argmax(&threshold_self(pred, weak))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold_self(&[0.9, 0.1], &[0.2, 0.8]), vec![1.0, 0.0]);
        assert_eq!(threshold_self(&[0.5, 0.5], &[0.3, 0.7]), vec![0.0, 1.0]);
    }

    #[test]
    fn schedule_examples() {
        assert_eq!(alpha_at(0, 100, 0.75).unwrap(), 0.0);
        assert!((alpha_at(10, 100, 0.8).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(alpha_at(20, 100, 0.75).unwrap(), 0.75);
        assert_eq!(alpha_at(100, 100, 0.75).unwrap(), 0.75);
        assert!(alpha_at(0, 0, 0.5).is_err());
    }

    #[test]
    fn large_models_get_larger_alpha() {
        let ladder: Vec<f64> = (0..=4).map(|c| default_alpha_max(c, 4)).collect();
        assert_eq!(ladder, vec![0.5, 0.5, 0.5, 0.75, 0.75]);
        let ladder: Vec<f64> = (0..=3).map(|c| default_alpha_max(c, 3)).collect();
        assert_eq!(ladder, vec![0.5, 0.5, 0.75, 0.75]);
    }

    #[test]
    fn reductions() {
        let (p, w, t) = ([0.8, 0.2], [0.6, 0.4], [1.0, 0.0]);
        assert_eq!(confidence_loss(&p, &w, &t, 0.0), cross_entropy(&p, &w));
        assert_eq!(confidence_loss(&p, &w, &t, 1.0), cross_entropy(&p, &t));
    }
}
