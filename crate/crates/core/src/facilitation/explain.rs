use std::fmt;

use serde::{Deserialize, Serialize};

use super::AlignConfig;
use crate::error::{LabError, Result};
use crate::modelkit::Model;
use crate::taskgen::argmax;

/// Debates whose score magnitude falls below this are ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Per-feature attribution for one decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    /// Signed, with unit L1 norm.
    pub attributions: Vec<f64>,
    pub predicted_class: usize,
    /// Model probability of `predicted_class`.
    pub confidence: f64,
    /// Raw attributions were all zero and were replaced by a uniform vector.
    pub degenerate: bool,
}

/// Logit weights whose dot product with the logits is the margin of `class`
/// over the mean of the other classes.
pub fn margin_direction(class: usize, n_classes: usize) -> Vec<f64> {
    let other = -1.0 / (n_classes - 1) as f64;
    (0..n_classes).map(|j| if j == class { 1.0 } else { other }).collect()
}

/// Gradient-times-input attribution of the predicted-class margin.
pub fn explain(model: &Model, features: &[f64]) -> Result<Explanation> {
    let probs = model.forward(features)?;
    let class = argmax(&probs);
    let g = model.input_gradient(features, &margin_direction(class, probs.len()))?;
    let raw: Vec<f64> = g.iter().zip(features).map(|(g, x)| g * x).collect();
    let norm: f64 = raw.iter().map(|v| v.abs()).sum();
    let d = features.len();
    let (attributions, degenerate) = if norm > 0.0 && norm.is_finite() {
        (raw.iter().map(|v| v / norm).collect(), false)
    } else {
        (vec![1.0 / d as f64; d], true)
    };
    Ok(Explanation {
        attributions,
        predicted_class: class,
        confidence: probs[class],
        degenerate,
    })
}

/// Indices of the `k` largest attributions by magnitude (lower index wins ties).
fn top_k(attributions: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..attributions.len()).collect();
    idx.sort_by(|&a, &b| attributions[b].abs().total_cmp(&attributions[a].abs()).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Faithfulness of an explanation under `judge`: the relative drop in the
/// judge's probability for the explained class when the explanation's top-k
/// features are replaced by `mask_values`. Increases are scored 0.
pub fn judge_score(explanation: &Explanation, features: &[f64], judge: &Model, topk: usize, mask_values: &[f64]) -> Result<f64> {
    let d = features.len();
    if explanation.attributions.len() != d || mask_values.len() != d {
        return Err(LabError::DimensionMismatch {
            expected: d,
            got: explanation.attributions.len().min(mask_values.len()),
        });
    }
    if topk == 0 || topk > d {
        return Err(LabError::InvalidArgument(format!("topk {topk} outside [1, {d}]")));
    }
    let c = explanation.predicted_class;
    let before = judge.forward(features)?;
    if c >= before.len() {
        return Err(LabError::InvalidArgument(format!("class {c} out of range")));
    }
    let mut masked = features.to_vec();
    for j in top_k(&explanation.attributions, topk) {
        masked[j] = mask_values[j];
    }
    let after = judge.forward(&masked)?;
    if before[c] <= 0.0 {
        return Ok(0.0);
    }
    Ok(((before[c] - after[c]) / before[c]).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Strong,
    Weak,
    Tie,
}

impl fmt::Display for Winner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Winner::Strong => "strong",
            Winner::Weak => "weak",
            Winner::Tie => "tie",
        })
    }
}

impl Winner {
    pub fn from_score(score: f64) -> Self {
        if score.abs() < TIE_TOLERANCE {
            Winner::Tie
        } else if score > 0.0 {
            Winner::Strong
        } else {
            Winner::Weak
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebateRecord {
    /// 1-based alignment round; 0 outside the loop.
    pub round: usize,
    pub query_idx: usize,
    pub explanation_strong: Explanation,
    pub explanation_weak: Explanation,
    pub judge_capacity: usize,
    pub score: f64,
    pub winner: Winner,
}

/// `judge_score(strong) - judge_score(weak)` on one query.
pub fn debate(
    e_strong: &Explanation,
    e_weak: &Explanation,
    features: &[f64],
    cfg: &AlignConfig,
    mask_values: &[f64],
    query_idx: usize,
) -> Result<DebateRecord> {
    if e_strong.attributions.len() != e_weak.attributions.len() {
        return Err(LabError::DimensionMismatch {
            expected: e_strong.attributions.len(),
            got: e_weak.attributions.len(),
        });
    }
    let s = judge_score(e_strong, features, &cfg.judge, cfg.topk, mask_values)?;
    let w = judge_score(e_weak, features, &cfg.judge, cfg.topk, mask_values)?;
    let score = s - w;
    Ok(DebateRecord {
        round: 0,
        query_idx,
        explanation_strong: e_strong.clone(),
        explanation_weak: e_weak.clone(),
        judge_capacity: cfg.judge.config.capacity_index,
        score,
        winner: Winner::from_score(score),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelkit::{init_model, ModelConfig};

    #[test]
    fn margin_direction_sums_to_zero() {
        let m = margin_direction(1, 3);
        assert!((m.iter().sum::<f64>()).abs() < 1e-15);
        assert_eq!(m[1], 1.0);
    }

    #[test]
    fn zero_input_is_degenerate_and_uniform() {
        let m = init_model(ModelConfig::new(1, 4, 2, 3)).unwrap();
        let e = explain(&m, &[0.0; 4]).unwrap();
        assert!(e.degenerate);
        assert_eq!(e.attributions, vec![0.25; 4]);
    }

    #[test]
    fn top_k_breaks_ties_by_index() {
        assert_eq!(top_k(&[0.25, -0.25, 0.5, 0.0], 2), vec![2, 0]);
    }

    #[test]
    fn winner_follows_sign() {
        assert_eq!(Winner::from_score(0.5), Winner::Strong);
        assert_eq!(Winner::from_score(-0.5), Winner::Weak);
        assert_eq!(Winner::from_score(1e-12), Winner::Tie);
    }
}
