use super::explain::margin_direction;
use crate::modelkit::{cross_entropy, cross_entropy_logit_grad, Model, Objective, Progress};

/// Cross-entropy toward the weak model plus, on lost debates,
/// `lambda * ||A_strong - A_weak||^2` over L1-normalized gradient-times-input
/// attributions. Debate outcomes and explained classes are fixed per round.
#[derive(Debug, Clone)]
pub struct AlignObjective {
    pub lambda: f64,
    pub lost: Vec<bool>,
    pub classes: Vec<usize>,
    pub weak_attributions: Vec<Vec<f64>>,
}

impl Objective for AlignObjective {
    fn loss(&self, model: &Model, x: &[f64], target: &[f64], idx: usize, _p: Progress, grad: Option<&mut [f64]>) -> f64 {
        let trace = model.trace(x);
        let ce = cross_entropy(&trace.probs, target);
        if self.lambda == 0.0 || !self.lost[idx] {
            if let Some(g) = grad {
                let dz = cross_entropy_logit_grad(&trace.probs, target);
                model.backward(&trace, &dz, None, Some(g));
            }
            return ce;
        }
        let direction = margin_direction(self.classes[idx], model.config.n_classes);
        let input_grad = model.backward(&trace, &direction, None, None);
        let raw: Vec<f64> = input_grad.iter().zip(x).map(|(g, v)| g * v).collect();
        let norm: f64 = raw.iter().map(|v| v.abs()).sum();
        let weak = &self.weak_attributions[idx];
        if norm == 0.0 {
            // Degenerate explanations are uniform and carry no slope.
            let u = 1.0 / x.len() as f64;
            let penalty: f64 = weak.iter().map(|w| (u - w).powi(2)).sum();
            if let Some(g) = grad {
                let dz = cross_entropy_logit_grad(&trace.probs, target);
                model.backward(&trace, &dz, None, Some(g));
            }
            return ce + self.lambda * penalty;
        }
        let diff: Vec<f64> = raw.iter().zip(weak).map(|(r, w)| r / norm - w).collect();
        let penalty: f64 = diff.iter().map(|d| d * d).sum();
        if let Some(g) = grad {
            let dz = cross_entropy_logit_grad(&trace.probs, target);
            model.backward(&trace, &dz, None, Some(&mut *g));
            // d/da of lambda*||a - w||^2, pulled back through a = u/|u|_1 and u = g*x.
            let da: Vec<f64> = diff.iter().map(|d| 2.0 * self.lambda * d).collect();
            let dot: f64 = da.iter().zip(&raw).map(|(a, u)| a * u).sum();
            let v: Vec<f64> = (0..x.len())
                .map(|i| {
                    let sign = if raw[i] > 0.0 {
                        1.0
                    } else if raw[i] < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    (da[i] / norm - sign * dot / (norm * norm)) * x[i]
                })
                .collect();
            model.input_gradient_param_grad(&trace, &direction, &v, g);
        }
        ce + self.lambda * penalty
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelkit::{gradient_check, init_model, LabeledData, ModelConfig};
    use crate::rng::rng_for;
    use rand::Rng;

    #[test]
    fn surrogate_gradient_matches_finite_differences() {
        for cap in 0..=3 {
            let mut rng = rng_for(cap as u64, "t");
            let model = init_model(ModelConfig::new(cap, 5, 2, 11 + cap as u64)).unwrap();
            let xs: Vec<Vec<f64>> = (0..6).map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let ts: Vec<Vec<f64>> = (0..6).map(|_| { let p = rng.random_range(0.1..0.9); vec![p, 1.0 - p] }).collect();
            let weak: Vec<Vec<f64>> = (0..6)
                .map(|_| {
                    let v: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let n: f64 = v.iter().map(|a: &f64| a.abs()).sum();
                    v.into_iter().map(|a| a / n).collect()
                })
                .collect();
            let obj = AlignObjective {
                lambda: 1.5,
                lost: vec![true, false, true, true, false, true],
                classes: (0..6).map(|i| model.predict(&xs[i]).unwrap()).collect(),
                weak_attributions: weak,
            };
            let data = LabeledData::new(xs, ts).unwrap();
            let err = gradient_check(&model, &data, &obj, Progress { step: 0, total: 1 }, 1e-5, 200, 1).unwrap();
            assert!(err < 1e-4, "cap {cap}: {err}");
        }
    }
}
