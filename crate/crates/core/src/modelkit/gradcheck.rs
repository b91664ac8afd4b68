use rand::seq::index::sample;

use super::losses::{Objective, Progress};
use super::model::Model;
use super::train::LabeledData;
use crate::error::{LabError, Result};
use crate::rng::rng_for;

/// Gradient magnitudes below this are compared absolutely rather than relatively.
pub const GRAD_FLOOR: f64 = 1e-6;

/// Mean objective over `data`, with its analytic gradient when requested.
pub fn batch_objective(
    model: &Model,
    data: &LabeledData,
    objective: &dyn Objective,
    progress: Progress,
    grad: Option<&mut [f64]>,
) -> f64 {
    let n = data.len() as f64;
    match grad {
        Some(g) => {
            g.iter_mut().for_each(|v| *v = 0.0);
            let mut total = 0.0;
            for i in 0..data.len() {
                total += objective.loss(model, &data.features[i], &data.targets[i], i, progress, Some(&mut *g));
            }
            g.iter_mut().for_each(|v| *v /= n);
            total / n
        }
        None => {
            (0..data.len())
                .map(|i| objective.loss(model, &data.features[i], &data.targets[i], i, progress, None))
                .sum::<f64>()
                / n
        }
    }
}

/// Largest relative disagreement between the analytic gradient and central
/// finite differences over `n_coords` randomly chosen parameters.
pub fn gradient_check(
    model: &Model,
    data: &LabeledData,
    objective: &dyn Objective,
    progress: Progress,
    eps: f64,
    n_coords: usize,
    seed: u64,
) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(LabError::InvalidArgument(format!("eps {eps} outside [1e-7, 1e-3]")));
    }
    let mut analytic = vec![0.0; model.params.len()];
    batch_objective(model, data, objective, progress, Some(&mut analytic));
    let n = model.params.len();
    let coords = sample(&mut rng_for(seed, "gradcheck"), n, n_coords.min(n)).into_vec();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for c in coords {
        let orig = probe.params[c];
        probe.params[c] = orig + eps;
        let up = batch_objective(&probe, data, objective, progress, None);
        probe.params[c] = orig - eps;
        let down = batch_objective(&probe, data, objective, progress, None);
        probe.params[c] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let denom = analytic[c].abs().max(numeric.abs()).max(GRAD_FLOOR);
        worst = worst.max((analytic[c] - numeric).abs() / denom);
    }
    Ok(worst)
}
