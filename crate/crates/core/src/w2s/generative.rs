use rand_distr::{Distribution, Normal};

use super::MethodConfig;
use crate::error::{LabError, Result};
use crate::modelkit::Model;
use crate::rng::{derive_seed, rng_for, shuffle};

/// Per-epoch mean reconstruction loss of a denoising run, epoch 0 first.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseReport {
    pub model: Model,
    pub losses: Vec<f64>,
}

/// Masked-feature denoising on unlabeled inputs.
///
/// A fresh linear reconstruction head reads the last trunk layer and predicts
/// the masked coordinates (masked inputs are zeroed). Only trunk parameters
/// move; the classification head is left untouched.
pub fn generative_finetune(student: &Model, unlabeled: &[Vec<f64>], cfg: &MethodConfig) -> Result<Model> {
    Ok(denoise(student, unlabeled, cfg, derive_seed(student.config.seed, "genft"))?.model)
}

pub fn denoise(student: &Model, unlabeled: &[Vec<f64>], cfg: &MethodConfig, seed: u64) -> Result<DenoiseReport> {
    if student.config.capacity_index == 0 {
        return Err(LabError::NoTrunk { capacity: 0 });
    }
    if unlabeled.is_empty() {
        return Err(LabError::InvalidArgument("no unlabeled inputs for generative finetuning".into()));
    }
    let d = student.config.input_dim;
    if let Some(bad) = unlabeled.iter().find(|x| x.len() != d) {
        return Err(LabError::DimensionMismatch { expected: d, got: bad.len() });
    }
    if cfg.gen_batch == 0 || cfg.gen_epochs == 0 {
        return Err(LabError::InvalidArgument("gen_batch and gen_epochs must be >= 1".into()));
    }
    let h = student.trunk_width();
    let mut rng = rng_for(seed, "denoise");
    let normal = Normal::new(0.0, (1.0 / h as f64).sqrt()).expect("positive std");
    let mut head: Vec<f64> = (0..d * h).map(|_| normal.sample(&mut rng)).collect();
    head.extend(std::iter::repeat_n(0.0, d));
    let n_mask = ((cfg.mask_fraction * d as f64).round() as usize).clamp(1, d);

    let mut model = student.clone();
    let depth = model.layers().len();
    let draw_mask = |rng: &mut crate::rng::LabRng| {
        let mut idx: Vec<usize> = (0..d).collect();
        shuffle(&mut idx, rng);
        idx.truncate(n_mask);
        idx
    };
    // Losses are reported on one fixed set of masks so epochs are comparable.
    let mut eval_rng = rng_for(seed, "denoise/eval");
    let eval_masks: Vec<Vec<usize>> = unlabeled.iter().map(|_| draw_mask(&mut eval_rng)).collect();
    let reconstruct = |model: &Model, head: &[f64], x: &[f64], masked: &[usize]| {
        let mut input = x.to_vec();
        for &j in masked {
            input[j] = 0.0;
        }
        let trace = model.trace(&input);
        let recon: Vec<f64> = masked
            .iter()
            .map(|&j| {
                let row = &head[j * h..(j + 1) * h];
                head[d * h + j] + row.iter().zip(&trace.acts[depth - 1]).map(|(w, a)| w * a).sum::<f64>()
            })
            .collect();
        (trace, recon)
    };
    let eval_loss = |model: &Model, head: &[f64]| -> f64 {
        unlabeled
            .iter()
            .zip(&eval_masks)
            .map(|(x, masked)| {
                let (_, recon) = reconstruct(model, head, x, masked);
                masked.iter().zip(&recon).map(|(&j, r)| (r - x[j]).powi(2)).sum::<f64>() / n_mask as f64
            })
            .sum::<f64>()
            / unlabeled.len() as f64
    };

    let mut order: Vec<usize> = (0..unlabeled.len()).collect();
    let mut losses = vec![eval_loss(&model, &head)];
    let mut grad = vec![0.0; model.params.len()];
    let mut head_grad = vec![0.0; head.len()];
    let zero_logits = vec![0.0; model.config.n_classes];
    for epoch in 1..=cfg.gen_epochs {
        shuffle(&mut order, &mut rng);
        for batch in order.chunks(cfg.gen_batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            head_grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let x = &unlabeled[i];
                let masked = draw_mask(&mut rng);
                let (trace, recon) = reconstruct(&model, &head, x, &masked);
                let top = &trace.acts[depth - 1];
                let mut dh = vec![0.0; h];
                for (&j, r) in masked.iter().zip(&recon) {
                    let g = 2.0 * (r - x[j]) / n_mask as f64;
                    let row = &head[j * h..(j + 1) * h];
                    for k in 0..h {
                        head_grad[j * h + k] += g * top[k];
                        dh[k] += g * row[k];
                    }
                    head_grad[d * h + j] += g;
                }
                let mut extra: Vec<Vec<f64>> = trace.acts.iter().map(|a| vec![0.0; a.len()]).collect();
                extra[depth - 1] = dh;
                model.backward(&trace, &zero_logits, Some(&extra), Some(&mut grad));
            }
            let scale = cfg.gen_lr / batch.len() as f64;
            let off = model.head_offset;
            model.params[..off].iter_mut().zip(&grad[..off]).for_each(|(p, g)| *p -= scale * g);
            head.iter_mut().zip(&head_grad).for_each(|(p, g)| *p -= scale * g);
        }
        let loss = eval_loss(&model, &head);
        if !loss.is_finite() {
            return Err(LabError::NonFiniteLoss {
                value: loss,
                epoch,
                step: 0,
            });
        }
        losses.push(loss);
    }
    Ok(DenoiseReport { model, losses })
}
