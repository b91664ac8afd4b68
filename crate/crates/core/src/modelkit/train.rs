use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::losses::{Objective, Progress};
use super::model::Model;
use crate::error::{LabError, Result};
use crate::rng::{rng_for, shuffle};
use crate::taskgen::argmax;

/// Quantity maximized by checkpoint selection. Both are argmax agreement
/// with the validation slice's targets; they differ in what the targets are
/// (ground truth or weak labels).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EarlyStopMetric {
    ValidationAccuracy,
    WeakAgreement,
}

impl fmt::Display for EarlyStopMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EarlyStopMetric::ValidationAccuracy => "validation_accuracy",
            EarlyStopMetric::WeakAgreement => "weak_agreement",
        })
    }
}

impl FromStr for EarlyStopMetric {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "validation_accuracy" => Ok(EarlyStopMetric::ValidationAccuracy),
            "weak_agreement" => Ok(EarlyStopMetric::WeakAgreement),
            other => Err(LabError::InvalidArgument(format!("unknown early-stop metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub early_stop_metric: EarlyStopMetric,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Stop after this many epochs without improvement.
    pub patience: Option<usize>,
    /// Multiplier on the learning rate of trunk parameters (head uses 1).
    pub trunk_lr_scale: f64,
}

impl TrainConfig {
    pub fn new(learning_rate: f64, seed: u64) -> Self {
        Self {
            learning_rate,
            batch_size: 32,
            epochs: 2,
            early_stop_metric: EarlyStopMetric::ValidationAccuracy,
            validation_fraction: 0.1,
            seed,
            patience: None,
            trunk_lr_scale: 1.0,
        }
    }

    pub fn with_metric(mut self, metric: EarlyStopMetric) -> Self {
        self.early_stop_metric = metric;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }

    pub fn validate(&self) -> Result<()> {
        // lr = 0 is allowed as a no-op run.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(LabError::InvalidArgument(format!("learning rate {} must be >= 0", self.learning_rate)));
        }
        if !(self.trunk_lr_scale >= 0.0 && self.trunk_lr_scale.is_finite()) {
            return Err(LabError::InvalidArgument(format!("trunk_lr_scale {} must be >= 0", self.trunk_lr_scale)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(LabError::InvalidArgument("epochs and batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(LabError::InvalidArgument(format!(
                "validation fraction {} outside [0,1)",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

/// Features paired with per-example target distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl LabeledData {
    pub fn new(features: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if features.len() != targets.len() {
            return Err(LabError::LengthMismatch {
                left: features.len(),
                right: targets.len(),
            });
        }
        if features.is_empty() {
            return Err(LabError::InvalidArgument("training data is empty".into()));
        }
        Ok(Self { features, targets })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-example objective over the epoch (epoch 0: at initialization).
    pub train_loss: f64,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    /// Checkpoint with the highest early-stop metric (latest on ties, so a
    /// run that keeps the metric level still returns its trained weights).
    pub model: Model,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    /// Last epoch actually run.
    pub stopped_epoch: usize,
}

/// Train/validation index split used by [`train`].
pub fn validation_split(n: usize, cfg: &TrainConfig) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut order, &mut rng_for(cfg.seed, "train/order"));
    let n_val = if cfg.validation_fraction == 0.0 || n < 2 {
        0
    } else {
        ((cfg.validation_fraction * n as f64).round() as usize).clamp(1, n - 1)
    };
    let val = order.split_off(n - n_val);
    (order, val)
}

fn agreement_on(model: &Model, data: &LabeledData, idx: &[usize]) -> f64 {
    let hits = idx
        .iter()
        .filter(|&&i| argmax(&model.trace(&data.features[i]).probs) == argmax(&data.targets[i]))
        .count();
    hits as f64 / idx.len() as f64
}

/// Minibatch gradient descent with per-epoch checkpoint selection.
pub fn train(model: &Model, data: &LabeledData, cfg: &TrainConfig, objective: &dyn Objective) -> Result<TrainResult> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(LabError::InvalidArgument("training data is empty".into()));
    }
    let (mut train_idx, val_idx) = validation_split(data.len(), cfg);
    let eval_idx = if val_idx.is_empty() { train_idx.clone() } else { val_idx };
    let per_epoch = train_idx.len().div_ceil(cfg.batch_size);
    let total = per_epoch * cfg.epochs;

    let mut current = model.clone();
    let init_loss = train_idx
        .iter()
        .map(|&i| objective.loss(&current, &data.features[i], &data.targets[i], i, Progress { step: 0, total }, None))
        .sum::<f64>()
        / train_idx.len() as f64;
    let mut history = vec![EpochStats {
        epoch: 0,
        train_loss: init_loss,
        metric: agreement_on(&current, data, &eval_idx),
    }];
    let mut best = (history[0].metric, 0, current.clone());

    let mut rng = rng_for(cfg.seed, "train/epochs");
    let mut grad = vec![0.0; current.params.len()];
    let mut step = 0;
    let mut stopped_epoch = 0;
    for epoch in 1..=cfg.epochs {
        shuffle(&mut train_idx, &mut rng);
        let mut loss_sum = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let progress = Progress { step, total };
            let mut batch_loss = 0.0;
            for &i in batch {
                batch_loss += objective.loss(&current, &data.features[i], &data.targets[i], i, progress, Some(&mut grad));
            }
            if !batch_loss.is_finite() {
                return Err(LabError::NonFiniteLoss {
                    value: batch_loss,
                    epoch,
                    step,
                });
            }
            loss_sum += batch_loss;
            let scale = cfg.learning_rate / batch.len() as f64;
            let off = current.head_offset;
            let trunk_scale = scale * cfg.trunk_lr_scale;
            current.params[..off].iter_mut().zip(&grad[..off]).for_each(|(p, g)| *p -= trunk_scale * g);
            current.params[off..].iter_mut().zip(&grad[off..]).for_each(|(p, g)| *p -= scale * g);
            step += 1;
        }
        let metric = agreement_on(&current, data, &eval_idx);
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / train_idx.len() as f64,
            metric,
        });
        stopped_epoch = epoch;
        if metric >= best.0 {
            best = (metric, epoch, current.clone());
        }
        if cfg.patience.is_some_and(|p| epoch - best.1 >= p) {
            break;
        }
    }
    Ok(TrainResult {
        model: best.2,
        history,
        best_epoch: best.1,
        stopped_epoch,
    })
}
