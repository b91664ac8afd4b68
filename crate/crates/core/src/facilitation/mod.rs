//! Facilitation and alignment: distilling a strong model into the weak
//! architecture, per-query explanations, judge-mediated debates and the
//! alignment loop that finetunes the strong model against a frozen weak
//! model and judge.

mod explain;
mod objective;
mod transcript;

pub use explain::{debate, explain, judge_score, margin_direction, DebateRecord, Explanation, Winner, TIE_TOLERANCE};
pub use objective::AlignObjective;
pub use transcript::{read_transcript, write_transcript, TranscriptRecord};

use crate::error::{LabError, Result};
use crate::modelkit::{init_model, train, CrossEntropy, EarlyStopMetric, LabeledData, Model, ModelConfig, TrainConfig};
use crate::rng::derive_seed;
use crate::taskgen::Dataset;
use crate::w2s::train_on_ground_truth;

fn check_compatible(a: &Model, b: &Model) -> Result<()> {
    if a.config.input_dim != b.config.input_dim {
        return Err(LabError::DimensionMismatch {
            expected: a.config.input_dim,
            got: b.config.input_dim,
        });
    }
    if a.config.n_classes != b.config.n_classes {
        return Err(LabError::DimensionMismatch {
            expected: a.config.n_classes,
            got: b.config.n_classes,
        });
    }
    Ok(())
}

/// Distills `strong`'s soft outputs on `queries` into a copy of `weak`.
pub fn facilitate(weak: &Model, strong: &Model, queries: &Dataset, train_cfg: &TrainConfig) -> Result<Model> {
    check_compatible(weak, strong)?;
    let features = queries.features();
    let targets = strong.forward_all(&features)?;
    Ok(train(weak, &LabeledData::new(features, targets)?, train_cfg, &CrossEntropy)?.model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignConfig {
    /// Weight of the explanation-matching term.
    pub lambda: f64,
    pub rounds: usize,
    /// Features the judge masks per explanation.
    pub topk: usize,
    pub judge: Model,
}

impl AlignConfig {
    /// Defaults: `lambda = 1`, five rounds and `topk = ceil(d/4)`.
    pub fn new(judge: Model) -> Self {
        let topk = judge.config.input_dim.div_ceil(4);
        Self {
            lambda: 1.0,
            rounds: 5,
            topk,
            judge,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(LabError::InvalidArgument(format!("lambda {} must be >= 0", self.lambda)));
        }
        if self.rounds == 0 {
            return Err(LabError::InvalidArgument("rounds must be >= 1".into()));
        }
        if self.topk == 0 || self.topk > self.judge.config.input_dim {
            return Err(LabError::InvalidArgument(format!(
                "topk {} outside [1, {}]",
                self.topk, self.judge.config.input_dim
            )));
        }
        Ok(())
    }
}

/// A fresh weak-capacity judge trained on ground truth.
pub fn train_judge(d1: &Dataset, weak_cfg: ModelConfig, train_cfg: &TrainConfig) -> Result<Model> {
    let cfg = weak_cfg.with_seed(derive_seed(weak_cfg.seed, "judge"));
    let tc = train_cfg.clone().with_metric(EarlyStopMetric::ValidationAccuracy);
    Ok(train_on_ground_truth(&init_model(cfg)?, d1, &tc)?.model)
}

/// Training config of alignment round `round` (0-based). Round 0 uses the
/// caller's seed unchanged.
pub fn round_config(train_cfg: &TrainConfig, round: usize) -> TrainConfig {
    if round == 0 {
        train_cfg.clone()
    } else {
        train_cfg.clone().with_seed(derive_seed(train_cfg.seed, &format!("align/{round}")))
    }
}

/// The alignment loop.
///
/// Each round both models explain every query, the judge scores the pair,
/// and the strong model trains for one `train_cfg` run on cross-entropy
/// toward the weak model's outputs plus, for queries whose debate it lost,
/// `lambda` times the squared distance between the two attribution vectors.
/// Debate outcomes and predicted classes are frozen for the round. Returns
/// the aligned model and every debate, round by round.
pub fn align(
    strong: &Model,
    weak: &Model,
    queries: &Dataset,
    cfg: &AlignConfig,
    train_cfg: &TrainConfig,
) -> Result<(Model, Vec<DebateRecord>)> {
    cfg.validate()?;
    check_compatible(strong, weak)?;
    check_compatible(strong, &cfg.judge)?;
    let features = queries.features();
    let mask_values = queries.feature_means();
    let targets = weak.forward_all(&features)?;
    let weak_expl = features.iter().map(|x| explain(weak, x)).collect::<Result<Vec<_>>>()?;
    let data = LabeledData::new(features.clone(), targets)?;

    let mut current = strong.clone();
    let mut records = Vec::with_capacity(cfg.rounds * features.len());
    for round in 0..cfg.rounds {
        let mut lost = Vec::with_capacity(features.len());
        let mut classes = Vec::with_capacity(features.len());
        for (q, x) in features.iter().enumerate() {
            let e_strong = explain(&current, x)?;
            classes.push(e_strong.predicted_class);
            let mut rec = debate(&e_strong, &weak_expl[q], x, cfg, &mask_values, q)?;
            rec.round = round + 1;
            lost.push(rec.winner == Winner::Weak);
            records.push(rec);
        }
        let objective = AlignObjective {
            lambda: cfg.lambda,
            lost,
            classes,
            weak_attributions: weak_expl.iter().map(|e| e.attributions.clone()).collect(),
        };
        current = train(&current, &data, &round_config(train_cfg, round), &objective)?.model;
    }
    Ok((current, records))
}

/// Fraction of debates in each round won by the strong model.
pub fn win_fraction_by_round(records: &[DebateRecord]) -> Vec<f64> {
    let rounds = records.iter().map(|r| r.round).max().unwrap_or(0);
    (1..=rounds)
        .map(|round| {
            let in_round: Vec<&DebateRecord> = records.iter().filter(|r| r.round == round).collect();
            let won = in_round.iter().filter(|r| r.winner == Winner::Strong).count();
            won as f64 / in_round.len().max(1) as f64
        })
        .collect()
}
