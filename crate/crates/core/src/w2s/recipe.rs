use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{generative_finetune, train_student_bootstrap, weak_data, ConfidenceObjective, Method, MethodConfig, WeakLabelSet};
use crate::error::{LabError, Result};
use crate::modelkit::{train, CrossEntropy, Model, Objective, TrainConfig, TrainResult};
use crate::taskgen::Dataset;

/// A combination of the three student enhancements.
///
/// Named `baseline`, a single method name, `full` for all three, or
/// `full-no-<method>` for the leave-one-out pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Recipe {
    pub confidence: bool,
    pub bootstrap: bool,
    pub genft: bool,
}

impl Recipe {
    pub const BASELINE: Recipe = Recipe {
        confidence: false,
        bootstrap: false,
        genft: false,
    };
    pub const FULL: Recipe = Recipe {
        confidence: true,
        bootstrap: true,
        genft: true,
    };

    fn parts(self) -> [(bool, Method); 3] {
        [
            (self.confidence, Method::AuxConfidence),
            (self.bootstrap, Method::Bootstrap),
            (self.genft, Method::GenerativeFinetune),
        ]
    }

    pub fn with(mut self, method: Method, on: bool) -> Self {
        match method {
            Method::Baseline => {}
            Method::AuxConfidence => self.confidence = on,
            Method::Bootstrap => self.bootstrap = on,
            Method::GenerativeFinetune => self.genft = on,
        }
        self
    }
}

impl From<Method> for Recipe {
    fn from(m: Method) -> Self {
        Recipe::BASELINE.with(m, true)
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let on: Vec<Method> = self.parts().iter().filter(|p| p.0).map(|p| p.1).collect();
        match on.len() {
            0 => f.write_str("baseline"),
            1 => f.write_str(on[0].cli_name()),
            3 => f.write_str("full"),
            _ => {
                let off = self.parts().iter().find(|p| !p.0).expect("one part off").1;
                write!(f, "full-no-{}", off.cli_name())
            }
        }
    }
}

impl FromStr for Recipe {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(Recipe::FULL);
        }
        if let Some(rest) = s.strip_prefix("full-no-") {
            let m: Method = rest.parse()?;
            if m == Method::Baseline {
                return Err(LabError::InvalidArgument(format!("unknown method `{s}`")));
            }
            return Ok(Recipe::FULL.with(m, false));
        }
        Ok(s.parse::<Method>()?.into())
    }
}

/// Trains a student of capacity `target` under `recipe`.
///
/// `init(c)` supplies the starting model for capacity `c`. Generative
/// finetuning on the d2 inputs is applied to every model `init` returns;
/// the confidence objective is used for the final student only; with
/// bootstrapping `cfg.chain` must end at `target`.
pub fn train_student(
    recipe: Recipe,
    init: &dyn Fn(usize) -> Result<Model>,
    target: usize,
    weak: &WeakLabelSet,
    d2: &Dataset,
    cfg: &MethodConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainResult> {
    super::require_weak_agreement(train_cfg)?;
    cfg.validate()?;
    let unlabeled = if recipe.genft { d2.features() } else { Vec::new() };
    let start = |c: usize| -> Result<Model> {
        let m = init(c)?;
        if recipe.genft {
            generative_finetune(&m, &unlabeled, cfg)
        } else {
            Ok(m)
        }
    };
    let confidence = ConfidenceObjective {
        alpha_max: cfg.alpha_max,
        warmup_fraction: cfg.warmup_fraction,
    };
    let objective: &dyn Objective = if recipe.confidence { &confidence } else { &CrossEntropy };
    if recipe.bootstrap {
        if cfg.chain.last() != Some(&target) {
            return Err(LabError::InvalidArgument(format!(
                "bootstrap chain {:?} does not end at capacity {target}",
                cfg.chain
            )));
        }
        Ok(train_student_bootstrap(&start, weak, d2, cfg, train_cfg, objective)?.result)
    } else {
        train(&start(target)?, &weak_data(weak, d2)?, train_cfg, objective)
    }
}
