//! Flat `key = value` sweep configuration. Blank lines and `#` comments are
//! ignored; unknown keys are rejected.
//!
//! Keys and defaults:
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `tasks` | required | comma list of task names (`nested-spheres`, `xor-of-subsets`, `noisy-linear`, `parity-of-k-bits`, `best-move`) |
//! | `weak_caps` | required | comma list of supervisor capacities |
//! | `strong_caps` | required | comma list of student capacities |
//! | `methods` | `baseline` | comma list of recipe names (`baseline`, `confidence`, `bootstrap`, `genft`, `full`, `full-no-<method>`) |
//! | `seeds` | required | comma list; `a-b` ranges are inclusive |
//! | `human_baseline.<task>` | 0.9 | reference accuracy used to classify models |
//! | `output_dir` | `w2s-out` | where records and reports go |
//! | `parallelism` | 1 | worker threads over (task, seed) units |
//! | `task_size` | 4000 | examples per synthetic task |
//! | `bestmove_positions` | 3000 | positions sampled for the best-move task |
//! | `test_fraction` | 0.2 | held-out evaluation share (by group) |
//! | `batch_size` | 32 | minibatch size for every supervised run |
//! | `weak_lr`, `weak_epochs` | 0.3, 2 | supervisor training |
//! | `student_lr`, `student_epochs` | 0.3, 4 | student and ceiling training |
//! | `trunk_lr_scale` | 0.05 | student trunk learning-rate multiplier |
//! | `zero_head` | true | start students from a zeroed classification head |
//! | `pretrain_pool`, `pretrain_epochs`, `pretrain_lr` | 8000, 10, 0.05 | denoising pretraining of strong models on generated inputs |
//! | `game_records`, `game_skill` | 2000, 0.8 | best-move pretraining corpus |
//! | `alpha_max` | `auto` | confidence weight; `auto` gives 0.75 in the top half of `strong_caps`, 0.5 below |
//! | `warmup_fraction` | 0.2 | confidence warm-up share |
//! | `bootstrap_rounds` | 3 | rounds per intermediate stage |
//! | `bootstrap_stages` | 3 | chain length, final student included |
//! | `lr_decay_per_stage` | 10 | per-stage learning-rate divisor |
//! | `gen_lr`, `gen_batch`, `gen_epochs`, `mask_fraction` | 5e-5, 16, 1, 0.25 | generative finetuning on d2 inputs |
//! | `probe_concept` | 0 | concept column probed for saliency |
//!
//! `student_lr`, `student_epochs`, `trunk_lr_scale` and `pretrain_epochs`
//! also accept a per-task form, `student_epochs.best-move = 30`, which
//! overrides the global value for that task only.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::taskgen::{Family, BESTMOVE_TASK_ID};
use crate::w2s::Recipe;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub tasks: Vec<String>,
    pub weak_caps: Vec<usize>,
    pub strong_caps: Vec<usize>,
    pub methods: Vec<Recipe>,
    pub seeds: Vec<u64>,
    pub human_baseline: BTreeMap<String, f64>,
    pub output_dir: PathBuf,
    pub parallelism: usize,
    pub task_size: usize,
    pub bestmove_positions: usize,
    pub test_fraction: f64,
    pub batch_size: usize,
    pub weak_lr: f64,
    pub weak_epochs: usize,
    pub student_lr: f64,
    pub student_epochs: usize,
    pub trunk_lr_scale: f64,
    pub zero_head: bool,
    pub pretrain_pool: usize,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    pub game_records: usize,
    pub game_skill: f64,
    /// `None` selects by capacity.
    pub alpha_max: Option<f64>,
    pub warmup_fraction: f64,
    pub bootstrap_rounds: usize,
    pub bootstrap_stages: usize,
    pub lr_decay_per_stage: f64,
    pub gen_lr: f64,
    pub gen_batch: usize,
    pub gen_epochs: usize,
    pub mask_fraction: f64,
    pub probe_concept: usize,
    /// Per-task replacements of selected training keys.
    #[serde(default)]
    pub task_overrides: BTreeMap<String, TaskOverrides>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskOverrides {
    pub student_lr: Option<f64>,
    pub student_epochs: Option<usize>,
    pub trunk_lr_scale: Option<f64>,
    pub pretrain_epochs: Option<usize>,
}

const DEFAULT_HUMAN_BASELINE: f64 = 0.9;

impl SweepConfig {
    /// A config with defaults for everything except the grid.
    pub fn new(tasks: Vec<String>, weak_caps: Vec<usize>, strong_caps: Vec<usize>, seeds: Vec<u64>) -> Self {
        Self {
            tasks,
            weak_caps,
            strong_caps,
            methods: vec![Recipe::BASELINE],
            seeds,
            human_baseline: BTreeMap::new(),
            output_dir: PathBuf::from("w2s-out"),
            parallelism: 1,
            task_size: 4000,
            bestmove_positions: 3000,
            test_fraction: 0.2,
            batch_size: 32,
            weak_lr: 0.3,
            weak_epochs: 2,
            student_lr: 0.3,
            student_epochs: 4,
            trunk_lr_scale: 0.05,
            zero_head: true,
            pretrain_pool: 8000,
            pretrain_epochs: 10,
            pretrain_lr: 0.05,
            game_records: 2000,
            game_skill: 0.8,
            alpha_max: None,
            warmup_fraction: 0.2,
            bootstrap_rounds: 3,
            bootstrap_stages: 3,
            lr_decay_per_stage: 10.0,
            gen_lr: 5e-5,
            gen_batch: 16,
            gen_epochs: 1,
            mask_fraction: 0.25,
            probe_concept: 0,
            task_overrides: BTreeMap::new(),
        }
    }

    /// The configuration as seen by one task, overrides applied.
    pub fn for_task(&self, task: &str) -> SweepConfig {
        let mut out = self.clone();
        if let Some(o) = self.task_overrides.get(task) {
            out.student_lr = o.student_lr.unwrap_or(out.student_lr);
            out.student_epochs = o.student_epochs.unwrap_or(out.student_epochs);
            out.trunk_lr_scale = o.trunk_lr_scale.unwrap_or(out.trunk_lr_scale);
            out.pretrain_epochs = o.pretrain_epochs.unwrap_or(out.pretrain_epochs);
        }
        out
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        text.parse()
    }

    pub fn human_baseline_for(&self, task: &str) -> f64 {
        self.human_baseline.get(task).copied().unwrap_or(DEFAULT_HUMAN_BASELINE)
    }

    pub fn max_strong_cap(&self) -> usize {
        self.strong_caps.iter().copied().max().unwrap_or(0)
    }

    /// (weak, strong) pairs that are run: strong at least as large as weak.
    pub fn capacity_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &w in &self.weak_caps {
            for &s in &self.strong_caps {
                if s >= w {
                    out.push((w, s));
                }
            }
        }
        out
    }

    /// Bootstrapping chain for a pair: the last `bootstrap_stages`
    /// capacities above the supervisor, ending at the student.
    pub fn chain_for(&self, weak_cap: usize, strong_cap: usize) -> Vec<usize> {
        let above: Vec<usize> = (weak_cap + 1..=strong_cap).collect();
        if above.is_empty() {
            return vec![strong_cap];
        }
        let keep = self.bootstrap_stages.min(above.len());
        above[above.len() - keep..].to_vec()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LabError::Config(m));
        if self.tasks.is_empty() || self.weak_caps.is_empty() || self.strong_caps.is_empty() || self.methods.is_empty() {
            return bad("tasks, weak_caps, strong_caps and methods must be non-empty".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must be non-empty".into());
        }
        for t in &self.tasks {
            if t != BESTMOVE_TASK_ID && Family::from_str(t).is_err() {
                return bad(format!("unknown task `{t}`"));
            }
        }
        if self.capacity_pairs().is_empty() {
            return bad("no strong capacity is at least as large as a weak capacity".into());
        }
        if let Some(&c) = self.weak_caps.iter().chain(&self.strong_caps).find(|&&c| c > crate::modelkit::MAX_CAPACITY) {
            return bad(format!("capacity {c} exceeds the ladder maximum {}", crate::modelkit::MAX_CAPACITY));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction {} outside (0,1)", self.test_fraction));
        }
        if self.parallelism == 0 || self.bootstrap_stages == 0 || self.batch_size == 0 {
            return bad("parallelism, bootstrap_stages and batch_size must be >= 1".into());
        }
        for task in self.task_overrides.keys() {
            if !self.tasks.contains(task) {
                return bad(format!("override for task `{task}` which is not in `tasks`"));
            }
            let tc = self.for_task(task);
            if tc.student_epochs == 0 || !(tc.student_lr > 0.0) || !(tc.trunk_lr_scale >= 0.0) {
                return bad(format!("invalid training override for `{task}`"));
            }
        }
        for (k, v) in &self.human_baseline {
            if !(0.0..=1.0).contains(v) {
                return bad(format!("human_baseline.{k} = {v} outside [0,1]"));
            }
        }
        self.method_config(self.max_strong_cap(), self.weak_caps[0])
            .validate()
            .map_err(|e| LabError::Config(e.to_string()))?;
        Ok(())
    }

    /// Student-regime hyperparameters for one capacity pair.
    pub fn method_config(&self, strong_cap: usize, weak_cap: usize) -> crate::w2s::MethodConfig {
        let mut mc = crate::w2s::MethodConfig::new(crate::w2s::Method::Baseline);
        mc.alpha_max = self
            .alpha_max
            .unwrap_or_else(|| crate::w2s::default_alpha_max(strong_cap, self.max_strong_cap()));
        mc.warmup_fraction = self.warmup_fraction;
        mc.bootstrap_rounds = self.bootstrap_rounds;
        mc.chain = self.chain_for(weak_cap, strong_cap);
        mc.lr_decay_per_stage = self.lr_decay_per_stage;
        mc.gen_lr = self.gen_lr;
        mc.gen_batch = self.gen_batch;
        mc.gen_epochs = self.gen_epochs;
        mc.mask_fraction = self.mask_fraction;
        mc
    }

    /// SHA-256 over everything that influences results (not the output
    /// location or thread count).
    pub fn config_hash(&self) -> String {
        let mut canon = self.clone();
        canon.output_dir = PathBuf::new();
        canon.parallelism = 1;
        let bytes = serde_json::to_vec(&canon).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| LabError::Config(format!("{key}: `{s}`: {e}"))))
        .collect()
}

fn seeds(value: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|e| LabError::Config(format!("seeds: `{part}`: {e}")))?;
                let b: u64 = b.trim().parse().map_err(|e| LabError::Config(format!("seeds: `{part}`: {e}")))?;
                if b < a {
                    return Err(LabError::Config(format!("seeds: empty range `{part}`")));
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|e| LabError::Config(format!("seeds: `{part}`: {e}")))?),
        }
    }
    Ok(out)
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| LabError::Config(format!("{key}: `{value}`: {e}")))
}

impl FromStr for SweepConfig {
    type Err = LabError;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = SweepConfig::new(Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut seen = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| LabError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.insert(key.to_string(), n + 1).is_some() {
                return Err(LabError::Config(format!("line {}: duplicate key `{key}`", n + 1)));
            }
            match key {
                "tasks" => cfg.tasks = list(key, value)?,
                "weak_caps" => cfg.weak_caps = list(key, value)?,
                "strong_caps" => cfg.strong_caps = list(key, value)?,
                "methods" => cfg.methods = list(key, value)?,
                "seeds" => cfg.seeds = seeds(value)?,
                "output_dir" => cfg.output_dir = PathBuf::from(value),
                "parallelism" => cfg.parallelism = scalar(key, value)?,
                "task_size" => cfg.task_size = scalar(key, value)?,
                "bestmove_positions" => cfg.bestmove_positions = scalar(key, value)?,
                "test_fraction" => cfg.test_fraction = scalar(key, value)?,
                "batch_size" => cfg.batch_size = scalar(key, value)?,
                "weak_lr" => cfg.weak_lr = scalar(key, value)?,
                "weak_epochs" => cfg.weak_epochs = scalar(key, value)?,
                "student_lr" => cfg.student_lr = scalar(key, value)?,
                "student_epochs" => cfg.student_epochs = scalar(key, value)?,
                "trunk_lr_scale" => cfg.trunk_lr_scale = scalar(key, value)?,
                "zero_head" => cfg.zero_head = scalar(key, value)?,
                "pretrain_pool" => cfg.pretrain_pool = scalar(key, value)?,
                "pretrain_epochs" => cfg.pretrain_epochs = scalar(key, value)?,
                "pretrain_lr" => cfg.pretrain_lr = scalar(key, value)?,
                "game_records" => cfg.game_records = scalar(key, value)?,
                "game_skill" => cfg.game_skill = scalar(key, value)?,
                "alpha_max" => cfg.alpha_max = if value == "auto" { None } else { Some(scalar(key, value)?) },
                "warmup_fraction" => cfg.warmup_fraction = scalar(key, value)?,
                "bootstrap_rounds" => cfg.bootstrap_rounds = scalar(key, value)?,
                "bootstrap_stages" => cfg.bootstrap_stages = scalar(key, value)?,
                "lr_decay_per_stage" => cfg.lr_decay_per_stage = scalar(key, value)?,
                "gen_lr" => cfg.gen_lr = scalar(key, value)?,
                "gen_batch" => cfg.gen_batch = scalar(key, value)?,
                "gen_epochs" => cfg.gen_epochs = scalar(key, value)?,
                "mask_fraction" => cfg.mask_fraction = scalar(key, value)?,
                "probe_concept" => cfg.probe_concept = scalar(key, value)?,
                other => match other.split_once('.') {
                    Some(("human_baseline", task)) if !task.is_empty() => {
                        cfg.human_baseline.insert(task.to_string(), scalar(key, value)?);
                    }
                    Some((field, task)) if !task.is_empty() => {
                        let o = cfg.task_overrides.entry(task.to_string()).or_default();
                        match field {
                            "student_lr" => o.student_lr = Some(scalar(key, value)?),
                            "student_epochs" => o.student_epochs = Some(scalar(key, value)?),
                            "trunk_lr_scale" => o.trunk_lr_scale = Some(scalar(key, value)?),
                            "pretrain_epochs" => o.pretrain_epochs = Some(scalar(key, value)?),
                            _ => return Err(LabError::Config(format!("line {}: unknown key `{other}`", n + 1))),
                        }
                    }
                    _ => return Err(LabError::Config(format!("line {}: unknown key `{other}`", n + 1))),
                },
            }
        }
        for required in ["tasks", "weak_caps", "strong_caps", "seeds"] {
            if !seen.contains_key(required) {
                return Err(LabError::Config(format!("missing required key `{required}`")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "tasks = xor-of-subsets\nweak_caps = 0\nstrong_caps = 1, 3\nseeds = 0-2, 7\n";

    #[test]
    fn parses_minimal_config() {
        let cfg: SweepConfig = MINIMAL.parse().unwrap();
        assert_eq!(cfg.seeds, vec![0, 1, 2, 7]);
        assert_eq!(cfg.strong_caps, vec![1, 3]);
        assert_eq!(cfg.methods, vec![Recipe::BASELINE]);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let text = format!("{MINIMAL}learning_rat = 0.1\n");
        assert!(matches!(text.parse::<SweepConfig>(), Err(LabError::Config(_))));
    }

    #[test]
    fn missing_seeds_is_an_error() {
        assert!("tasks = xor-of-subsets\nweak_caps = 0\nstrong_caps = 1\n".parse::<SweepConfig>().is_err());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a: SweepConfig = MINIMAL.parse().unwrap();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("/elsewhere");
        b.parallelism = 4;
        assert_eq!(a.config_hash(), b.config_hash());
        b.student_lr = 0.9;
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn task_overrides_apply_to_one_task() {
        let text = format!("{MINIMAL}student_epochs.xor-of-subsets = 30\nstudent_lr = 0.2\n");
        let cfg: SweepConfig = text.parse().unwrap();
        assert_eq!(cfg.for_task("xor-of-subsets").student_epochs, 30);
        assert_eq!(cfg.for_task("xor-of-subsets").student_lr, 0.2);
        assert_eq!(cfg.for_task("parity-of-k-bits").student_epochs, 4);
        let bad = format!("{MINIMAL}student_epochs.best-move = 30\n");
        assert!(bad.parse::<SweepConfig>().is_err());
        let bad = format!("{MINIMAL}weak_lr.xor-of-subsets = 1\n");
        assert!(bad.parse::<SweepConfig>().is_err());
    }

    #[test]
    fn chains_end_at_the_student() {
        let cfg: SweepConfig = MINIMAL.parse().unwrap();
        assert_eq!(cfg.chain_for(0, 4), vec![2, 3, 4]);
        assert_eq!(cfg.chain_for(0, 1), vec![1]);
        assert_eq!(cfg.chain_for(2, 2), vec![2]);
    }
}
