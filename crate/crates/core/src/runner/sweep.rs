use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SweepConfig;
use crate::error::{LabError, Result};
use crate::metrics::{agreement, categorize_errors, concept_probe, pgr, ErrorCase, RunRecord, ScoreTriple};
use crate::modelkit::{init_model, EarlyStopMetric, Model, ModelConfig, TrainConfig};
use crate::rng::derive_seed;
use crate::taskgen::{gen_bestmove_task, gen_game_records, gen_task, grouped_split, Dataset, Family, TaskSpec, BESTMOVE_TASK_ID};
use crate::w2s::{
    denoise, generate_weak_labels, make_weak_supervisor, train_on_ground_truth, train_student, Method, MethodConfig, Recipe,
};

/// All records of one sweep, sorted by cell key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub records: Vec<RunRecord>,
}

/// A grid cell that could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub task: String,
    pub method: String,
    pub weak_cap: usize,
    pub strong_cap: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub report: RunReport,
    pub failures: Vec<CellFailure>,
    /// (task, seed) units computed in this invocation.
    pub computed_units: usize,
    /// Units skipped because every record already existed.
    pub skipped_units: usize,
}

pub const RECORDS_FILE: &str = "records.jsonl";
pub const FAILURES_FILE: &str = "failures.jsonl";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.json";

type CellKey = (String, String, usize, usize, u64);

fn key_of(r: &RunRecord) -> CellKey {
    (r.task.clone(), r.method.clone(), r.weak_cap, r.strong_cap, r.seed)
}

/// Generates the labelled dataset of `task` for `seed`.
pub fn build_task(cfg: &SweepConfig, task: &str, seed: u64) -> Result<Dataset> {
    if task == BESTMOVE_TASK_ID {
        gen_bestmove_task(seed, cfg.bestmove_positions)
    } else {
        gen_task(&TaskSpec::new(Family::from_str(task)?).with_size(cfg.task_size), seed)
    }
}

/// Unlabeled inputs used to pretrain strong models for `task`.
pub fn pretraining_pool(cfg: &SweepConfig, task: &str, seed: u64) -> Result<Vec<Vec<f64>>> {
    let pool_seed = derive_seed(seed, "pool");
    if task == BESTMOVE_TASK_ID {
        gen_game_records(pool_seed, cfg.game_records, cfg.game_skill)
    } else {
        let spec = TaskSpec::new(Family::from_str(task)?).with_size(cfg.pretrain_pool);
        Ok(gen_task(&spec, pool_seed)?.features())
    }
}

/// Freshly initialized strong model of capacity `cap` (before pretraining).
pub fn strong_init(data: &Dataset, cap: usize, seed: u64) -> Result<Model> {
    init_model(ModelConfig::new(cap, data.dim(), data.n_classes(), derive_seed(seed, &format!("strong{cap}"))))
}

/// Strong starting point: denoising-pretrained trunk, optionally zeroed head.
pub fn pretrained_strong(cfg: &SweepConfig, data: &Dataset, pool: &[Vec<f64>], cap: usize, seed: u64) -> Result<Model> {
    let mut model = strong_init(data, cap, seed)?;
    if cap > 0 && cfg.pretrain_epochs > 0 {
        let mut mc = MethodConfig::new(Method::GenerativeFinetune);
        mc.gen_lr = cfg.pretrain_lr;
        mc.gen_epochs = cfg.pretrain_epochs;
        mc.gen_batch = cfg.gen_batch;
        mc.mask_fraction = cfg.mask_fraction;
        model = denoise(&model, pool, &mc, derive_seed(seed, &format!("pretrain/{cap}")))?.model;
    }
    if cfg.zero_head {
        model.zero_head();
    }
    Ok(model)
}

pub fn weak_train_config(cfg: &SweepConfig, seed: u64) -> TrainConfig {
    let mut tc = TrainConfig::new(cfg.weak_lr, seed).with_epochs(cfg.weak_epochs);
    tc.batch_size = cfg.batch_size;
    tc
}

/// Student and ceiling optimizer settings (early stopping on weak agreement).
pub fn student_train_config(cfg: &SweepConfig, seed: u64) -> TrainConfig {
    let mut tc = TrainConfig::new(cfg.student_lr, seed)
        .with_epochs(cfg.student_epochs)
        .with_metric(EarlyStopMetric::WeakAgreement);
    tc.batch_size = cfg.batch_size;
    tc.trunk_lr_scale = cfg.trunk_lr_scale;
    tc
}

/// Splits off the held-out evaluation set: (training pool, test).
pub fn evaluation_split(cfg: &SweepConfig, data: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let outer = grouped_split(data, 1.0 - cfg.test_fraction, derive_seed(seed, "test"))?;
    Ok((outer.d1, outer.d2))
}

pub fn accuracy(model: &Model, data: &Dataset) -> Result<f64> {
    let preds = model.predict_all(&data.features())?;
    let truth = data.truths();
    Ok(preds.iter().zip(&truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64)
}

/// The strong ceiling: the pretrained strong model trained on d1 ground
/// truth, selected on validation accuracy.
pub fn strong_ceiling(start: &Model, d1: &Dataset, cfg: &SweepConfig, seed: u64) -> Result<Model> {
    let tc = student_train_config(cfg, seed).with_metric(EarlyStopMetric::ValidationAccuracy);
    Ok(train_on_ground_truth(start, d1, &tc)?.model)
}

/// Probe accuracy on the designated concept; `None` for linear models,
/// concept-free tasks or a single-class concept column.
fn probe(model: &Model, test: &Dataset, concept: usize, seed: u64) -> Option<f64> {
    if model.capacity() == 0 || test.concept_labels.is_none() {
        return None;
    }
    concept_probe(model, test, concept, derive_seed(seed, "probe")).ok()
}

struct Unit<'a> {
    task: &'a str,
    seed: u64,
}

/// Computes every record of one (task, seed) unit that is not yet done.
fn run_unit(cfg: &SweepConfig, hash: &str, unit: &Unit, done: &BTreeSet<CellKey>) -> Vec<std::result::Result<RunRecord, CellFailure>> {
    let wanted: Vec<(usize, usize, Recipe)> = cfg
        .capacity_pairs()
        .into_iter()
        .flat_map(|(w, s)| cfg.methods.iter().map(move |m| (w, s, *m)))
        .filter(|(w, s, m)| !done.contains(&(unit.task.to_string(), m.to_string(), *w, *s, unit.seed)))
        .collect();
    if wanted.is_empty() {
        return Vec::new();
    }
    let fail = |w: usize, s: usize, m: &Recipe, e: &LabError| CellFailure {
        task: unit.task.to_string(),
        method: m.to_string(),
        weak_cap: w,
        strong_cap: s,
        seed: unit.seed,
        error: e.to_string(),
    };
    let cfg = &cfg.for_task(unit.task);
    match UnitState::prepare(cfg, unit, &wanted) {
        Err(e) => wanted.iter().map(|(w, s, m)| Err(fail(*w, *s, m, &e))).collect(),
        Ok(mut state) => wanted
            .iter()
            .map(|(w, s, m)| state.record(cfg, hash, *w, *s, *m).map_err(|e| fail(*w, *s, m, &e)))
            .collect(),
    }
}

/// Shared per-unit artifacts: data, pretrained models and supervisors.
struct UnitState<'a> {
    task: &'a str,
    seed: u64,
    test: Dataset,
    pretrained: BTreeMap<usize, Model>,
    /// Per weak capacity: supervisor, d1, d2, test accuracy.
    supervisors: BTreeMap<usize, (Model, Dataset, Dataset, f64)>,
    ceilings: BTreeMap<usize, f64>,
    probe_bases: BTreeMap<usize, (Option<f64>, Option<f64>)>,
    raw_inits: BTreeMap<usize, Model>,
}

impl<'a> UnitState<'a> {
    fn prepare(cfg: &SweepConfig, unit: &Unit<'a>, wanted: &[(usize, usize, Recipe)]) -> Result<Self> {
        let data = build_task(cfg, unit.task, unit.seed)?;
        let (pool_ds, test) = evaluation_split(cfg, &data, unit.seed)?;
        let pool = if cfg.pretrain_epochs > 0 {
            pretraining_pool(cfg, unit.task, unit.seed)?
        } else {
            Vec::new()
        };
        let mut caps = BTreeSet::new();
        for (w, s, m) in wanted {
            caps.insert(*s);
            if m.bootstrap {
                caps.extend(cfg.chain_for(*w, *s));
            }
        }
        let mut pretrained = BTreeMap::new();
        let mut raw_inits = BTreeMap::new();
        for &c in &caps {
            pretrained.insert(c, pretrained_strong(cfg, &data, &pool, c, unit.seed)?);
            raw_inits.insert(c, strong_init(&data, c, unit.seed)?);
        }
        let mut supervisors = BTreeMap::new();
        for &w in wanted.iter().map(|(w, _, _)| w).collect::<BTreeSet<_>>() {
            let weak_cfg = ModelConfig::new(w, data.dim(), data.n_classes(), derive_seed(unit.seed, &format!("weak{w}")));
            let (sup, split) = make_weak_supervisor(&pool_ds, weak_cfg, &weak_train_config(cfg, unit.seed))?;
            let acc = accuracy(&sup, &test)?;
            supervisors.insert(w, (sup, split.d1, split.d2, acc));
        }
        Ok(Self {
            task: unit.task,
            seed: unit.seed,
            test,
            pretrained,
            supervisors,
            ceilings: BTreeMap::new(),
            probe_bases: BTreeMap::new(),
            raw_inits,
        })
    }

    fn record(&mut self, cfg: &SweepConfig, hash: &str, w: usize, s: usize, recipe: Recipe) -> Result<RunRecord> {
        let started = Instant::now();
        let seed = self.seed;
        let (sup, d1, d2, acc_weak) = self.supervisors.get(&w).expect("prepared supervisor");
        let acc_weak = *acc_weak;
        if !self.ceilings.contains_key(&s) {
            let ceiling = strong_ceiling(&self.pretrained[&s], d1, cfg, seed)?;
            self.ceilings.insert(s, accuracy(&ceiling, &self.test)?);
        }
        let acc_strong = self.ceilings[&s];
        let weak_labels = generate_weak_labels(sup, d2)?;
        let mc = cfg.method_config(s, w);
        let pretrained = &self.pretrained;
        let init = |c: usize| -> Result<Model> {
            pretrained
                .get(&c)
                .cloned()
                .ok_or_else(|| LabError::InvalidArgument(format!("no pretrained model for capacity {c}")))
        };
        let student = train_student(recipe, &init, s, &weak_labels, d2, &mc, &student_train_config(cfg, seed))?.model;

        let xs = self.test.features();
        let student_preds = student.predict_all(&xs)?;
        let weak_preds = sup.predict_all(&xs)?;
        let truth = self.test.truths();
        let acc_ws = student_preds.iter().zip(&truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64;
        let cases: Vec<ErrorCase> = (0..truth.len())
            .map(|i| ErrorCase {
                query_idx: i,
                student_pred: student_preds[i],
                weak_pred: weak_preds[i],
                truth: truth[i],
            })
            .collect();
        let concept = cfg.probe_concept;
        if !self.probe_bases.contains_key(&s) {
            let init_probe = probe(&self.raw_inits[&s], &self.test, concept, seed);
            let start_probe = probe(&self.pretrained[&s], &self.test, concept, seed);
            self.probe_bases.insert(s, (init_probe, start_probe));
        }
        let (probe_init, probe_start) = self.probe_bases[&s];
        let probe_after = probe(&student, &self.test, concept, seed);
        Ok(RunRecord {
            task: self.task.to_string(),
            method: recipe.to_string(),
            weak_cap: w,
            strong_cap: s,
            seed,
            acc_weak,
            acc_ws,
            acc_strong,
            pgr: pgr(ScoreTriple::new(acc_weak, acc_ws, acc_strong)).ok(),
            agreement: agreement(&student_preds, &weak_preds)?,
            probe_init,
            probe_start,
            probe_after,
            errors: categorize_errors(&cases),
            wall_time_s: started.elapsed().as_secs_f64(),
            config_hash: hash.to_string(),
        })
    }
}

/// Reads `records.jsonl`, dropping a truncated final line left by an
/// interrupted run.
pub fn load_records(path: &Path) -> Result<Vec<RunRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<std::io::Result<_>>()?;
    let mut out = Vec::new();
    let mut truncated = false;
    for (n, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RunRecord>(line) {
            Ok(r) => out.push(r),
            Err(_) if n + 1 == lines.len() => truncated = true,
            Err(e) => {
                return Err(LabError::Parse {
                    what: "run record",
                    path: path.to_path_buf(),
                    line: n + 1,
                    reason: e.to_string(),
                })
            }
        }
    }
    if truncated {
        rewrite_records(path, &out)?;
    }
    Ok(out)
}

fn rewrite_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut f = File::create(path)?;
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

/// Builds a report from raw records (sorted, hash-checked).
pub fn report_from_records(mut records: Vec<RunRecord>) -> Result<RunReport> {
    let hash = records.first().map(|r| r.config_hash.clone()).unwrap_or_default();
    if let Some(bad) = records.iter().find(|r| r.config_hash != hash) {
        return Err(LabError::Config(format!(
            "records mix config hashes {hash} and {}",
            bad.config_hash
        )));
    }
    records.sort_by_key(key_of);
    Ok(RunReport {
        config_hash: hash,
        records,
    })
}

/// Metrics CSV with the fixed column set. PGR is left empty when undefined.
pub fn write_metrics_csv(report: &RunReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "task", "method", "weak_cap", "strong_cap", "seed", "acc_weak", "acc_ws", "acc_strong", "pgr", "agreement",
    ])
    .map_err(csv_err)?;
    for r in &report.records {
        w.write_record([
            r.task.clone(),
            r.method.clone(),
            r.weak_cap.to_string(),
            r.strong_cap.to_string(),
            r.seed.to_string(),
            r.acc_weak.to_string(),
            r.acc_ws.to_string(),
            r.acc_strong.to_string(),
            r.pgr.map(|p| p.to_string()).unwrap_or_default(),
            r.agreement.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> LabError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => LabError::Io(io),
        other => LabError::InvalidArgument(format!("csv: {other:?}")),
    }
}

/// Runs every missing cell of the grid and persists records as they finish.
///
/// Cells already present in `output_dir/records.jsonl` (same config hash)
/// are skipped; failed cells are collected and the sweep continues.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let hash = cfg.config_hash();
    fs::create_dir_all(&cfg.output_dir)?;
    let records_path = cfg.output_dir.join(RECORDS_FILE);
    let existing = load_records(&records_path)?;
    if let Some(r) = existing.iter().find(|r| r.config_hash != hash) {
        return Err(LabError::Config(format!(
            "{} holds records of config {} (current {hash})",
            records_path.display(),
            r.config_hash
        )));
    }
    fs::write(cfg.output_dir.join(CONFIG_FILE), serde_json::to_string_pretty(cfg)?)?;
    let done: BTreeSet<CellKey> = existing.iter().map(key_of).collect();

    let units: Vec<Unit> = cfg
        .tasks
        .iter()
        .flat_map(|t| cfg.seeds.iter().map(move |&seed| Unit { task: t, seed }))
        .collect();
    let writer = Mutex::new(OpenOptions::new().create(true).append(true).open(&records_path)?);
    let state = Mutex::new((existing, Vec::<CellFailure>::new(), 0usize, 0usize));
    let process = |unit: &Unit| -> Result<()> {
        let results = run_unit(cfg, &hash, unit, &done);
        let mut s = state.lock().expect("state lock");
        if results.is_empty() {
            s.3 += 1;
            return Ok(());
        }
        s.2 += 1;
        let mut f = writer.lock().expect("writer lock");
        for r in results {
            match r {
                Ok(rec) => {
                    serde_json::to_writer(&mut *f, &rec)?;
                    f.write_all(b"\n")?;
                    s.0.push(rec);
                }
                Err(fail) => s.1.push(fail),
            }
        }
        f.flush()?;
        Ok(())
    };
    if cfg.parallelism == 1 {
        units.iter().try_for_each(process)?;
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.parallelism)
            .build()
            .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
        pool.install(|| units.par_iter().try_for_each(process))?;
    }
    let (records, mut failures, computed_units, skipped_units) = state.into_inner().expect("state lock");
    failures.sort_by(|a, b| {
        (&a.task, &a.method, a.weak_cap, a.strong_cap, a.seed).cmp(&(&b.task, &b.method, b.weak_cap, b.strong_cap, b.seed))
    });
    let mut ff = File::create(cfg.output_dir.join(FAILURES_FILE))?;
    for f in &failures {
        serde_json::to_writer(&mut ff, f)?;
        ff.write_all(b"\n")?;
    }
    let mut report = report_from_records(records)?;
    report.config_hash = hash;
    write_metrics_csv(&report, &cfg.output_dir.join(METRICS_FILE))?;
    Ok(SweepOutcome {
        report,
        failures,
        computed_units,
        skipped_units,
    })
}
