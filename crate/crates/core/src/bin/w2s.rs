//! Command-line entry point. Exit codes: 0 success, 1 runtime error,
//! 2 configuration error, 3 sweep finished with failed cells.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use serde_json::json;

use w2s_core::facilitation::{align, facilitate, train_judge, write_transcript, AlignConfig};
use w2s_core::metrics::{agreement, pgr, ScoreTriple};
use w2s_core::modelkit::{init_model, load_model, save_model, EarlyStopMetric, ModelConfig, TrainConfig};
use w2s_core::rng::derive_seed;
use w2s_core::runner::{self, report, run_sweep, ReportKind, SweepConfig};
use w2s_core::taskgen::{gen_bestmove_task, gen_task, read_dataset, write_dataset, Family, TaskSpec, BESTMOVE_TASK_ID};
use w2s_core::w2s::{generate_weak_labels, make_weak_supervisor, read_weak_labels, train_student, write_weak_labels, Method, MethodConfig, Recipe};
use w2s_core::{LabError, Result};

#[derive(Parser)]
#[command(name = "w2s", about = "Desk-scale weak-to-strong generalization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a task dataset.
    GenData {
        #[arg(long)]
        task: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Examples (synthetic) or positions (best-move).
        #[arg(long, default_value_t = 4000)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a dataset into d1/d2 and train a supervisor on d1.
    TrainWeak {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        capacity: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.3)]
        lr: f64,
        #[arg(long, default_value_t = 2)]
        epochs: usize,
        /// Directory receiving weak.ckpt, d1.jsonl and d2.jsonl.
        #[arg(long)]
        out: PathBuf,
    },
    /// Label d2 with a supervisor.
    WeakLabels {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a student on weak labels.
    TrainStrong {
        #[arg(long, default_value = "baseline")]
        method: String,
        #[arg(long)]
        capacity: usize,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Starting checkpoint; a fresh model when omitted.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Bootstrapping chain, e.g. `2,3,4`.
        #[arg(long, value_delimiter = ',')]
        chain: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.3)]
        lr: f64,
        #[arg(long, default_value_t = 4)]
        epochs: usize,
        #[arg(long)]
        alpha_max: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Distill a strong model into the weak architecture.
    Facilitate {
        #[arg(long)]
        weak: PathBuf,
        #[arg(long)]
        strong: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.3)]
        lr: f64,
        #[arg(long, default_value_t = 2)]
        epochs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the debate-driven alignment loop.
    Align {
        #[arg(long)]
        strong: PathBuf,
        #[arg(long)]
        weak: PathBuf,
        /// Judge checkpoint; trained on --judge-data when omitted.
        #[arg(long)]
        judge: Option<PathBuf>,
        #[arg(long)]
        judge_data: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 5)]
        rounds: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long)]
        topk: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 1)]
        epochs: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        transcript: PathBuf,
    },
    /// Accuracy of a model on a dataset (and agreement with a supervisor).
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        supervisor: Option<PathBuf>,
        #[arg(long)]
        ceiling: Option<PathBuf>,
    },
    /// Run a sweep from a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Emit report files from a sweep directory.
    Report {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn gen_data(task: &str, seed: u64, size: usize) -> Result<w2s_core::taskgen::Dataset> {
    if task == BESTMOVE_TASK_ID {
        gen_bestmove_task(seed, size)
    } else {
        let family = Family::from_str(task).map_err(|e| LabError::Config(e.to_string()))?;
        gen_task(&TaskSpec::new(family).with_size(size), seed)
    }
}

fn print_json(v: serde_json::Value) {
    println!("{v}");
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenData { task, seed, size, out } => {
            let ds = gen_data(&task, seed, size)?;
            write_dataset(&ds, &out)?;
            print_json(json!({"examples": ds.len(), "out": out}));
        }
        Command::TrainWeak {
            data,
            capacity,
            seed,
            lr,
            epochs,
            out,
        } => {
            let ds = read_dataset(&data)?;
            let cfg = ModelConfig::new(capacity, ds.dim(), ds.n_classes(), derive_seed(seed, &format!("weak{capacity}")));
            let (model, split) = make_weak_supervisor(&ds, cfg, &TrainConfig::new(lr, seed).with_epochs(epochs))?;
            std::fs::create_dir_all(&out)?;
            save_model(&model, &out.join("weak.ckpt"))?;
            write_dataset(&split.d1, &out.join("d1.jsonl"))?;
            write_dataset(&split.d2, &out.join("d2.jsonl"))?;
            print_json(json!({"d1": split.d1.len(), "d2": split.d2.len(), "out": out}));
        }
        Command::WeakLabels { model, data, out } => {
            let sup = load_model(&model)?;
            let d2 = read_dataset(&data)?;
            let labels = generate_weak_labels(&sup, &d2)?;
            write_weak_labels(&labels, &out)?;
            print_json(json!({"labels": labels.len(), "out": out}));
        }
        Command::TrainStrong {
            method,
            capacity,
            data,
            labels,
            init,
            chain,
            seed,
            lr,
            epochs,
            alpha_max,
            out,
        } => {
            let recipe = Recipe::from_str(&method).map_err(|e| LabError::Config(e.to_string()))?;
            let d2 = read_dataset(&data)?;
            let weak = read_weak_labels(&labels, &d2.task_id)?;
            let mut mc = MethodConfig::new(Method::Baseline);
            mc.chain = if chain.is_empty() { vec![capacity] } else { chain };
            mc.alpha_max = alpha_max.unwrap_or(mc.alpha_max);
            let start = init.map(|p| load_model(&p)).transpose()?;
            let (dim, classes) = (d2.dim(), d2.n_classes());
            let make = |c: usize| match &start {
                Some(m) if m.capacity() == c => Ok(m.clone()),
                _ => init_model(ModelConfig::new(c, dim, classes, derive_seed(seed, &format!("strong{c}")))),
            };
            let tc = TrainConfig::new(lr, seed)
                .with_epochs(epochs)
                .with_metric(EarlyStopMetric::WeakAgreement);
            let result = train_student(recipe, &make, capacity, &weak, &d2, &mc, &tc)?;
            save_model(&result.model, &out)?;
            print_json(json!({"method": recipe.to_string(), "best_epoch": result.best_epoch, "out": out}));
        }
        Command::Facilitate {
            weak,
            strong,
            data,
            seed,
            lr,
            epochs,
            out,
        } => {
            let (w, s) = (load_model(&weak)?, load_model(&strong)?);
            let q = read_dataset(&data)?;
            let enhanced = facilitate(&w, &s, &q, &TrainConfig::new(lr, seed).with_epochs(epochs))?;
            let agree = agreement(&enhanced.predict_all(&q.features())?, &s.predict_all(&q.features())?)?;
            save_model(&enhanced, &out)?;
            print_json(json!({"agreement_with_strong": agree, "out": out}));
        }
        Command::Align {
            strong,
            weak,
            judge,
            judge_data,
            data,
            rounds,
            lambda,
            topk,
            seed,
            lr,
            epochs,
            out,
            transcript,
        } => {
            let (s, w) = (load_model(&strong)?, load_model(&weak)?);
            let judge = match (judge, judge_data) {
                (Some(p), _) => load_model(&p)?,
                (None, Some(d)) => train_judge(&read_dataset(&d)?, w.config, &TrainConfig::new(0.3, seed))?,
                (None, None) => return Err(LabError::Config("align needs --judge or --judge-data".into())),
            };
            let mut cfg = AlignConfig::new(judge);
            cfg.rounds = rounds;
            cfg.lambda = lambda;
            if let Some(k) = topk {
                cfg.topk = k;
            }
            cfg.validate().map_err(|e| LabError::Config(e.to_string()))?;
            let q = read_dataset(&data)?;
            let (aligned, records) = align(&s, &w, &q, &cfg, &TrainConfig::new(lr, seed).with_epochs(epochs))?;
            save_model(&aligned, &out)?;
            write_transcript(&records, &transcript)?;
            let wins = w2s_core::facilitation::win_fraction_by_round(&records);
            print_json(json!({"win_fraction_by_round": wins, "out": out, "transcript": transcript}));
        }
        Command::Evaluate {
            model,
            data,
            supervisor,
            ceiling,
        } => {
            let m = load_model(&model)?;
            let ds = read_dataset(&data)?;
            let acc = runner::accuracy(&m, &ds)?;
            let mut out = json!({"accuracy": acc});
            if let Some(p) = supervisor {
                let sup = load_model(&p)?;
                let xs = ds.features();
                out["agreement"] = json!(agreement(&m.predict_all(&xs)?, &sup.predict_all(&xs)?)?);
                let acc_weak = runner::accuracy(&sup, &ds)?;
                out["acc_weak"] = json!(acc_weak);
                if let Some(c) = ceiling {
                    let acc_strong = runner::accuracy(&load_model(&c)?, &ds)?;
                    out["acc_strong"] = json!(acc_strong);
                    out["pgr"] = json!(pgr(ScoreTriple::new(acc_weak, acc, acc_strong)).ok());
                }
            }
            print_json(out);
        }
        Command::Sweep { config, output_dir } => {
            let mut cfg = SweepConfig::from_file(&config)?;
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            let outcome = run_sweep(&cfg)?;
            print_json(json!({
                "records": outcome.report.records.len(),
                "failures": outcome.failures.len(),
                "computed_units": outcome.computed_units,
                "skipped_units": outcome.skipped_units,
                "config_hash": outcome.report.config_hash,
            }));
            if !outcome.failures.is_empty() {
                for f in &outcome.failures {
                    eprintln!("failed cell {} {} {}->{} seed {}: {}", f.task, f.method, f.weak_cap, f.strong_cap, f.seed, f.error);
                }
                return Ok(ExitCode::from(3));
            }
        }
        Command::Report { kind, run, out } => {
            let kind = ReportKind::from_str(&kind).map_err(|e| LabError::Config(e.to_string()))?;
            let records = runner::load_records(&run.join(runner::RECORDS_FILE))?;
            let rep = runner::report_from_records(records)?;
            let human = load_human_baseline(&run)?;
            let files = report(&rep, kind, &out.unwrap_or_else(|| run.join("reports")), &human)?;
            print_json(json!({"files": files}));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn load_human_baseline(run: &Path) -> Result<BTreeMap<String, f64>> {
    let path = run.join(runner::CONFIG_FILE);
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let cfg: SweepConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    Ok(cfg.human_baseline)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e @ LabError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
