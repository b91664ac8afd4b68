use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::svg::{bar_chart, line_chart};
use super::sweep::{csv_err, RunReport};
use super::{classify_model, ModelClass};
use crate::error::{LabError, Result};
use crate::metrics::{
    ablation_table, median, paired_t_test, pgr_out_of_range, ErrorCategory, RunRecord, ABLATION_COMPONENTS, FULL_METHOD,
};
use crate::w2s::{Method, Recipe};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Scaling,
    Ablation,
    Significance,
    Agreement,
    Saliency,
    Errors,
}

impl ReportKind {
    pub const ALL: [ReportKind; 6] = [
        ReportKind::Scaling,
        ReportKind::Ablation,
        ReportKind::Significance,
        ReportKind::Agreement,
        ReportKind::Saliency,
        ReportKind::Errors,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReportKind::Scaling => "scaling",
            ReportKind::Ablation => "ablation",
            ReportKind::Significance => "significance",
            ReportKind::Agreement => "agreement",
            ReportKind::Saliency => "saliency",
            ReportKind::Errors => "errors",
        }
    }
}

impl fmt::Display for ReportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReportKind {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        ReportKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| LabError::InvalidArgument(format!("unknown report kind `{s}`")))
    }
}

/// Enhancements compared against the baseline in the significance report.
pub const SIGNIFICANCE_METHODS: [Method; 3] = [Method::AuxConfidence, Method::Bootstrap, Method::GenerativeFinetune];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>], comments: &[String]) -> Result<()> {
    let mut text = String::new();
    for c in comments {
        text.push_str("# ");
        text.push_str(c);
        text.push('\n');
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    let body = w.into_inner().map_err(|e| LabError::InvalidArgument(format!("csv: {e}")))?;
    text.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    fs::write(path, text)?;
    Ok(())
}

fn require_records(run: &RunReport) -> Result<()> {
    if run.records.is_empty() {
        return Err(LabError::MissingConfiguration("run report has no records".into()));
    }
    Ok(())
}

/// Records at the largest capacity gap: smallest weak, largest strong.
pub fn largest_gap(records: &[RunRecord]) -> Vec<&RunRecord> {
    let w = records.iter().map(|r| r.weak_cap).min();
    let s = records.iter().map(|r| r.strong_cap).max();
    records
        .iter()
        .filter(|r| Some(r.weak_cap) == w && Some(r.strong_cap) == s)
        .collect()
}

/// One row of the scaling matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub method: String,
    pub weak_cap: usize,
    pub strong_cap: usize,
    pub n: usize,
    pub acc_weak: f64,
    pub acc_ws: f64,
    pub acc_strong: f64,
    pub pgr: Option<f64>,
    pub agreement: f64,
    pub pgr_out_of_range: usize,
}

/// Medians per (method, weak_cap, strong_cap), pooled over tasks and seeds.
pub fn scaling_rows(records: &[RunRecord]) -> Vec<ScalingRow> {
    let mut groups: BTreeMap<(String, usize, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.method.clone(), r.weak_cap, r.strong_cap)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((method, weak_cap, strong_cap), rs)| {
            let col = |f: &dyn Fn(&RunRecord) -> f64| median(&rs.iter().map(|r| f(r)).collect::<Vec<_>>()).expect("non-empty");
            let pgrs: Vec<f64> = rs.iter().filter_map(|r| r.pgr).collect();
            ScalingRow {
                method,
                weak_cap,
                strong_cap,
                n: rs.len(),
                acc_weak: col(&|r| r.acc_weak),
                acc_ws: col(&|r| r.acc_ws),
                acc_strong: col(&|r| r.acc_strong),
                pgr: median(&pgrs),
                agreement: col(&|r| r.agreement),
                pgr_out_of_range: pgrs.iter().filter(|p| pgr_out_of_range(**p)).count(),
            }
        })
        .collect()
}

/// Paired comparison of one enhancement against the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceRow {
    pub method_a: String,
    pub method_b: String,
    pub metric: String,
    /// `None` when the paired differences have zero variance.
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub n: usize,
}

/// Baseline against each enhancement on PGR, paired over (task, seed) at
/// the largest capacity gap; `t` is positive when the enhancement is better.
pub fn significance_rows(records: &[RunRecord]) -> Result<Vec<SignificanceRow>> {
    let gap = largest_gap(records);
    let by = |method: &str| -> Result<BTreeMap<(String, u64), f64>> {
        let m: BTreeMap<(String, u64), f64> = gap
            .iter()
            .filter(|r| r.method == method)
            .filter_map(|r| r.pgr.map(|p| ((r.task.clone(), r.seed), p)))
            .collect();
        if !gap.iter().any(|r| r.method == method) {
            return Err(LabError::MissingConfiguration(format!("no records for method `{method}`")));
        }
        Ok(m)
    };
    let base_name = Recipe::BASELINE.to_string();
    let base = by(&base_name)?;
    SIGNIFICANCE_METHODS
        .iter()
        .map(|m| {
            let name = Recipe::from(*m).to_string();
            let other = by(&name)?;
            let keys: Vec<&(String, u64)> = base.keys().filter(|k| other.contains_key(*k)).collect();
            let a: Vec<f64> = keys.iter().map(|k| other[*k]).collect();
            let b: Vec<f64> = keys.iter().map(|k| base[*k]).collect();
            let (t, p) = match paired_t_test(&a, &b) {
                Ok(r) => (Some(r.t), Some(r.p)),
                Err(LabError::DegenerateTest) => (None, None),
                Err(e) => return Err(e),
            };
            Ok(SignificanceRow {
                method_a: base_name.clone(),
                method_b: name,
                metric: "pgr".into(),
                t,
                p,
                n: keys.len(),
            })
        })
        .collect()
}

/// Median over (task, seed) of agreement at the smallest student minus
/// agreement at the largest, per method and weak capacity.
pub fn agreement_declines(records: &[RunRecord]) -> Vec<(String, usize, usize, usize, usize, Option<f64>)> {
    let mut groups: BTreeMap<(String, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.method.clone(), r.weak_cap)).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((method, w), rs) in groups {
        let small = rs.iter().map(|r| r.strong_cap).min().expect("non-empty");
        let large = rs.iter().map(|r| r.strong_cap).max().expect("non-empty");
        let mut per: BTreeMap<(String, u64), (Option<f64>, Option<f64>)> = BTreeMap::new();
        for r in &rs {
            let e = per.entry((r.task.clone(), r.seed)).or_default();
            if r.strong_cap == small {
                e.0 = Some(r.agreement);
            }
            if r.strong_cap == large {
                e.1 = Some(r.agreement);
            }
        }
        let declines: Vec<f64> = per.values().filter_map(|(a, b)| Some(a.as_ref()? - b.as_ref()?)).collect();
        out.push((method, w, small, large, declines.len(), median(&declines)));
    }
    out
}

/// Writes the CSV (and SVG where meaningful) files of one report kind into
/// `out_dir` and returns their paths.
pub fn report(run: &RunReport, kind: ReportKind, out_dir: &Path, human_baseline: &BTreeMap<String, f64>) -> Result<Vec<PathBuf>> {
    require_records(run)?;
    fs::create_dir_all(out_dir)?;
    let recs = &run.records;
    let mut written = Vec::new();
    let mut emit_csv = |name: &str, header: &[&str], rows: Vec<Vec<String>>, comments: Vec<String>| -> Result<()> {
        let path = out_dir.join(name);
        write_csv(&path, header, &rows, &comments)?;
        written.push(path);
        Ok(())
    };
    let mut svgs: Vec<(String, String)> = Vec::new();
    match kind {
        ReportKind::Scaling => {
            let rows = scaling_rows(recs);
            emit_csv(
                "scaling.csv",
                &[
                    "method", "weak_cap", "strong_cap", "n", "acc_weak", "acc_ws", "acc_strong", "pgr", "agreement",
                    "pgr_out_of_range",
                ],
                rows.iter()
                    .map(|r| {
                        vec![
                            r.method.clone(),
                            r.weak_cap.to_string(),
                            r.strong_cap.to_string(),
                            r.n.to_string(),
                            r.acc_weak.to_string(),
                            r.acc_ws.to_string(),
                            r.acc_strong.to_string(),
                            fmt_opt(r.pgr),
                            r.agreement.to_string(),
                            r.pgr_out_of_range.to_string(),
                        ]
                    })
                    .collect(),
                vec!["medians over tasks and seeds; PGR outside [0,1] is kept and counted".into()],
            )?;
            let mut models: BTreeMap<(String, usize, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
            for r in recs {
                let e = models.entry((r.task.clone(), r.weak_cap, r.strong_cap)).or_default();
                e.0.push(r.acc_weak);
                e.1.push(r.acc_strong);
            }
            emit_csv(
                "models.csv",
                &["task", "weak_cap", "strong_cap", "acc_weak", "acc_strong", "human_baseline", "weak_class", "strong_class"],
                models
                    .iter()
                    .map(|((task, w, s), (aw, as_))| {
                        let h = human_baseline.get(task).copied().unwrap_or(0.9);
                        let (mw, ms) = (median(aw).expect("non-empty"), median(as_).expect("non-empty"));
                        vec![
                            task.clone(),
                            w.to_string(),
                            s.to_string(),
                            mw.to_string(),
                            ms.to_string(),
                            h.to_string(),
                            classify_model(mw, h).to_string(),
                            classify_model(ms, h).to_string(),
                        ]
                    })
                    .collect(),
                Vec::new(),
            )?;
            let w0 = rows.iter().map(|r| r.weak_cap).min().expect("rows");
            let mut pgr_series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            let mut acc_series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            for r in rows.iter().filter(|r| r.weak_cap == w0) {
                pgr_series.entry(r.method.clone()).or_default().push((r.strong_cap as f64, r.pgr.unwrap_or(f64::NAN)));
                acc_series.entry(r.method.clone()).or_default().push((r.strong_cap as f64, r.acc_ws));
            }
            svgs.push((
                "scaling_pgr.svg".into(),
                line_chart(&format!("Median PGR, supervisor capacity {w0}"), "student capacity", "PGR", &pgr_series.into_iter().collect::<Vec<_>>()),
            ));
            svgs.push((
                "scaling_accuracy.svg".into(),
                line_chart(
                    &format!("Median student accuracy, supervisor capacity {w0}"),
                    "student capacity",
                    "accuracy",
                    &acc_series.into_iter().collect::<Vec<_>>(),
                ),
            ));
        }
        ReportKind::Ablation => {
            let gap: Vec<RunRecord> = largest_gap(recs).into_iter().cloned().collect();
            let rows = ablation_table(&gap)?;
            let (w, s) = (gap[0].weak_cap, gap[0].strong_cap);
            emit_csv(
                "ablation.csv",
                &["removed", "method", "n", "median_accuracy", "median_pgr"],
                rows.iter()
                    .map(|r| vec![r.removed.clone(), r.method.clone(), r.n.to_string(), r.median_accuracy.to_string(), fmt_opt(r.median_pgr)])
                    .collect(),
                vec![format!("weak_cap {w}, strong_cap {s}; medians over tasks and seeds")],
            )?;
        }
        ReportKind::Significance => {
            let rows = significance_rows(recs)?;
            emit_csv(
                "significance.csv",
                &["method_a", "method_b", "metric", "t", "p"],
                rows.iter()
                    .map(|r| vec![r.method_a.clone(), r.method_b.clone(), r.metric.clone(), fmt_opt(r.t), fmt_opt(r.p)])
                    .collect(),
                Vec::new(),
            )?;
            let meta = serde_json::json!({
                "pairing": "task x seed at the largest capacity gap",
                "difference": "method_b - method_a",
                "sidedness": "two-sided",
                "pairs": rows.iter().map(|r| (r.method_b.clone(), r.n)).collect::<BTreeMap<_, _>>(),
            });
            let path = out_dir.join("significance.meta.json");
            fs::write(&path, serde_json::to_string_pretty(&meta)?)?;
            written.push(path);
        }
        ReportKind::Agreement => {
            let rows = scaling_rows(recs);
            emit_csv(
                "agreement.csv",
                &["method", "weak_cap", "strong_cap", "n", "agreement"],
                rows.iter()
                    .map(|r| vec![r.method.clone(), r.weak_cap.to_string(), r.strong_cap.to_string(), r.n.to_string(), r.agreement.to_string()])
                    .collect(),
                Vec::new(),
            )?;
            emit_csv(
                "agreement_decline.csv",
                &["method", "weak_cap", "small_cap", "large_cap", "n", "median_decline"],
                agreement_declines(recs)
                    .into_iter()
                    .map(|(m, w, a, b, n, d)| vec![m, w.to_string(), a.to_string(), b.to_string(), n.to_string(), fmt_opt(d)])
                    .collect(),
                Vec::new(),
            )?;
            let w0 = rows.iter().map(|r| r.weak_cap).min().expect("rows");
            let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            for r in rows.iter().filter(|r| r.weak_cap == w0) {
                series.entry(r.method.clone()).or_default().push((r.strong_cap as f64, r.agreement));
            }
            svgs.push((
                "agreement.svg".into(),
                line_chart("Student-supervisor agreement", "student capacity", "agreement", &series.into_iter().collect::<Vec<_>>()),
            ));
        }
        ReportKind::Saliency => {
            let mut groups: BTreeMap<(String, String, usize), Vec<&RunRecord>> = BTreeMap::new();
            for r in recs.iter().filter(|r| r.probe_after.is_some()) {
                groups.entry((r.task.clone(), r.method.clone(), r.strong_cap)).or_default().push(r);
            }
            if groups.is_empty() {
                return Err(LabError::MissingConfiguration("no records carry probe accuracies".into()));
            }
            let rows = groups
                .into_iter()
                .map(|((task, method, s), rs)| {
                    let col = |f: &dyn Fn(&RunRecord) -> Option<f64>| median(&rs.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
                    vec![
                        task,
                        method,
                        s.to_string(),
                        rs.len().to_string(),
                        fmt_opt(col(&|r| r.probe_init)),
                        fmt_opt(col(&|r| r.probe_start)),
                        fmt_opt(col(&|r| r.probe_after)),
                        fmt_opt(col(&|r| Some(r.probe_after? - r.probe_init?))),
                        fmt_opt(col(&|r| Some(r.probe_after? - r.probe_start?))),
                    ]
                })
                .collect();
            emit_csv(
                "saliency.csv",
                &[
                    "task", "method", "strong_cap", "n", "probe_init", "probe_start", "probe_after", "delta_vs_init",
                    "delta_vs_start",
                ],
                rows,
                vec!["probe_init: random initialization; probe_start: pretrained starting point; probe_after: trained student".into()],
            )?;
        }
        ReportKind::Errors => {
            let mut groups: BTreeMap<String, [usize; 3]> = BTreeMap::new();
            for r in recs {
                let e = groups.entry(r.method.clone()).or_default();
                for (i, c) in ErrorCategory::ALL.iter().enumerate() {
                    e[i] += r.errors.get(*c);
                }
            }
            let rows = groups
                .iter()
                .map(|(m, counts)| {
                    let total: usize = counts.iter().sum();
                    let mut row = vec![m.clone(), total.to_string()];
                    row.extend(counts.iter().map(|c| c.to_string()));
                    row.extend(counts.iter().map(|c| fmt_opt((total > 0).then(|| *c as f64 / total as f64))));
                    row
                })
                .collect();
            let mut header = vec!["method", "errors"];
            header.extend(ErrorCategory::ALL.iter().map(|c| c.name()));
            let fractions: Vec<String> = ErrorCategory::ALL.iter().map(|c| format!("frac_{}", c.name())).collect();
            header.extend(fractions.iter().map(String::as_str));
            emit_csv(
                "errors.csv",
                &header,
                rows,
                vec![
                    "overfit_weak_errors: student wrong and equal to a wrong supervisor".into(),
                    "evidence_extraction: student wrong where the supervisor was right".into(),
                    "selection_other: student and supervisor both wrong and different".into(),
                ],
            )?;
            let cats: Vec<String> = ErrorCategory::ALL.iter().map(|c| c.name().to_string()).collect();
            let series: Vec<(String, Vec<f64>)> = groups
                .iter()
                .map(|(m, counts)| {
                    let total = counts.iter().sum::<usize>().max(1) as f64;
                    (m.clone(), counts.iter().map(|c| *c as f64 / total).collect())
                })
                .collect();
            svgs.push(("errors.svg".into(), bar_chart("Distribution of error types", "fraction", &cats, &series)));
        }
    }
    for (name, body) in svgs {
        let path = out_dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

/// Leave-one-out method names in ablation row order, full method first.
pub fn ablation_methods() -> Vec<&'static str> {
    std::iter::once(FULL_METHOD).chain(ABLATION_COMPONENTS.iter().map(|c| c.1)).collect()
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelClass::Weak => "weak",
            ModelClass::Strong => "strong",
            ModelClass::AtHuman => "at_human",
        })
    }
}
