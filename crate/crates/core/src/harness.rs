//! Batch evaluation of exit policies over a trace dataset.
//!
//! A dataset is a directory of `.trace` files iterated in sorted file-name
//! order. Scenarios are evaluated in parallel; rows are always assembled in
//! dataset order, so reports are byte-identical across runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controller::{run_policy, ExitPolicy, PolicyKind};
use crate::cost::{latency, sparsity, CostModel};
use crate::error::{Error, Result};
use crate::planner::{
    list_trace_files, parse_trace, render_trace, LayerwisePlanner, ScenarioTrace, TRACE_EXTENSION,
};
use crate::trajectory::{displacement_at, horizon_index, Tolerance};

/// Horizons (seconds) reported as L2@t columns when the trace span covers them.
pub const L2_HORIZONS: [f64; 3] = [1.0, 2.0, 3.0];

#[derive(Debug, Clone)]
pub struct DatasetEntry {
    /// File name, or `<scenario_id>.trace` for in-memory traces.
    pub name: String,
    pub trace: ScenarioTrace,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    entries: Vec<DatasetEntry>,
    total_layers: usize,
    digest: String,
}

impl Dataset {
    /// Loads every trace file in `dir`. The digest covers file names and raw
    /// bytes in iteration order.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let files = list_trace_files(dir)?;
        if files.is_empty() {
            return Err(Error::EmptyDataset(format!(
                "no .{TRACE_EXTENSION} files in {}",
                dir.display()
            )));
        }
        let mut hasher = Sha256::new();
        let mut entries = Vec::with_capacity(files.len());
        for path in files {
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let text = String::from_utf8(bytes).map_err(|_| Error::Parse {
                path: path.clone(),
                line: 0,
                message: "not valid UTF-8".to_string(),
            })?;
            let trace = parse_trace(&text, &path)?;
            let name = file_name(&path);
            hash_entry(&mut hasher, &name, text.as_bytes());
            entries.push(DatasetEntry { name, trace });
        }
        Self::assemble(entries, hasher)
    }

    /// Wraps in-memory traces. The digest covers their canonical rendering.
    pub fn from_traces(traces: Vec<ScenarioTrace>) -> Result<Self> {
        if traces.is_empty() {
            return Err(Error::EmptyDataset("no traces given".to_string()));
        }
        let mut hasher = Sha256::new();
        let entries = traces
            .into_iter()
            .map(|trace| {
                let name = format!("{}.{TRACE_EXTENSION}", trace.scenario_id());
                hash_entry(&mut hasher, &name, render_trace(&trace).as_bytes());
                DatasetEntry { name, trace }
            })
            .collect();
        Self::assemble(entries, hasher)
    }

    fn assemble(entries: Vec<DatasetEntry>, hasher: Sha256) -> Result<Self> {
        let first = &entries[0];
        let total_layers = first.trace.total_layers();
        if let Some(other) = entries
            .iter()
            .find(|e| e.trace.total_layers() != total_layers)
        {
            return Err(Error::HeterogeneousLayers {
                first_id: first.name.clone(),
                first: total_layers,
                other_id: other.name.clone(),
                other: other.trace.total_layers(),
            });
        }
        Ok(Self {
            entries,
            total_layers,
            digest: hex::encode(hasher.finalize()),
        })
    }

    pub fn entries(&self) -> &[DatasetEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_layers(&self) -> usize {
        self.total_layers
    }

    /// SHA-256, hex encoded.
    pub fn digest(&self) -> &str {
        &self.digest
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn hash_entry(hasher: &mut Sha256, name: &str, bytes: &[u8]) {
    hasher.update((name.len() as u64).to_le_bytes());
    hasher.update(name.as_bytes());
    hasher.update((bytes.len() as u64).to_le_bytes());
    hasher.update(bytes);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub scenario_id: String,
    pub exit_layer: usize,
    pub checks: usize,
    pub exit_score: f64,
    pub exited_early: bool,
    pub latency_ms: f64,
    pub sparsity_pct: f64,
    /// Displacement between the adopted trajectory and the reference, keyed
    /// by horizon (`"1s"`, ...), plus `"avg"` over the horizons present.
    pub l2_at: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
}

impl Summary {
    /// Mean plus nearest-rank percentiles. `values` must be non-empty.
    pub fn of(values: &[f64]) -> Self {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean,
            p50: nearest_rank(&sorted, 50.0),
            p95: nearest_rank(&sorted, 95.0),
        }
    }
}

fn nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    let rank = (pct / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scenarios: usize,
    pub early_exits: usize,
    pub exit_layer: Summary,
    pub checks: Summary,
    pub exit_score: Summary,
    pub latency_ms: Summary,
    pub sparsity_pct: Summary,
    pub l2_at: BTreeMap<String, Summary>,
}

impl Aggregate {
    pub fn from_rows(rows: &[ScenarioRow]) -> Self {
        let col =
            |f: &dyn Fn(&ScenarioRow) -> f64| Summary::of(&rows.iter().map(f).collect::<Vec<_>>());
        let mut l2_cols: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for row in rows {
            for (k, v) in &row.l2_at {
                l2_cols.entry(k.clone()).or_default().push(*v);
            }
        }
        Self {
            scenarios: rows.len(),
            early_exits: rows.iter().filter(|r| r.exited_early).count(),
            exit_layer: col(&|r| r.exit_layer as f64),
            checks: col(&|r| r.checks as f64),
            exit_score: col(&|r| r.exit_score),
            latency_ms: col(&|r| r.latency_ms),
            sparsity_pct: col(&|r| r.sparsity_pct),
            l2_at: l2_cols
                .into_iter()
                .map(|(k, v)| (k, Summary::of(&v)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub policy: ExitPolicy,
    pub cost_model: CostModel,
    pub total_layers: usize,
    pub dataset_digest: String,
    pub aggregate: Aggregate,
    pub exit_histogram: BTreeMap<usize, usize>,
    pub per_scenario: Vec<ScenarioRow>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        let mut s =
            serde_json::to_string_pretty(self).map_err(|e| Error::Serialize(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// One row per scenario.
    pub fn to_csv(&self) -> String {
        let l2_keys: Vec<&String> = self.aggregate.l2_at.keys().collect();
        let mut out = String::from(
            "scenario_id,exit_layer,checks,exit_score,exited_early,latency_ms,sparsity_pct",
        );
        for k in &l2_keys {
            write!(out, ",l2_{k}").unwrap();
        }
        out.push('\n');
        for r in &self.per_scenario {
            write!(
                out,
                "{},{},{},{},{},{},{}",
                r.scenario_id,
                r.exit_layer,
                r.checks,
                r.exit_score,
                r.exited_early,
                r.latency_ms,
                r.sparsity_pct
            )
            .unwrap();
            for k in &l2_keys {
                match r.l2_at.get(*k) {
                    Some(v) => write!(out, ",{v}").unwrap(),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn summary_line(&self) -> String {
        let a = &self.aggregate;
        let mut line = format!(
            "{} scenarios={} early={} exit_layer(mean/p50/p95)={:.2}/{}/{} checks={:.2} sparsity={:.2}% latency(mean/p50/p95)={:.2}/{:.2}/{:.2}ms",
            self.policy,
            a.scenarios,
            a.early_exits,
            a.exit_layer.mean,
            a.exit_layer.p50,
            a.exit_layer.p95,
            a.checks.mean,
            a.sparsity_pct.mean,
            a.latency_ms.mean,
            a.latency_ms.p50,
            a.latency_ms.p95,
        );
        for (k, s) in &a.l2_at {
            write!(line, " L2@{k}={:.3}", s.mean).unwrap();
        }
        line
    }
}

fn evaluate_entry(
    entry: &DatasetEntry,
    policy: &ExitPolicy,
    model: &CostModel,
) -> Result<ScenarioRow> {
    let trace = &entry.trace;
    let in_trace = |e: Error| Error::InTrace {
        path: PathBuf::from(&entry.name),
        source: Box::new(e),
    };
    let outcome = run_policy(trace, trace.reference(), policy).map_err(in_trace)?;
    let mut l2_at = BTreeMap::new();
    let mut sum = 0.0;
    for h in L2_HORIZONS {
        if horizon_index(trace.reference(), h).is_ok() {
            let d = displacement_at(&outcome.adopted, trace.reference(), h).map_err(in_trace)?;
            sum += d;
            l2_at.insert(format!("{h}s"), d);
        }
    }
    if !l2_at.is_empty() {
        let avg = sum / l2_at.len() as f64;
        l2_at.insert("avg".to_string(), avg);
    }
    Ok(ScenarioRow {
        scenario_id: trace.scenario_id().to_string(),
        exit_layer: outcome.exit_layer,
        checks: outcome.checks(),
        exit_score: outcome.exit_score.value(),
        exited_early: outcome.exited_early,
        latency_ms: latency(&outcome, model),
        sparsity_pct: sparsity(outcome.exit_layer, trace.total_layers()),
        l2_at,
    })
}

pub fn evaluate_dataset(
    dataset: &Dataset,
    policy: &ExitPolicy,
    model: &CostModel,
) -> Result<Report> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("dataset has no scenarios".to_string()));
    }
    model.validate()?;
    policy.validate(dataset.total_layers())?;
    let rows = dataset
        .entries()
        .par_iter()
        .map(|entry| evaluate_entry(entry, policy, model))
        .collect::<Result<Vec<_>>>()?;
    let mut exit_histogram = BTreeMap::new();
    for r in &rows {
        *exit_histogram.entry(r.exit_layer).or_insert(0) += 1;
    }
    Ok(Report {
        policy: *policy,
        cost_model: *model,
        total_layers: dataset.total_layers(),
        dataset_digest: dataset.digest().to_string(),
        aggregate: Aggregate::from_rows(&rows),
        exit_histogram,
        per_scenario: rows,
    })
}

pub fn evaluate_dir(
    dir: impl AsRef<Path>,
    policy: &ExitPolicy,
    model: &CostModel,
) -> Result<Report> {
    evaluate_dataset(&Dataset::load(dir)?, policy, model)
}

pub fn compare_policies(
    dataset: &Dataset,
    policies: &[ExitPolicy],
    model: &CostModel,
) -> Result<Vec<Report>> {
    policies
        .iter()
        .map(|p| evaluate_dataset(dataset, p, model))
        .collect()
}

/// Fixed depth used for the fixed-exit baseline: 24 on 32 layers, 3/4 of the
/// depth in general.
pub fn default_fixed_depth(total_layers: usize) -> usize {
    (3 * total_layers).div_ceil(4).max(1)
}

/// The full method and the five ablation variants, labelled.
pub fn standard_ablation(
    total_layers: usize,
    fixed_depth: Option<usize>,
) -> Result<Vec<(String, ExitPolicy)>> {
    let tol = Tolerance::new;
    let base = ExitPolicy::multi_hop(tol(1.0)?)
        .with_start_layer(crate::controller::DEFAULT_START_LAYER.min(total_layers));
    let depth = fixed_depth.unwrap_or_else(|| default_fixed_depth(total_layers));
    Ok(vec![
        ("Full (multi-hop)".to_string(), base),
        (
            "B1 fixed exit depth".to_string(),
            ExitPolicy {
                kind: PolicyKind::FixedDepth(depth),
                ..base
            },
        ),
        (
            "B2 full scan from L1".to_string(),
            ExitPolicy {
                kind: PolicyKind::FullScan,
                start_layer: 1,
                ..base
            },
        ),
        (
            "B3 full scan from start".to_string(),
            ExitPolicy {
                kind: PolicyKind::FullScan,
                ..base
            },
        ),
        (
            "B4 loose delta=2.0".to_string(),
            ExitPolicy {
                delta: tol(2.0)?,
                ..base
            },
        ),
        (
            "B5 strict delta=0.5".to_string(),
            ExitPolicy {
                delta: tol(0.5)?,
                ..base
            },
        ),
    ])
}

/// Side-by-side table of labelled reports.
pub fn render_comparison(labels: &[String], reports: &[Report]) -> String {
    let width = labels.iter().map(String::len).max().unwrap_or(0).max(7);
    let mut out = format!(
        "{:<width$}  {:>8}  {:>9}  {:>8}  {:>10}  {:>8}  {:>8}\n",
        "variant", "sps(%)", "lat(ms)", "p95(ms)", "exit_layer", "checks", "L2avg(m)"
    );
    for (label, r) in labels.iter().zip(reports) {
        let a = &r.aggregate;
        let l2 = a
            .l2_at
            .get("avg")
            .map(|s| format!("{:.3}", s.mean))
            .unwrap_or_else(|| "-".to_string());
        writeln!(
            out,
            "{:<width$}  {:>8.2}  {:>9.2}  {:>8.2}  {:>10.2}  {:>8.2}  {:>8}",
            label,
            a.sparsity_pct.mean,
            a.latency_ms.mean,
            a.latency_ms.p95,
            a.exit_layer.mean,
            a.checks.mean,
            l2
        )
        .unwrap();
    }
    out
}
