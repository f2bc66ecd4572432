//! Command-line front end. `cli_main` takes explicit output streams so the
//! binary and the tests drive the same code.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::controller::{
    run_full_scan, run_multi_hop, ExitPolicy, PolicyKind, DEFAULT_START_LAYER,
};
use crate::cost::{
    check_anchor, fit_cost_model, Anchor, CostModel, FEATURE_MS, HEAD_MS, METRIC_MS,
};
use crate::cost::{BASELINE_ANCHOR, LATE_EXIT_ANCHOR, MID_EXIT_ANCHOR};
use crate::error::{Error, Result};
use crate::harness::{
    compare_policies, evaluate_dataset, render_comparison, standard_ablation, Dataset,
};
use crate::planner::synthetic::{
    curve_with_earliest_exit, derive_seed, generate_lipschitz_scenario, lipschitz_curve,
    reference_exit_distribution, sample_population, scenario_from_curve, SyntheticProfile,
};
use crate::planner::{save_trace, TRACE_EXTENSION};
use crate::trajectory::{Metric, Tolerance};

/// Residual above which an anchor is flagged as inconsistent with a fit, ms.
const ANCHOR_SLACK_MS: f64 = 0.5;

#[derive(Debug, Parser)]
#[command(
    name = "action-exit",
    version,
    about = "Action-guided early exit for layerwise trajectory planners"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a trace dataset.
    Gen(GenArgs),
    /// Evaluate one exit policy over a dataset.
    Run(RunArgs),
    /// Compare the full method against the B1-B5 ablation variants.
    Ablate(AblateArgs),
    /// Check multi-hop against full scan on seeded bounded-decrease traces.
    OracleCheck(OracleArgs),
    /// Fit fixed and per-layer cost from latency anchors.
    FitCost(FitArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GenMode {
    /// Exponential decay profile with optional noise and divergence.
    Profile,
    /// Per-layer decrease bounded by --delta.
    Lipschitz,
    /// Earliest-exit layers drawn from the reference exit-layer distribution.
    ExitMix,
}

#[derive(Debug, Args)]
struct Shape {
    #[arg(long, default_value_t = 32)]
    layers: usize,
    #[arg(long, default_value_t = 6)]
    horizon: usize,
    #[arg(long, default_value_t = 0.5)]
    dt: f64,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = GenMode::Profile)]
    mode: GenMode,
    #[command(flatten)]
    shape: Shape,
    /// Tolerance the lipschitz and exit-mix modes are built around.
    #[arg(long, default_value_t = 2.0)]
    delta: f64,
    #[arg(long, default_value_t = 20.0)]
    base_scale: f64,
    #[arg(long, default_value_t = 0.15)]
    decay_rate: f64,
    #[arg(long, default_value_t = 0.5)]
    floor: f64,
    #[arg(long, default_value_t = 0.3)]
    noise_sd: f64,
    #[arg(long)]
    divergence_layer: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    divergence_slope: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyArg {
    Multihop,
    Fullscan,
    Fixed,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    traces: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = PolicyArg::Multihop)]
    policy: PolicyArg,
    #[arg(long, default_value_t = DEFAULT_START_LAYER)]
    start_layer: usize,
    /// Required with --policy fixed.
    #[arg(long)]
    fixed_depth: Option<usize>,
    /// `l2@<t>s` or `mean`.
    #[arg(long, default_value = "l2@2s")]
    metric: Metric,
    /// TOML cost model; defaults to the built-in calibration.
    #[arg(long)]
    cost: Option<PathBuf>,
    /// JSON report path.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-scenario CSV export.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[arg(long)]
    traces: PathBuf,
    #[arg(long)]
    fixed_depth: Option<usize>,
    #[arg(long, default_value = "l2@2s")]
    metric: Metric,
    #[arg(long)]
    cost: Option<PathBuf>,
    /// JSON file holding every report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    layers: usize,
    #[arg(long, default_value_t = DEFAULT_START_LAYER)]
    start_layer: usize,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// `layers,checks,total_ms`; repeatable. Defaults to the 381 ms and 203 ms rows.
    #[arg(long = "anchor", value_parser = parse_anchor)]
    anchors: Vec<Anchor>,
    /// Anchors to compare against the fit; defaults to the 440 ms row.
    #[arg(long = "probe", value_parser = parse_anchor)]
    probes: Vec<Anchor>,
    #[arg(long, default_value_t = METRIC_MS)]
    metric_ms: f64,
    #[arg(long, default_value_t = FEATURE_MS)]
    feature_ms: f64,
    #[arg(long, default_value_t = HEAD_MS)]
    head_ms: f64,
    /// Write the fitted model as TOML.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_anchor(s: &str) -> std::result::Result<Anchor, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [layers, checks, total] = parts.as_slice() else {
        return Err(format!("expected layers,checks,total_ms, got {s:?}"));
    };
    Ok(Anchor {
        layers: layers.parse().map_err(|e| format!("layers: {e}"))?,
        checks: checks.parse().map_err(|e| format!("checks: {e}"))?,
        total_ms: total.parse().map_err(|e| format!("total_ms: {e}"))?,
    })
}

/// Runs the CLI and returns the process exit status: 0 on success, 1 on a
/// runtime error, 2 on a usage error.
pub fn cli_main<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Gen(args) => gen(args, out),
        Command::Run(args) => run(args, out),
        Command::Ablate(args) => ablate(args, out),
        Command::OracleCheck(args) => oracle_check(args, out),
        Command::FitCost(args) => fit_cost(args, out),
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn write_file(path: &PathBuf, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_cost(path: &Option<PathBuf>) -> Result<CostModel> {
    match path {
        Some(p) => CostModel::load(p),
        None => Ok(CostModel::default()),
    }
}

fn gen(args: GenArgs, out: &mut dyn Write) -> Result<i32> {
    if args.count == 0 {
        return Err(Error::invalid("count", "must be >= 1"));
    }
    let Shape {
        layers,
        horizon,
        dt,
    } = args.shape;
    let delta = Tolerance::new(args.delta)?;
    let exits = match args.mode {
        GenMode::ExitMix => {
            if layers < 32 {
                return Err(Error::invalid(
                    "layers",
                    "exit-mix mode needs at least 32 layers",
                ));
            }
            Some(sample_population(
                &reference_exit_distribution(),
                args.count,
                args.seed,
            )?)
        }
        _ => None,
    };
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    let width = args.count.to_string().len().max(5);
    for i in 0..args.count {
        let seed = derive_seed(args.seed, i as u64);
        let curve = match args.mode {
            GenMode::Profile => SyntheticProfile {
                base_scale: args.base_scale,
                decay_rate: args.decay_rate,
                floor: args.floor,
                noise_sd: args.noise_sd,
                divergence_layer: args.divergence_layer,
                divergence_slope: args.divergence_slope,
                seed,
            }
            .curve(layers)?,
            GenMode::Lipschitz => lipschitz_curve(seed, delta, layers),
            GenMode::ExitMix => {
                let exit = exits.as_ref().expect("sampled above")[i];
                curve_with_earliest_exit(seed, exit, delta, layers)?
            }
        };
        let id = format!("scn{i:0width$}");
        let trace = scenario_from_curve(&id, &curve, horizon, dt)?;
        save_trace(&trace, args.out.join(format!("{id}.{TRACE_EXTENSION}")))?;
    }
    write_out(
        out,
        &format!("wrote {} traces to {}\n", args.count, args.out.display()),
    )?;
    Ok(0)
}

fn run(args: RunArgs, out: &mut dyn Write) -> Result<i32> {
    let delta = Tolerance::new(args.delta)?;
    let kind =
        match args.policy {
            PolicyArg::Multihop => PolicyKind::MultiHop,
            PolicyArg::Fullscan => PolicyKind::FullScan,
            PolicyArg::Fixed => PolicyKind::FixedDepth(args.fixed_depth.ok_or_else(|| {
                Error::invalid("fixed_depth", "--policy fixed needs --fixed-depth")
            })?),
        };
    let policy = ExitPolicy {
        kind,
        delta,
        start_layer: args.start_layer,
        metric: args.metric,
    };
    let model = load_cost(&args.cost)?;
    let dataset = Dataset::load(&args.traces)?;
    let report = evaluate_dataset(&dataset, &policy, &model)?;
    write_file(&args.out, &report.to_json()?)?;
    if let Some(csv) = &args.csv {
        write_file(csv, &report.to_csv())?;
    }
    write_out(out, &format!("{}\n", report.summary_line()))?;
    Ok(0)
}

fn ablate(args: AblateArgs, out: &mut dyn Write) -> Result<i32> {
    let model = load_cost(&args.cost)?;
    let dataset = Dataset::load(&args.traces)?;
    let variants = standard_ablation(dataset.total_layers(), args.fixed_depth)?;
    let (labels, policies): (Vec<String>, Vec<ExitPolicy>) = variants
        .into_iter()
        .map(|(l, p)| (l, p.with_metric(args.metric)))
        .unzip();
    let reports = compare_policies(&dataset, &policies, &model)?;
    if let Some(path) = &args.out {
        let labelled: Vec<_> = labels
            .iter()
            .zip(&reports)
            .map(|(label, report)| serde_json::json!({ "label": label, "report": report }))
            .collect();
        let mut json =
            serde_json::to_string_pretty(&labelled).map_err(|e| Error::Serialize(e.to_string()))?;
        json.push('\n');
        write_file(path, &json)?;
    }
    write_out(out, &render_comparison(&labels, &reports))?;
    Ok(0)
}

/// Result of comparing multi-hop against full scan on one seeded trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleCase {
    pub seed: u64,
    pub multi_hop_exit: usize,
    pub full_scan_exit: usize,
    pub multi_hop_checks: usize,
    pub full_scan_checks: usize,
}

impl OracleCase {
    pub fn agrees(&self) -> bool {
        self.multi_hop_exit == self.full_scan_exit && self.multi_hop_checks <= self.full_scan_checks
    }
}

/// Runs both controllers on `n` bounded-decrease traces whose seeds derive
/// from `seed`.
pub fn oracle_suite(
    n: usize,
    delta: Tolerance,
    seed: u64,
    layers: usize,
    start_layer: usize,
) -> Result<Vec<OracleCase>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let case_seed = derive_seed(seed, i);
            let trace = generate_lipschitz_scenario(case_seed, delta, layers, 6, 0.5)?;
            let mh = run_multi_hop(
                &trace,
                trace.reference(),
                &ExitPolicy::multi_hop(delta).with_start_layer(start_layer),
            )?;
            let fs = run_full_scan(
                &trace,
                trace.reference(),
                &ExitPolicy::full_scan(delta, start_layer),
            )?;
            Ok(OracleCase {
                seed: case_seed,
                multi_hop_exit: mh.exit_layer,
                full_scan_exit: fs.exit_layer,
                multi_hop_checks: mh.checks(),
                full_scan_checks: fs.checks(),
            })
        })
        .collect()
}

fn oracle_check(args: OracleArgs, out: &mut dyn Write) -> Result<i32> {
    if args.n == 0 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    let delta = Tolerance::new(args.delta)?;
    let cases = oracle_suite(args.n, delta, args.seed, args.layers, args.start_layer)?;
    let agree = cases.iter().filter(|c| c.agrees()).count();
    let mh_checks: usize = cases.iter().map(|c| c.multi_hop_checks).sum();
    let fs_checks: usize = cases.iter().map(|c| c.full_scan_checks).sum();
    let mut text = format!("{agree}/{} agree\n", args.n);
    text.push_str(&format!(
        "mean checks: multi-hop {:.3}, full scan {:.3}\n",
        mh_checks as f64 / args.n as f64,
        fs_checks as f64 / args.n as f64
    ));
    for c in cases.iter().filter(|c| !c.agrees()).take(10) {
        text.push_str(&format!(
            "disagreement seed={} exit {} vs {} checks {} vs {}\n",
            c.seed, c.multi_hop_exit, c.full_scan_exit, c.multi_hop_checks, c.full_scan_checks
        ));
    }
    write_out(out, &text)?;
    Ok(if agree == args.n { 0 } else { 1 })
}

fn fit_cost(args: FitArgs, out: &mut dyn Write) -> Result<i32> {
    let anchors = if args.anchors.is_empty() {
        vec![BASELINE_ANCHOR, MID_EXIT_ANCHOR]
    } else {
        args.anchors
    };
    let probes = if args.probes.is_empty() {
        vec![LATE_EXIT_ANCHOR]
    } else {
        args.probes
    };
    let model = fit_cost_model(&anchors, args.metric_ms, args.feature_ms, args.head_ms)?;
    let mut text = format!(
        "fixed_ms = {:.4}\nper_layer_ms = {:.5}\ncheck_ms = {:.2} ({} + {} + {})\n",
        model.fixed_ms,
        model.per_layer_ms,
        model.check_ms(),
        model.metric_ms,
        model.feature_ms,
        model.head_ms
    );
    for (label, list) in [("anchor", &anchors), ("probe", &probes)] {
        for &a in list.iter() {
            let r = check_anchor(&model, a);
            let verdict = if r.residual_ms.abs() <= ANCHOR_SLACK_MS {
                "consistent"
            } else {
                "INCONSISTENT"
            };
            text.push_str(&format!(
                "{label} {} layers / {} checks: observed {:.1} ms, predicted {:.1} ms, residual {:+.1} ms ({verdict})\n",
                a.layers, a.checks, a.total_ms, r.predicted_ms, r.residual_ms
            ));
        }
    }
    if let Some(path) = &args.out {
        write_file(path, &model.to_toml())?;
    }
    write_out(out, &text)?;
    Ok(0)
}
