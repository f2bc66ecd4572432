//! Exit controllers. The multi-hop controller checks `start_layer` first and
//! then jumps ahead by a stride chosen from how far the last score sits above
//! the tolerance. Full scan and fixed depth are the baselines it is compared
//! against.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::LayerwisePlanner;
use crate::trajectory::{is_admissible, DissimilarityScore, Metric, Tolerance, Trajectory};

pub const DEFAULT_START_LAYER: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "depth")]
pub enum PolicyKind {
    MultiHop,
    FullScan,
    FixedDepth(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitPolicy {
    pub kind: PolicyKind,
    /// Ignored by `FixedDepth` except for the reported score.
    pub delta: Tolerance,
    pub start_layer: usize,
    pub metric: Metric,
}

impl ExitPolicy {
    pub fn multi_hop(delta: Tolerance) -> Self {
        Self {
            kind: PolicyKind::MultiHop,
            delta,
            start_layer: DEFAULT_START_LAYER,
            metric: Metric::default(),
        }
    }

    pub fn full_scan(delta: Tolerance, start_layer: usize) -> Self {
        Self {
            kind: PolicyKind::FullScan,
            start_layer,
            ..Self::multi_hop(delta)
        }
    }

    pub fn fixed_depth(depth: usize, delta: Tolerance) -> Self {
        Self {
            kind: PolicyKind::FixedDepth(depth),
            ..Self::multi_hop(delta)
        }
    }

    pub fn with_start_layer(mut self, start_layer: usize) -> Self {
        self.start_layer = start_layer;
        self
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    /// Checks the policy against a planner with `total_layers` layers.
    pub fn validate(&self, total_layers: usize) -> Result<()> {
        match self.kind {
            PolicyKind::FixedDepth(depth) => {
                if depth == 0 || depth > total_layers {
                    return Err(Error::invalid(
                        "fixed_depth",
                        format!("{depth} is outside [1, {total_layers}]"),
                    ));
                }
            }
            PolicyKind::MultiHop | PolicyKind::FullScan => {
                if self.start_layer == 0 || self.start_layer > total_layers {
                    return Err(Error::invalid(
                        "start_layer",
                        format!("{} is outside [1, {total_layers}]", self.start_layer),
                    ));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for ExitPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PolicyKind::MultiHop => write!(
                f,
                "multihop(delta={}, start={}, metric={})",
                self.delta.delta(),
                self.start_layer,
                self.metric
            ),
            PolicyKind::FullScan => write!(
                f,
                "fullscan(delta={}, start={}, metric={})",
                self.delta.delta(),
                self.start_layer,
                self.metric
            ),
            PolicyKind::FixedDepth(depth) => write!(f, "fixed(depth={depth})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitOutcome {
    pub exit_layer: usize,
    /// Layers where the predicate was evaluated, strictly increasing.
    pub checked_layers: Vec<usize>,
    pub exit_score: DissimilarityScore,
    pub adopted: Trajectory,
    /// False when the run fell through to the last layer (or was fixed depth).
    pub exited_early: bool,
}

impl ExitOutcome {
    pub fn checks(&self) -> usize {
        self.checked_layers.len()
    }
}

/// Layer stride after observing `score`. Every comparison is strict, so a
/// score of exactly `2 * delta` yields 1.
pub fn next_stride(score: DissimilarityScore, tol: Tolerance) -> usize {
    let (s, d) = (score.value(), tol.delta());
    if s > 8.0 * d {
        8
    } else if s > 4.0 * d {
        4
    } else if s > 2.0 * d {
        2
    } else {
        1
    }
}

struct Probe<'a, P> {
    planner: &'a P,
    reference: &'a Trajectory,
    metric: Metric,
}

impl<P: LayerwisePlanner> Probe<'_, P> {
    fn eval(&self, layer: usize) -> Result<(Trajectory, DissimilarityScore)> {
        let wrap = |source: Error| Error::Decode {
            layer,
            source: Box::new(source),
        };
        let traj = self.planner.decode(layer).map_err(wrap)?;
        let score = self.metric.score(&traj, self.reference).map_err(wrap)?;
        Ok((traj, score))
    }
}

/// Shared loop of the scanning controllers: check `layer`, exit if admissible,
/// otherwise continue at `layer + stride(score)` clamped to the last layer.
fn scan<P: LayerwisePlanner>(
    planner: &P,
    reference: &Trajectory,
    policy: &ExitPolicy,
    stride: impl Fn(DissimilarityScore) -> usize,
) -> Result<ExitOutcome> {
    let total = planner.total_layers();
    policy.validate(total)?;
    let probe = Probe {
        planner,
        reference,
        metric: policy.metric,
    };
    let mut checked = Vec::new();
    let mut layer = policy.start_layer;
    loop {
        let (traj, score) = probe.eval(layer)?;
        checked.push(layer);
        let admissible = is_admissible(score, policy.delta);
        if admissible || layer == total {
            return Ok(ExitOutcome {
                exit_layer: layer,
                checked_layers: checked,
                exit_score: score,
                adopted: traj,
                exited_early: admissible,
            });
        }
        layer = (layer + stride(score)).min(total);
    }
}

pub fn run_multi_hop<P: LayerwisePlanner>(
    planner: &P,
    reference: &Trajectory,
    policy: &ExitPolicy,
) -> Result<ExitOutcome> {
    expect_kind(policy, "multi-hop", |k| matches!(k, PolicyKind::MultiHop))?;
    scan(planner, reference, policy, |score| {
        next_stride(score, policy.delta)
    })
}

pub fn run_full_scan<P: LayerwisePlanner>(
    planner: &P,
    reference: &Trajectory,
    policy: &ExitPolicy,
) -> Result<ExitOutcome> {
    expect_kind(policy, "full-scan", |k| matches!(k, PolicyKind::FullScan))?;
    scan(planner, reference, policy, |_| 1)
}

/// Decodes once at the fixed depth and adopts it. The score is reported but
/// never consulted.
pub fn run_fixed_depth<P: LayerwisePlanner>(
    planner: &P,
    reference: &Trajectory,
    policy: &ExitPolicy,
) -> Result<ExitOutcome> {
    let PolicyKind::FixedDepth(depth) = policy.kind else {
        return Err(Error::invalid(
            "policy",
            "run_fixed_depth needs a fixed-depth policy",
        ));
    };
    policy.validate(planner.total_layers())?;
    let probe = Probe {
        planner,
        reference,
        metric: policy.metric,
    };
    let (traj, score) = probe.eval(depth)?;
    Ok(ExitOutcome {
        exit_layer: depth,
        checked_layers: vec![depth],
        exit_score: score,
        adopted: traj,
        exited_early: false,
    })
}

/// Dispatches on `policy.kind`.
pub fn run_policy<P: LayerwisePlanner>(
    planner: &P,
    reference: &Trajectory,
    policy: &ExitPolicy,
) -> Result<ExitOutcome> {
    match policy.kind {
        PolicyKind::MultiHop => run_multi_hop(planner, reference, policy),
        PolicyKind::FullScan => run_full_scan(planner, reference, policy),
        PolicyKind::FixedDepth(_) => run_fixed_depth(planner, reference, policy),
    }
}

fn expect_kind(policy: &ExitPolicy, name: &str, ok: impl Fn(PolicyKind) -> bool) -> Result<()> {
    if ok(policy.kind) {
        Ok(())
    } else {
        Err(Error::invalid(
            "policy",
            format!("expected a {name} policy, got {policy}"),
        ))
    }
}
