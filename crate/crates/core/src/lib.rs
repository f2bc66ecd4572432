//! Action-guided dynamic early exit for layerwise trajectory planners.
//!
//! A planner exposes one trajectory per decoder layer. The controllers decide
//! at which layers to decode and compare against a reference prior, stopping
//! at the first layer whose deviation is below the tolerance. The cost model
//! turns the resulting exit depth and check count into latency, and the
//! harness aggregates all of it over trace datasets.

pub mod cli;
pub mod controller;
pub mod cost;
mod error;
pub mod harness;
pub mod kinematics;
pub mod planner;
pub mod trajectory;

pub use controller::{
    next_stride, run_fixed_depth, run_full_scan, run_multi_hop, run_policy, ExitOutcome,
    ExitPolicy, PolicyKind,
};
pub use cost::{fit_cost_model, latency, sparsity, Anchor, CostModel};
pub use error::{Error, Result};
pub use harness::{compare_policies, evaluate_dataset, Dataset, Report};
pub use planner::{load_trace, save_trace, LayerwisePlanner, ScenarioTrace};
pub use trajectory::{
    displacement_at, is_admissible, l2_dissimilarity, DissimilarityScore, Metric, Tolerance,
    Trajectory, Waypoint,
};
