//! Analytical latency accounting for early-exit runs.
//!
//! `latency = fixed + per_layer * exit_layer + check * checks`, where one
//! check is metric evaluation + intermediate feature extraction + action-head
//! projection. Nothing here is measured on hardware.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::ExitOutcome;
use crate::error::{Error, Result};

pub const METRIC_MS: f64 = 0.20;
pub const FEATURE_MS: f64 = 0.70;
pub const HEAD_MS: f64 = 4.00;

/// Full-depth run with no checks, ms.
pub const BASELINE_ANCHOR: Anchor = Anchor {
    layers: 32,
    checks: 0,
    total_ms: 381.0,
};
/// Exit at layer 16 after a single check, ms.
pub const MID_EXIT_ANCHOR: Anchor = Anchor {
    layers: 16,
    checks: 1,
    total_ms: 203.0,
};
/// Exit at layer 32 after 16 checks. Not consistent with the other two
/// anchors under a linear model; kept only to report the residual.
pub const LATE_EXIT_ANCHOR: Anchor = Anchor {
    layers: 32,
    checks: 16,
    total_ms: 440.0,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub fixed_ms: f64,
    pub per_layer_ms: f64,
    pub metric_ms: f64,
    pub feature_ms: f64,
    pub head_ms: f64,
}

impl Default for CostModel {
    /// The exact two-anchor fit of [`BASELINE_ANCHOR`] and [`MID_EXIT_ANCHOR`]
    /// with the default check decomposition.
    fn default() -> Self {
        Self {
            fixed_ms: 15.2,
            per_layer_ms: 11.43125,
            metric_ms: METRIC_MS,
            feature_ms: FEATURE_MS,
            head_ms: HEAD_MS,
        }
    }
}

impl CostModel {
    pub fn zero() -> Self {
        Self {
            fixed_ms: 0.0,
            per_layer_ms: 0.0,
            metric_ms: 0.0,
            feature_ms: 0.0,
            head_ms: 0.0,
        }
    }

    pub fn check_ms(&self) -> f64 {
        self.metric_ms + self.feature_ms + self.head_ms
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("fixed_ms", self.fixed_ms),
            ("per_layer_ms", self.per_layer_ms),
            ("metric_ms", self.metric_ms),
            ("feature_ms", self.feature_ms),
            ("head_ms", self.head_ms),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(
                    field,
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        Ok(())
    }

    pub fn predict(&self, layers: usize, checks: usize) -> f64 {
        self.fixed_ms + self.per_layer_ms * layers as f64 + self.check_ms() * checks as f64
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let model: CostModel = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat struct of floats always serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

pub fn latency(outcome: &ExitOutcome, model: &CostModel) -> f64 {
    model.predict(outcome.exit_layer, outcome.checks())
}

/// Percentage of layers skipped.
pub fn sparsity(exit_layer: usize, total_layers: usize) -> f64 {
    100.0 * (total_layers as f64 - exit_layer as f64) / total_layers as f64
}

/// An observed end-to-end latency for a given depth and check count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub layers: usize,
    pub checks: usize,
    pub total_ms: f64,
}

/// Least-squares fit of `fixed_ms` and `per_layer_ms` given a known check
/// decomposition. Exact for two anchors.
pub fn fit_cost_model(
    anchors: &[Anchor],
    metric_ms: f64,
    feature_ms: f64,
    head_ms: f64,
) -> Result<CostModel> {
    if anchors.len() < 2 {
        return Err(Error::DegenerateAnchors(format!(
            "need at least 2 anchors, got {}",
            anchors.len()
        )));
    }
    let check_ms = metric_ms + feature_ms + head_ms;
    let n = anchors.len() as f64;
    let xs: Vec<f64> = anchors.iter().map(|a| a.layers as f64).collect();
    let ys: Vec<f64> = anchors
        .iter()
        .map(|a| a.total_ms - check_ms * a.checks as f64)
        .collect();
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateAnchors(
            "all anchors share the same depth".to_string(),
        ));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let per_layer_ms = sxy / sxx;
    let model = CostModel {
        fixed_ms: mean_y - per_layer_ms * mean_x,
        per_layer_ms,
        metric_ms,
        feature_ms,
        head_ms,
    };
    model.validate()?;
    Ok(model)
}

/// Prediction of a fitted model at an anchor against its observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnchorResidual {
    pub anchor: Anchor,
    pub predicted_ms: f64,
    /// observed - predicted
    pub residual_ms: f64,
}

pub fn check_anchor(model: &CostModel, anchor: Anchor) -> AnchorResidual {
    let predicted_ms = model.predict(anchor.layers, anchor.checks);
    AnchorResidual {
        anchor,
        predicted_ms,
        residual_ms: anchor.total_ms - predicted_ms,
    }
}
