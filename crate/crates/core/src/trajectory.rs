//! Planar trajectories, the dissimilarity metrics compared against a
//! reference prior, and the exit predicate.
//!
//! Coordinates are ego-centric meters. Two trajectories are comparable only
//! when they have the same number of points and the same time step; there is
//! no resampling.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
}

impl Waypoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::invalid(
                "waypoint",
                format!("coordinates must be finite, got ({x}, {y})"),
            ));
        }
        Ok(Self { x, y })
    }

    pub fn distance(&self, other: &Waypoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A time-indexed sequence of waypoints. Point `i` (0-based) sits at time
/// `(i + 1) * dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    points: Vec<Waypoint>,
    dt: f64,
}

impl Trajectory {
    pub fn new(points: Vec<Waypoint>, dt: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("trajectory", "needs at least one point"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
        }
        Ok(Self { points, dt })
    }

    pub fn from_xy(xy: &[(f64, f64)], dt: f64) -> Result<Self> {
        let points = xy
            .iter()
            .map(|&(x, y)| Waypoint::new(x, y))
            .collect::<Result<Vec<_>>>()?;
        Self::new(points, dt)
    }

    pub fn points(&self) -> &[Waypoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Time of the last point.
    pub fn span(&self) -> f64 {
        self.points.len() as f64 * self.dt
    }

    pub fn same_shape(&self, other: &Trajectory) -> bool {
        self.len() == other.len() && self.dt == other.dt
    }

    /// Applies `f` to every point. Fails if `f` produces a non-finite point.
    pub fn map_points(&self, mut f: impl FnMut(&Waypoint) -> (f64, f64)) -> Result<Self> {
        let points = self
            .points
            .iter()
            .map(|p| {
                let (x, y) = f(p);
                Waypoint::new(x, y)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(points, self.dt)
    }
}

/// Spatial deviation in meters.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DissimilarityScore(f64);

impl DissimilarityScore {
    pub fn new(value: f64) -> Result<Self> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::invalid(
                "dissimilarity score",
                format!("must be finite and >= 0, got {value}"),
            ));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Exit tolerance in meters, strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Tolerance(f64);

impl Tolerance {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::invalid(
                "delta",
                format!("must be finite and > 0, got {delta}"),
            ));
        }
        Ok(Self(delta))
    }

    pub fn delta(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Tolerance {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Tolerance::new(value)
    }
}

impl From<Tolerance> for f64 {
    fn from(t: Tolerance) -> f64 {
        t.0
    }
}

fn check_shape(pred: &Trajectory, reference: &Trajectory) -> Result<()> {
    if pred.len() != reference.len() {
        return Err(Error::ShapeMismatch {
            what: "trajectory lengths differ",
            left: pred.len(),
            right: reference.len(),
        });
    }
    if pred.dt != reference.dt {
        return Err(Error::ShapeMismatch {
            what: "time steps differ",
            left: pred.len(),
            right: reference.len(),
        });
    }
    Ok(())
}

/// Mean pointwise Euclidean distance between two index-aligned trajectories.
pub fn l2_dissimilarity(pred: &Trajectory, reference: &Trajectory) -> Result<DissimilarityScore> {
    check_shape(pred, reference)?;
    let sum: f64 = pred
        .points
        .iter()
        .zip(&reference.points)
        .map(|(p, r)| p.distance(r))
        .sum();
    DissimilarityScore::new(sum / pred.len() as f64)
}

/// Euclidean distance at the point nearest to `horizon` seconds.
pub fn displacement_at(pred: &Trajectory, reference: &Trajectory, horizon: f64) -> Result<f64> {
    check_shape(pred, reference)?;
    let index = horizon_index(reference, horizon)?;
    Ok(pred.points[index - 1].distance(&reference.points[index - 1]))
}

/// 1-based point index addressed by a horizon in seconds.
pub fn horizon_index(traj: &Trajectory, horizon: f64) -> Result<usize> {
    let out_of_range = || Error::OutOfHorizon {
        horizon,
        min: traj.dt,
        max: traj.span(),
    };
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(out_of_range());
    }
    let index = (horizon / traj.dt).round();
    if index < 1.0 || index > traj.len() as f64 {
        return Err(out_of_range());
    }
    Ok(index as usize)
}

/// Exit predicate: strictly below the tolerance.
pub fn is_admissible(score: DissimilarityScore, tol: Tolerance) -> bool {
    score.0 < tol.0
}

/// Which dissimilarity drives the exit predicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "horizon_s")]
pub enum Metric {
    MeanL2,
    L2AtHorizon(f64),
}

impl Default for Metric {
    fn default() -> Self {
        Metric::L2AtHorizon(2.0)
    }
}

impl Metric {
    pub fn score(&self, pred: &Trajectory, reference: &Trajectory) -> Result<DissimilarityScore> {
        match *self {
            Metric::MeanL2 => l2_dissimilarity(pred, reference),
            Metric::L2AtHorizon(h) => DissimilarityScore::new(displacement_at(pred, reference, h)?),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::MeanL2 => write!(f, "mean"),
            Metric::L2AtHorizon(h) => write!(f, "l2@{h}s"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    /// Accepts `mean` or `l2@<seconds>s`, e.g. `l2@2s`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "mean" || s == "mean-l2" {
            return Ok(Metric::MeanL2);
        }
        let horizon = s
            .strip_prefix("l2@")
            .map(|rest| rest.strip_suffix('s').unwrap_or(rest))
            .and_then(|h| h.parse::<f64>().ok())
            .filter(|h| h.is_finite() && *h > 0.0)
            .ok_or_else(|| {
                Error::invalid("metric", format!("expected `mean` or `l2@<t>s`, got `{s}`"))
            })?;
        Ok(Metric::L2AtHorizon(horizon))
    }
}
