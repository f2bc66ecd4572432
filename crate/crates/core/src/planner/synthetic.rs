//! Seeded synthetic traces.
//!
//! Every generator draws from `ChaCha8Rng::seed_from_u64(seed)` (rand_chacha),
//! so a seed fixes the output across platforms and releases. Per-layer
//! trajectories are the reference displaced along +y, perpendicular to the
//! reference heading (+x). Both the mean-L2 and the L2-at-horizon metric of
//! layer `l` therefore equal the target curve value `d(l)`.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::ScenarioTrace;
use crate::error::{Error, Result};
use crate::trajectory::{Tolerance, Trajectory};

/// Speed of the straight-line reference, m/s.
pub const REFERENCE_SPEED: f64 = 10.0;

/// Earliest layer with L2@2s < 2.0 m, counted over 640 cases.
pub const EXIT_LAYER_COUNTS: [u32; 32] = [
    0, 0, 0, 0, 0, 0, 1, 0, //
    1, 0, 0, 0, 26, 28, 18, 16, //
    3, 5, 8, 4, 8, 6, 8, 43, //
    146, 1, 26, 32, 26, 3, 5, 226,
];

/// Reported number of cases behind [`EXIT_LAYER_COUNTS`].
pub const EXIT_LAYER_CASES: u32 = 640;

/// The layer distribution of [`EXIT_LAYER_COUNTS`]. Layers with zero count are
/// omitted.
pub fn reference_exit_distribution() -> BTreeMap<usize, f64> {
    let total: u32 = EXIT_LAYER_COUNTS.iter().sum();
    EXIT_LAYER_COUNTS
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| (i + 1, c as f64 / total as f64))
        .collect()
}

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent seed for item `index` of a batch generated from `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut rng = rng_for(base);
    rng.set_stream(index);
    rng.next_u64()
}

/// Shape of a synthetic dissimilarity curve
/// `d(l) = base_scale * exp(-decay_rate * l) + floor + noise(l)`, plus a linear
/// divergence term after `divergence_layer` when set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProfile {
    pub base_scale: f64,
    pub decay_rate: f64,
    pub floor: f64,
    pub noise_sd: f64,
    pub divergence_layer: Option<usize>,
    pub divergence_slope: f64,
    pub seed: u64,
}

impl Default for SyntheticProfile {
    fn default() -> Self {
        Self {
            base_scale: 20.0,
            decay_rate: 0.15,
            floor: 0.5,
            noise_sd: 0.0,
            divergence_layer: None,
            divergence_slope: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticProfile {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |field: &'static str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(
                    field,
                    format!("must be finite and >= 0, got {v}"),
                ))
            }
        };
        nonneg("base_scale", self.base_scale)?;
        nonneg("decay_rate", self.decay_rate)?;
        nonneg("floor", self.floor)?;
        nonneg("noise_sd", self.noise_sd)?;
        if self.divergence_layer.is_some() {
            nonneg("divergence_slope", self.divergence_slope)?;
        }
        Ok(())
    }

    /// Noise-free curve value at `layer`.
    pub fn closed_form(&self, layer: usize) -> f64 {
        let l = layer as f64;
        let mut d = self.base_scale * (-self.decay_rate * l).exp() + self.floor;
        if let Some(div) = self.divergence_layer {
            if layer > div {
                d += self.divergence_slope * (layer - div) as f64;
            }
        }
        d
    }

    /// Curve values for layers `1..=total_layers`, noise included.
    pub fn curve(&self, total_layers: usize) -> Result<Vec<f64>> {
        self.validate()?;
        let mut rng = rng_for(self.seed);
        let noise = Normal::new(0.0, self.noise_sd)
            .map_err(|e| Error::invalid("noise_sd", e.to_string()))?;
        Ok((1..=total_layers)
            .map(|l| {
                let eps = if self.noise_sd > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                (self.closed_form(l) + eps).max(0.0)
            })
            .collect())
    }
}

fn check_shape(total_layers: usize, horizon: usize, dt: f64) -> Result<()> {
    if total_layers == 0 {
        return Err(Error::invalid("total_layers", "must be >= 1"));
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be >= 1"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    Ok(())
}

/// Builds a trace whose layer `l` sits exactly `curve[l - 1]` meters to the
/// side of a straight constant-speed reference.
pub fn scenario_from_curve(
    scenario_id: impl Into<String>,
    curve: &[f64],
    horizon: usize,
    dt: f64,
) -> Result<ScenarioTrace> {
    check_shape(curve.len(), horizon, dt)?;
    let xs: Vec<f64> = (1..=horizon)
        .map(|t| REFERENCE_SPEED * t as f64 * dt)
        .collect();
    let reference = Trajectory::from_xy(&xs.iter().map(|&x| (x, 0.0)).collect::<Vec<_>>(), dt)?;
    let per_layer = curve
        .iter()
        .map(|&d| {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::invalid(
                    "curve",
                    format!("values must be finite and >= 0, got {d}"),
                ));
            }
            Trajectory::from_xy(&xs.iter().map(|&x| (x, d)).collect::<Vec<_>>(), dt)
        })
        .collect::<Result<Vec<_>>>()?;
    ScenarioTrace::new(scenario_id, reference, per_layer)
}

pub fn generate_scenario(
    profile: &SyntheticProfile,
    total_layers: usize,
    horizon: usize,
    dt: f64,
) -> Result<ScenarioTrace> {
    check_shape(total_layers, horizon, dt)?;
    let curve = profile.curve(total_layers)?;
    scenario_from_curve(format!("synthetic-{}", profile.seed), &curve, horizon, dt)
}

/// Curve whose per-layer decrease never exceeds `delta`. About one step in
/// five is non-decreasing.
pub fn lipschitz_curve(seed: u64, delta: Tolerance, total_layers: usize) -> Vec<f64> {
    let delta = delta.delta();
    let mut rng = rng_for(seed);
    let mut d = rng.random_range(0.0..24.0 * delta);
    let mut curve = Vec::with_capacity(total_layers);
    curve.push(d);
    for _ in 1..total_layers {
        if rng.random_bool(0.2) {
            d += rng.random_range(0.0..delta);
        } else {
            d = (d - rng.random_range(0.0..delta)).max(0.0);
        }
        curve.push(d);
    }
    curve
}

pub fn generate_lipschitz_scenario(
    seed: u64,
    delta: Tolerance,
    total_layers: usize,
    horizon: usize,
    dt: f64,
) -> Result<ScenarioTrace> {
    check_shape(total_layers, horizon, dt)?;
    let curve = lipschitz_curve(seed, delta, total_layers);
    scenario_from_curve(format!("lipschitz-{seed}"), &curve, horizon, dt)
}

/// Curve whose first layer strictly below `delta` is `exit_layer`; every later
/// layer stays below `delta` too.
pub fn curve_with_earliest_exit(
    seed: u64,
    exit_layer: usize,
    delta: Tolerance,
    total_layers: usize,
) -> Result<Vec<f64>> {
    if exit_layer == 0 || exit_layer > total_layers {
        return Err(Error::LayerOutOfRange {
            layer: exit_layer,
            total: total_layers,
        });
    }
    let delta = delta.delta();
    let mut rng = rng_for(seed);
    Ok((1..=total_layers)
        .map(|l| {
            if l < exit_layer {
                let gap = (exit_layer - 1 - l) as f64;
                delta * (1.25 + 0.4 * gap) + rng.random_range(0.0..0.5 * delta)
            } else {
                delta * rng.random_range(0.05..0.9)
            }
        })
        .collect())
}

/// Draws `n` layers from a categorical distribution over layer indices.
pub fn sample_population(
    distribution: &BTreeMap<usize, f64>,
    n: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    let sum: f64 = distribution.values().sum();
    if (sum - 1.0).abs() > 1e-9 || distribution.values().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::NotNormalized(sum));
    }
    let layers: Vec<usize> = distribution.keys().copied().collect();
    let weights = WeightedIndex::new(distribution.values().copied())
        .map_err(|_| Error::NotNormalized(sum))?;
    let mut rng = rng_for(seed);
    Ok((0..n).map(|_| layers[weights.sample(&mut rng)]).collect())
}
