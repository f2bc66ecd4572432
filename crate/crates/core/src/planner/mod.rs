//! Layerwise planners: anything that can produce a trajectory for a given
//! decoder layer. Two backends live here, replay of recorded traces and
//! seeded synthetic generation.

mod format;
pub mod synthetic;

pub use format::{
    list_trace_files, load_trace, parse_trace, render_trace, save_trace, TRACE_EXTENSION,
};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Source of per-layer trajectories. Layers are 1-based.
///
/// `decode` must be deterministic and may be called for any increasing subset
/// of layers.
pub trait LayerwisePlanner {
    fn total_layers(&self) -> usize;

    fn decode(&self, layer: usize) -> Result<Trajectory>;
}

impl<P: LayerwisePlanner + ?Sized> LayerwisePlanner for &P {
    fn total_layers(&self) -> usize {
        (**self).total_layers()
    }

    fn decode(&self, layer: usize) -> Result<Trajectory> {
        (**self).decode(layer)
    }
}

/// Per-layer trajectories for one driving case together with its reference
/// prior. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTrace {
    scenario_id: String,
    reference: Trajectory,
    per_layer: Vec<Trajectory>,
}

impl ScenarioTrace {
    pub fn new(
        scenario_id: impl Into<String>,
        reference: Trajectory,
        per_layer: Vec<Trajectory>,
    ) -> Result<Self> {
        let scenario_id = scenario_id.into();
        validate_id(&scenario_id)?;
        if per_layer.is_empty() {
            return Err(Error::invalid(
                "total_layers",
                "a trace needs at least one layer",
            ));
        }
        for (i, traj) in per_layer.iter().enumerate() {
            if traj.len() != reference.len() {
                return Err(Error::invalid(
                    "layer",
                    format!(
                        "layer {} has {} points, reference has {}",
                        i + 1,
                        traj.len(),
                        reference.len()
                    ),
                ));
            }
            if traj.dt() != reference.dt() {
                return Err(Error::invalid(
                    "layer",
                    format!(
                        "layer {} has dt {}, reference has {}",
                        i + 1,
                        traj.dt(),
                        reference.dt()
                    ),
                ));
            }
        }
        Ok(Self {
            scenario_id,
            reference,
            per_layer,
        })
    }

    pub fn scenario_id(&self) -> &str {
        &self.scenario_id
    }

    pub fn reference(&self) -> &Trajectory {
        &self.reference
    }

    pub fn layers(&self) -> &[Trajectory] {
        &self.per_layer
    }

    pub fn horizon(&self) -> usize {
        self.reference.len()
    }

    pub fn dt(&self) -> f64 {
        self.reference.dt()
    }

    pub fn layer(&self, layer: usize) -> Result<&Trajectory> {
        layer
            .checked_sub(1)
            .and_then(|i| self.per_layer.get(i))
            .ok_or(Error::LayerOutOfRange {
                layer,
                total: self.per_layer.len(),
            })
    }
}

impl LayerwisePlanner for ScenarioTrace {
    fn total_layers(&self) -> usize {
        self.per_layer.len()
    }

    fn decode(&self, layer: usize) -> Result<Trajectory> {
        self.layer(layer).cloned()
    }
}

fn validate_id(id: &str) -> Result<()> {
    if id.is_empty() || id.chars().any(char::is_whitespace) {
        return Err(Error::invalid(
            "scenario_id",
            format!("must be non-empty without whitespace, got {id:?}"),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(n: usize, y: f64) -> Trajectory {
        let xy: Vec<_> = (1..=n).map(|i| (i as f64, y)).collect();
        Trajectory::from_xy(&xy, 0.5).unwrap()
    }

    #[test]
    fn decode_is_one_based_and_deterministic() {
        let t = ScenarioTrace::new("s", flat(3, 0.0), vec![flat(3, 1.0), flat(3, 2.0)]).unwrap();
        assert_eq!(t.total_layers(), 2);
        assert_eq!(t.decode(2).unwrap(), flat(3, 2.0));
        assert_eq!(t.decode(1).unwrap(), t.decode(1).unwrap());
        assert!(matches!(t.decode(0), Err(Error::LayerOutOfRange { .. })));
        assert!(matches!(
            t.decode(3),
            Err(Error::LayerOutOfRange { layer: 3, total: 2 })
        ));
    }

    #[test]
    fn rejects_inconsistent_layers() {
        let err =
            ScenarioTrace::new("s", flat(3, 0.0), vec![flat(3, 1.0), flat(2, 2.0)]).unwrap_err();
        assert!(err.to_string().contains("layer 2"), "{err}");
        assert!(ScenarioTrace::new("s", flat(3, 0.0), vec![]).is_err());
        assert!(ScenarioTrace::new("has space", flat(3, 0.0), vec![flat(3, 0.0)]).is_err());
    }
}
