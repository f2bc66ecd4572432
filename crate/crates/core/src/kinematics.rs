//! Kinematic bicycle rollout: turns a speed/steering command sequence into a
//! planar trajectory that can be scored like any planner output.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{Trajectory, Waypoint};

/// Default wheelbase [m] (configuration, not a measured vehicle).
pub const DEFAULT_WHEELBASE: f64 = 2.8;

/// Speed command and front-wheel angle for one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSample {
    speed: f64,
    steering_angle: f64,
}

impl ControlSample {
    pub fn new(speed: f64, steering_angle: f64) -> Result<Self> {
        if !(speed.is_finite() && speed >= 0.0) {
            return Err(Error::invalid(
                "speed",
                format!("must be >= 0, got {speed}"),
            ));
        }
        if !(steering_angle.is_finite() && steering_angle.abs() < FRAC_PI_2) {
            return Err(Error::invalid(
                "steering_angle",
                format!("|angle| must be < pi/2, got {steering_angle}"),
            ));
        }
        Ok(Self {
            speed,
            steering_angle,
        })
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn steering_angle(&self) -> f64 {
        self.steering_angle
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    /// Radians in (-pi, pi].
    pub heading: f64,
    pub wheelbase: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, heading: f64, wheelbase: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && heading.is_finite()) {
            return Err(Error::invalid("vehicle state", "pose must be finite"));
        }
        if !(wheelbase.is_finite() && wheelbase > 0.0) {
            return Err(Error::invalid(
                "wheelbase",
                format!("must be > 0, got {wheelbase}"),
            ));
        }
        Ok(Self {
            x,
            y,
            heading: normalize_angle(heading),
            wheelbase,
        })
    }
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Forward-Euler integration. Each step updates the heading first and then
/// advances the position along the new heading:
///
/// ```text
/// heading += speed / wheelbase * tan(steering) * dt
/// x += speed * cos(heading) * dt
/// y += speed * sin(heading) * dt
/// ```
///
/// Returns the post-step positions, one per control sample.
pub fn rollout_bicycle(
    initial: &VehicleState,
    controls: &[ControlSample],
    dt: f64,
) -> Result<Trajectory> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    if controls.is_empty() {
        return Err(Error::invalid(
            "controls",
            "need at least one control sample",
        ));
    }
    let mut state = *initial;
    let mut points = Vec::with_capacity(controls.len());
    for c in controls {
        state.heading = normalize_angle(
            state.heading + c.speed / state.wheelbase * c.steering_angle.tan() * dt,
        );
        state.x += c.speed * state.heading.cos() * dt;
        state.y += c.speed * state.heading.sin() * dt;
        points.push(Waypoint::new(state.x, state.y)?);
    }
    Trajectory::new(points, dt)
}
