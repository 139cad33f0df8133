use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::cable::CableState;
use crate::dynamics::{Robot, RobotState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrabThresholds {
    /// Maximum tip distance from the cable (m).
    pub capture_radius: f64,
    /// Maximum tip speed at the grab (m/s).
    pub max_tip_speed: f64,
    /// Minimum horizontal distance of the tip past the pivot (m).
    pub min_advance: f64,
}

impl Default for GrabThresholds {
    fn default() -> Self {
        Self { capture_radius: 0.10, max_tip_speed: 3.0, min_advance: 0.0 }
    }
}

impl GrabThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.capture_radius > 0.0 && self.max_tip_speed > 0.0 && self.min_advance >= 0.0) {
            return Err(Error::param("grab", "capture_radius and max_tip_speed must be positive, min_advance >= 0"));
        }
        Ok(())
    }
}

/// What the swing gripper tries to catch.
#[derive(Debug, Clone, Copy)]
pub enum GrabGeometry<'a> {
    /// Surrogate plant: the horizontal line at this height.
    Line(f64),
    Cable(&'a CableState),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrabResult {
    pub success: bool,
    /// Closest point of the cable to the tip.
    pub grab_point: Vector2<f64>,
    pub tip: Vector2<f64>,
    pub distance: f64,
    pub tip_speed: f64,
    pub far_side: bool,
}

fn closest_on_polyline(nodes: &[Vector2<f64>], p: &Vector2<f64>) -> Vector2<f64> {
    nodes
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            let s = ((p - w[0]).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            w[0] + s * d
        })
        .min_by(|a, b| (a - p).norm().total_cmp(&(b - p).norm()))
        .unwrap_or(*p)
}

/// Checks whether the swing gripper can close on the cable. `pivot_x` is
/// the horizontal station of the pivot gripper.
pub fn grab_check(
    robot: &Robot,
    state: &RobotState,
    pivot_x: f64,
    geometry: GrabGeometry,
    thresholds: &GrabThresholds,
) -> GrabResult {
    let offset = Vector2::new(pivot_x, 0.0);
    let tip = robot.kinematics(&state.q).tip + offset;
    let grab_point = match geometry {
        GrabGeometry::Line(z) => Vector2::new(tip.x, z),
        GrabGeometry::Cable(cable) => closest_on_polyline(&cable.node_pos, &tip),
    };
    let distance = (tip - grab_point).norm();
    let tip_speed = robot.tip_velocity(state).norm();
    let far_side = tip.x - pivot_x > thresholds.min_advance;
    let success = far_side
        && distance <= thresholds.capture_radius
        && tip_speed < thresholds.max_tip_speed
        && tip.iter().all(|v| v.is_finite());
    GrabResult { success, grab_point, tip, distance, tip_speed, far_side }
}
