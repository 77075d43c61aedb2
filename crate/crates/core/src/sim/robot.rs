use serde::{Deserialize, Serialize};

use super::{DT, V_MAX, W_MAX};
use crate::geometry::{normalize_angle, Point2, Pose2};

/// Linear and angular velocity command.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub v: f64,
    pub w: f64,
}

impl Action {
    pub const fn new(v: f64, w: f64) -> Self {
        Self { v, w }
    }

    /// Clips into `v in [0, V_MAX]`, `w in [-W_MAX, W_MAX]`; NaN maps to 0.
    pub fn clipped(self) -> Self {
        let clamp = |x: f64, lo: f64, hi: f64| if x.is_nan() { 0.0 } else { x.clamp(lo, hi) };
        Self {
            v: clamp(self.v, 0.0, V_MAX),
            w: clamp(self.w, -W_MAX, W_MAX),
        }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.v, self.w]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose2,
    pub command: Action,
    pub radius: f64,
}

/// Unicycle motion over `dt` with constant `(v, w)`, integrated exactly
/// along the circular arc.
pub fn step_robot(pose: Pose2, action: Action, dt: f64) -> Pose2 {
    let Action { v, w } = action;
    let theta = pose.heading;
    let dtheta = w * dt;
    let delta = if dtheta.abs() < 1e-9 {
        // second-order expansion avoids dividing by a vanishing w
        let mid = theta + 0.5 * dtheta;
        Point2::new(v * dt * mid.cos(), v * dt * mid.sin())
    } else {
        let r = v / w;
        Point2::new(
            r * ((theta + dtheta).sin() - theta.sin()),
            -r * ((theta + dtheta).cos() - theta.cos()),
        )
    };
    Pose2 {
        position: pose.position + delta,
        heading: normalize_angle(theta + dtheta),
    }
}

pub fn step_robot_default(pose: Pose2, action: Action) -> Pose2 {
    step_robot(pose, action.clipped(), DT)
}
