use serde::{Deserialize, Serialize};

use super::grid::Path;
use crate::geometry::Point2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub collision_weight: f64,
    pub guide_weight: f64,
    pub prox_weight: f64,
    /// Arc distance of the guidance point ahead of the nearest waypoint.
    pub guide_lookahead: f64,
    /// Obstacle distance below which the proximity penalty kicks in.
    pub d_prox: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            collision_weight: 10.0,
            guide_weight: 0.2,
            prox_weight: 3.0,
            guide_lookahead: 0.6,
            d_prox: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub collision: f64,
    pub guide: f64,
    pub prox: f64,
    pub total: f64,
}

/// Guidance point: `lookahead` meters of arc past the waypoint nearest to
/// `robot`, clamped at the goal.
pub fn guidance_point(path: &Path, robot: Point2, lookahead: f64) -> Point2 {
    let c = path.nearest_index(robot);
    path.point_at(path.cumulative[c] + lookahead)
}

/// Per-step reward. `obstacle_distance` is the smallest gap between the
/// robot hull and any scanned obstacle.
pub fn compute_reward(
    params: &RewardParams,
    collided: bool,
    robot: Point2,
    path: &Path,
    obstacle_distance: f64,
) -> RewardBreakdown {
    let collision = if collided { -1.0 } else { 0.0 };
    let guide = -guidance_point(path, robot, params.guide_lookahead).distance(robot);
    let prox = if obstacle_distance < params.d_prox {
        -(params.d_prox - obstacle_distance.min(params.d_prox)).abs()
    } else {
        0.0
    };
    RewardBreakdown {
        collision,
        guide,
        prox,
        total: params.collision_weight * collision + params.guide_weight * guide + params.prox_weight * prox,
    }
}
