use super::grid::Path;
use crate::geometry::{Point2, Pose2};

pub const N_WAYPOINTS: usize = 5;
pub const WAYPOINT_SPACING: f64 = 0.3;

/// Upcoming path points in the robot frame, starting at the waypoint
/// nearest to the robot and spaced 0.3 m apart. Offsets past the goal
/// repeat the goal.
pub fn sample_waypoints(path: &Path, pose: &Pose2) -> [Point2; N_WAYPOINTS] {
    let c = path.nearest_index(pose.position);
    let base = path.cumulative[c];
    std::array::from_fn(|k| pose.world_to_local(path.point_at(base + WAYPOINT_SPACING * k as f64)))
}
