//! Randomized indoor simulator: layouts, pedestrians, lidar, robot and reward.

pub mod env;
pub mod grid;
pub mod layout;
pub mod lidar;
pub mod pedestrian;
pub mod reward;
pub mod robot;
pub mod waypoints;

pub use env::{Env, EnvParams, EpisodeConfig, Observation, StepOutcome, Terminal};
pub use grid::{plan_astar, OccupancyGrid, Path};
pub use layout::{generate_layout, robot_path, LayoutParams, SceneKind, WorldLayout};
pub use lidar::{cast_ray, raycast_lidar, LidarParams};
pub use pedestrian::{spawn_pedestrians, Pedestrian, PedestrianKind, SpawnSpec};
pub use reward::{compute_reward, guidance_point, RewardBreakdown, RewardParams};
pub use robot::{step_robot, step_robot_default, Action, RobotState};
pub use waypoints::{sample_waypoints, N_WAYPOINTS, WAYPOINT_SPACING};

/// Control period (seconds).
pub const DT: f64 = 0.2;
pub const V_MAX: f64 = 1.0;
pub const W_MAX: f64 = std::f64::consts::PI;
pub const ROBOT_RADIUS: f64 = 0.18;
pub const GRID_RESOLUTION: f64 = 0.1;
pub const GOAL_TOLERANCE: f64 = 0.2;
/// Episode length cap in steps.
pub const T_TIMEOUT: usize = 150;
