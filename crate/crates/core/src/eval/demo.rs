use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Pose2, Rect};
use crate::scan::{compute_tagds, min_pool, IcpParams, IcpStatus, TagdParams};
use crate::sim::{raycast_lidar, step_robot, Action, LidarParams, DT};

/// A walled corridor with one box obstacle walking toward a robot that
/// drives forward while turning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TagdDemoConfig {
    pub obstacle_speed: f64,
    pub robot_speed: f64,
    pub robot_turn: f64,
    /// Half-width of the uniform range noise (meters).
    pub noise: f64,
    pub steps: usize,
    pub seed: u64,
}

impl Default for TagdDemoConfig {
    fn default() -> Self {
        Self {
            obstacle_speed: 0.6,
            robot_speed: 0.5,
            robot_turn: 0.3,
            noise: 0.0,
            steps: 5,
            seed: 0,
        }
    }
}

const HALF_WIDTH: f64 = 1.1;
const OBSTACLE_HALF: f64 = 0.2;
/// Both robot and obstacle start on this line, facing each other.
const LANE_Y: f64 = 0.3;
/// Anchors closer than this to a surface count as lying on it.
const ON_SURFACE: f64 = 0.06;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    Obstacle,
    Static,
    /// Anchor near both, or on neither.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagdDemoRow {
    pub step: usize,
    pub group: usize,
    pub kind: GroupKind,
    pub displacement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagdDemoReport {
    pub config: TagdDemoConfig,
    pub rows: Vec<TagdDemoRow>,
    /// Mean displacement over obstacle groups of all steps.
    pub obstacle_mean: f64,
    pub obstacle_min: f64,
    pub obstacle_max: f64,
    /// Mean displacement over static-wall groups of all steps.
    pub static_mean: f64,
    pub static_max: f64,
    /// Ground-truth obstacle travel per step.
    pub expected: f64,
    pub icp_converged: usize,
}

fn walls() -> Vec<Rect> {
    vec![
        Rect::new(-2.5, HALF_WIDTH, 3.0, HALF_WIDTH + 0.2),
        Rect::new(-2.5, -HALF_WIDTH - 0.2, 3.0, -HALF_WIDTH),
        Rect::new(3.0, -HALF_WIDTH - 0.2, 3.2, HALF_WIDTH + 0.2),
        Rect::new(-2.7, -HALF_WIDTH - 0.2, -2.5, HALF_WIDTH + 0.2),
    ]
}

fn obstacle_at(step: usize, speed: f64) -> Rect {
    let x = 1.8 - speed * DT * step as f64;
    Rect::centered(Point2::new(x, LANE_Y), OBSTACLE_HALF, OBSTACLE_HALF)
}

fn classify(anchor_world: Point2, obstacle: &Rect, walls: &[Rect]) -> GroupKind {
    let d_obs = obstacle.distance_to(anchor_world);
    let d_wall = walls.iter().map(|w| w.distance_to(anchor_world)).fold(f64::INFINITY, f64::min);
    let clear = TagdParams::default().d_thresh + 0.1;
    if d_obs < ON_SURFACE && d_wall > clear {
        GroupKind::Obstacle
    } else if d_wall < ON_SURFACE && d_obs > clear {
        GroupKind::Static
    } else {
        GroupKind::Mixed
    }
}

/// Simulates the scene and reports every group displacement per step.
pub fn tagd_demo(config: &TagdDemoConfig) -> Result<TagdDemoReport> {
    if config.steps == 0 || !(config.obstacle_speed >= 0.0) || !(config.noise >= 0.0) {
        return Err(Error::Usage("tagd-demo needs steps > 0 and non-negative speed and noise".into()));
    }
    let walls = walls();
    let lidar = LidarParams {
        noise_amplitude: config.noise,
        ..LidarParams::noise_free()
    };
    let tagd_params = TagdParams::default();
    let icp = IcpParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pose = Pose2::new(-0.8, LANE_Y, 0.0);
    let action = Action::new(config.robot_speed, config.robot_turn);

    let sense = |pose: Pose2, step: usize, rng: &mut ChaCha8Rng| {
        let mut obstacles = walls.clone();
        obstacles.push(obstacle_at(step, config.obstacle_speed));
        min_pool(&raycast_lidar(&obstacles, pose, &lidar, step as u64, rng))
    };

    let mut prev = sense(pose, 0, &mut rng)?;
    let mut rows = Vec::new();
    let mut icp_converged = 0;
    for step in 1..=config.steps {
        pose = step_robot(pose, action, DT);
        let current = sense(pose, step, &mut rng)?;
        let result = compute_tagds(&prev, &current, &tagd_params, &icp);
        if result.alignment.status == IcpStatus::Converged {
            icp_converged += 1;
        }
        let obstacle = obstacle_at(step, config.obstacle_speed);
        for t in &result.tagds {
            let anchor = pose.local_to_world(t.center);
            rows.push(TagdDemoRow {
                step,
                group: t.group_index,
                kind: classify(anchor, &obstacle, &walls),
                displacement: t.displacement(),
            });
        }
        prev = current;
    }

    let obs: Vec<f64> = rows.iter().filter(|r| r.kind == GroupKind::Obstacle).map(|r| r.displacement).collect();
    if obs.is_empty() {
        return Err(Error::Degenerate("no group anchored on the obstacle".into()));
    }
    let stat: Vec<f64> = rows.iter().filter(|r| r.kind == GroupKind::Static).map(|r| r.displacement).collect();
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    Ok(TagdDemoReport {
        config: *config,
        obstacle_mean: mean(&obs),
        obstacle_min: obs.iter().copied().fold(f64::INFINITY, f64::min),
        obstacle_max: obs.iter().copied().fold(0.0, f64::max),
        static_mean: mean(&stat),
        static_max: stat.iter().copied().fold(0.0, f64::max),
        expected: config.obstacle_speed * DT,
        icp_converged,
        rows,
    })
}
