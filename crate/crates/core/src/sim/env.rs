use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::Path;
use super::layout::{generate_layout, robot_path, LayoutParams, SceneKind, WorldLayout};
use super::lidar::{raycast_lidar, LidarParams};
use super::pedestrian::{spawn_pedestrians, Pedestrian, SpawnSpec};
use super::reward::{compute_reward, RewardBreakdown, RewardParams};
use super::robot::{step_robot, Action, RobotState};
use super::waypoints::{sample_waypoints, N_WAYPOINTS};
use super::{DT, GOAL_TOLERANCE, ROBOT_RADIUS, T_TIMEOUT};
use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Point2, Pose2, Rect};
use crate::scan::{compute_tagds, min_pool, IcpParams, IcpStatus, PooledScan, Tagd, TagdParams};

/// Static simulator settings shared by every episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvParams {
    pub layout: LayoutParams,
    pub lidar: LidarParams,
    pub icp: IcpParams,
    pub tagd: TagdParams,
    pub reward: RewardParams,
    pub robot_radius: f64,
    pub pedestrian_half_extent: (f64, f64),
    pub max_steps: usize,
    pub goal_tolerance: f64,
    pub dt: f64,
    /// Initial heading is the path direction plus uniform noise of this
    /// half-width (radians).
    pub start_heading_noise: f64,
    /// Walls shape planning but are removed from sensing and collisions.
    pub open_space: bool,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self {
            layout: LayoutParams::default(),
            lidar: LidarParams::default(),
            icp: IcpParams::default(),
            tagd: TagdParams::default(),
            reward: RewardParams::default(),
            robot_radius: ROBOT_RADIUS,
            pedestrian_half_extent: (0.2, 0.2),
            max_steps: T_TIMEOUT,
            goal_tolerance: GOAL_TOLERANCE,
            dt: DT,
            start_heading_noise: 0.5,
            open_space: false,
        }
    }
}

/// Per-episode randomization. Everything about the scene is a function of
/// `seed` and these ranges, never of the acting policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub seed: u64,
    /// Scene kind is drawn uniformly from this list.
    pub scenes: Vec<SceneKind>,
    pub n_dynamic: (usize, usize),
    pub n_static: (usize, usize),
    pub ped_speed: (f64, f64),
}

impl EpisodeConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            scenes: SceneKind::ALL.to_vec(),
            n_dynamic: (1, 2),
            n_static: (1, 2),
            ped_speed: (0.5, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenes.is_empty() {
            return Err(Error::Config("episode needs at least one scene kind".into()));
        }
        if self.n_dynamic.0 > self.n_dynamic.1 || self.n_static.0 > self.n_static.1 {
            return Err(Error::Config("pedestrian count range is inverted".into()));
        }
        if !(self.ped_speed.0 >= 0.0 && self.ped_speed.0 <= self.ped_speed.1) {
            return Err(Error::Config("pedestrian speed range is invalid".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub scan: PooledScan,
    /// Previous pooled scan, unaligned.
    pub prev_scan: PooledScan,
    pub tagds: Vec<Tagd>,
    pub waypoints: [Point2; N_WAYPOINTS],
    pub icp_status: IcpStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Terminal {
    None,
    Collision,
    Timeout,
    Goal,
}

impl Terminal {
    pub fn is_done(self) -> bool {
        self != Terminal::None
    }

    /// Whether the stored transition ends the return. Timeouts are
    /// truncations and keep bootstrapping.
    pub fn is_absorbing(self) -> bool {
        matches!(self, Terminal::Collision | Terminal::Goal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reward: RewardBreakdown,
    pub terminal: Terminal,
    pub step: usize,
}

/// One randomized navigation episode.
#[derive(Debug, Clone)]
pub struct Env {
    params: EnvParams,
    config: EpisodeConfig,
    layout: WorldLayout,
    /// Walls used for sensing and collisions (empty in open-space mode).
    physical_walls: Vec<Rect>,
    path: Path,
    pedestrians: Vec<Pedestrian>,
    robot: RobotState,
    step: usize,
    terminal: Terminal,
    observation: Observation,
    noise_rng: ChaCha8Rng,
}

impl Env {
    pub fn new(params: EnvParams, config: EpisodeConfig) -> Result<Self> {
        config.validate()?;
        params.icp.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed);
        noise_rng.set_stream(1);

        let kind = config.scenes[rng.random_range(0..config.scenes.len())];
        let layout = generate_layout(kind, &mut rng, &params.layout)?;
        let path = robot_path(&layout)?;
        let spec = SpawnSpec {
            n_dynamic: rng.random_range(config.n_dynamic.0..=config.n_dynamic.1),
            n_static: rng.random_range(config.n_static.0..=config.n_static.1),
            speed_range: config.ped_speed,
            half_extent: params.pedestrian_half_extent,
        };
        let pedestrians = spawn_pedestrians(&layout, &layout.grid(0.0), &path, &spec, &mut rng)?;

        let ahead = path.point_at(0.5) - path.start();
        let noise = if params.start_heading_noise > 0.0 {
            rng.random_range(-params.start_heading_noise..=params.start_heading_noise)
        } else {
            0.0
        };
        let pose = Pose2 {
            position: layout.start,
            heading: normalize_angle(ahead.y.atan2(ahead.x) + noise),
        };
        let physical_walls = if params.open_space {
            Vec::new()
        } else {
            layout.walls.clone()
        };

        let mut env = Self {
            robot: RobotState {
                pose,
                command: Action::default(),
                radius: params.robot_radius,
            },
            params,
            config,
            layout,
            physical_walls,
            path,
            pedestrians,
            step: 0,
            terminal: Terminal::None,
            observation: Observation {
                scan: PooledScan {
                    points: Vec::new(),
                    timestamp_step: 0,
                },
                prev_scan: PooledScan {
                    points: Vec::new(),
                    timestamp_step: 0,
                },
                tagds: Vec::new(),
                waypoints: [Point2::ORIGIN; N_WAYPOINTS],
                icp_status: IcpStatus::Unavailable,
            },
            noise_rng,
        };
        let scan = env.sense()?;
        env.observation = env.observe(scan.clone(), scan);
        Ok(env)
    }

    pub fn params(&self) -> &EnvParams {
        &self.params
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn layout(&self) -> &WorldLayout {
        &self.layout
    }

    pub fn robot_path(&self) -> &Path {
        &self.path
    }

    pub fn pedestrians(&self) -> &[Pedestrian] {
        &self.pedestrians
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    pub fn terminal(&self) -> Terminal {
        self.terminal
    }

    pub fn observation(&self) -> &Observation {
        &self.observation
    }

    /// Everything the lidar and the collision check see right now.
    pub fn obstacles(&self) -> Vec<Rect> {
        let mut all = self.physical_walls.clone();
        all.extend(self.pedestrians.iter().map(Pedestrian::footprint));
        all
    }

    fn sense(&mut self) -> Result<PooledScan> {
        let raw = raycast_lidar(
            &self.obstacles(),
            self.robot.pose,
            &self.params.lidar,
            self.step as u64,
            &mut self.noise_rng,
        );
        min_pool(&raw)
    }

    fn observe(&self, prev_scan: PooledScan, scan: PooledScan) -> Observation {
        let tagd = compute_tagds(&prev_scan, &scan, &self.params.tagd, &self.params.icp);
        Observation {
            waypoints: sample_waypoints(&self.path, &self.robot.pose),
            tagds: tagd.tagds,
            icp_status: tagd.alignment.status,
            scan,
            prev_scan,
        }
    }

    fn in_collision(&self) -> bool {
        let p = self.robot.pose.position;
        self.obstacles()
            .iter()
            .any(|r| r.distance_to(p) < self.robot.radius)
    }

    /// Advances pedestrians and robot by one control step.
    pub fn step(&mut self, action: Action) -> Result<(Observation, StepOutcome)> {
        if self.terminal.is_done() {
            return Err(Error::Usage(format!(
                "episode already ended ({:?}) at step {}",
                self.terminal, self.step
            )));
        }
        let action = action.clipped();
        for ped in &mut self.pedestrians {
            ped.advance(self.params.dt);
        }
        self.robot.command = action;
        self.robot.pose = step_robot(self.robot.pose, action, self.params.dt);
        self.step += 1;

        let collided = self.in_collision();
        let scan = self.sense()?;
        let prev = std::mem::replace(&mut self.observation.scan, PooledScan {
            points: Vec::new(),
            timestamp_step: 0,
        });
        let obstacle_distance = (scan.min_range() - self.robot.radius).max(0.0);
        self.observation = self.observe(prev, scan);

        let position = self.robot.pose.position;
        let reward = compute_reward(&self.params.reward, collided, position, &self.path, obstacle_distance);
        self.terminal = if collided {
            Terminal::Collision
        } else if position.distance(self.path.goal()) <= self.params.goal_tolerance {
            Terminal::Goal
        } else if self.step >= self.params.max_steps {
            Terminal::Timeout
        } else {
            Terminal::None
        };
        Ok((
            self.observation.clone(),
            StepOutcome {
                reward,
                terminal: self.terminal,
                step: self.step,
            },
        ))
    }

    /// Test hook: places the robot, bypassing kinematics.
    pub fn set_robot_pose(&mut self, pose: Pose2) {
        self.robot.pose = pose;
    }

    /// Test hook: replaces the pedestrian set.
    pub fn set_pedestrians(&mut self, pedestrians: Vec<Pedestrian>) {
        self.pedestrians = pedestrians;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::pedestrian::PedestrianKind;

    fn corridor_config(seed: u64) -> EpisodeConfig {
        EpisodeConfig {
            seed,
            scenes: vec![SceneKind::Corridor],
            n_dynamic: (0, 0),
            n_static: (0, 0),
            ped_speed: (0.5, 1.0),
        }
    }

    #[test]
    fn idle_robot_times_out() {
        let mut env = Env::new(EnvParams::default(), corridor_config(1)).unwrap();
        let mut last = Terminal::None;
        for k in 1..=150 {
            let (_, out) = env.step(Action::new(0.0, 0.0)).unwrap();
            last = out.terminal;
            if k < 150 {
                assert_eq!(out.terminal, Terminal::None);
            }
        }
        assert_eq!(last, Terminal::Timeout);
        assert!(matches!(env.step(Action::default()), Err(Error::Usage(_))));
    }

    #[test]
    fn goal_reached_within_tolerance() {
        let mut env = Env::new(EnvParams::default(), corridor_config(2)).unwrap();
        let goal = env.robot_path().goal();
        // 0.19 m behind the goal along +x, facing away so the step does not move it closer
        env.set_robot_pose(Pose2::new(goal.x - 0.15, goal.y, 0.0));
        let (_, out) = env.step(Action::new(0.0, 0.0)).unwrap();
        assert_eq!(out.terminal, Terminal::Goal);
    }

    #[test]
    fn overlapping_pedestrian_is_collision() {
        let mut env = Env::new(EnvParams::default(), corridor_config(3)).unwrap();
        let p = env.robot().pose.position + Point2::new(0.3, 0.0);
        env.set_pedestrians(vec![Pedestrian {
            half_extent: (0.2, 0.2),
            path: Path::from_points(vec![p]),
            speed: 0.0,
            arc_position: 0.0,
            direction: 1.0,
            kind: PedestrianKind::Static,
        }]);
        let (_, out) = env.step(Action::new(0.0, 0.0)).unwrap();
        assert_eq!(out.terminal, Terminal::Collision);
        assert_eq!(out.reward.collision, -1.0);
    }

    #[test]
    fn reward_total_decomposes() {
        let mut env = Env::new(EnvParams::default(), EpisodeConfig::new(4)).unwrap();
        for _ in 0..30 {
            let (_, out) = env.step(Action::new(0.6, 0.2)).unwrap();
            let r = out.reward;
            assert_eq!(r.total, 10.0 * r.collision + 0.2 * r.guide + 3.0 * r.prox);
            assert!(r.guide < 0.0);
            if out.terminal.is_done() {
                break;
            }
        }
    }

    #[test]
    fn first_observation_has_zero_tagd_motion() {
        let env = Env::new(EnvParams::default(), EpisodeConfig::new(5)).unwrap();
        let obs = env.observation();
        assert_eq!(obs.scan.len(), 180);
        assert_eq!(obs.tagds.len(), 30);
        assert!(obs.tagds.iter().all(|t| t.displacement() == 0.0));
    }
}
