use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::{plan_astar, OccupancyGrid, Path};
use super::layout::WorldLayout;
use crate::error::{Error, Result};
use crate::geometry::{Point2, Rect};

const MAX_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PedestrianKind {
    Dynamic,
    Static,
}

/// Cuboid pedestrian walking back and forth along its own path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pedestrian {
    pub half_extent: (f64, f64),
    pub path: Path,
    pub speed: f64,
    pub arc_position: f64,
    /// +1 walks toward the path end, -1 back toward its start.
    pub direction: f64,
    pub kind: PedestrianKind,
}

impl Pedestrian {
    pub fn position(&self) -> Point2 {
        self.path.point_at(self.arc_position)
    }

    pub fn footprint(&self) -> Rect {
        Rect::centered(self.position(), self.half_extent.0, self.half_extent.1)
    }

    /// Advances along the path, reflecting off either end.
    pub fn advance(&mut self, dt: f64) {
        if self.kind == PedestrianKind::Static || self.speed == 0.0 {
            return;
        }
        let len = self.path.length();
        if len <= 0.0 {
            return;
        }
        let mut s = self.arc_position + self.direction * self.speed * dt;
        // a step can overshoot at most once for paths longer than v*dt
        while s > len || s < 0.0 {
            if s > len {
                s = 2.0 * len - s;
            } else {
                s = -s;
            }
            self.direction = -self.direction;
        }
        self.arc_position = s;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpawnSpec {
    pub n_dynamic: usize,
    pub n_static: usize,
    pub speed_range: (f64, f64),
    pub half_extent: (f64, f64),
}

impl Default for SpawnSpec {
    fn default() -> Self {
        Self {
            n_dynamic: 2,
            n_static: 1,
            speed_range: (0.5, 1.0),
            half_extent: (0.2, 0.2),
        }
    }
}

fn sample_speed(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn near_path(rng: &mut impl Rng, path: &Path, arc: (f64, f64), lateral: f64) -> Point2 {
    let len = path.length();
    let s = rng.random_range(arc.0 * len..=arc.1 * len);
    let p = path.point_at(s);
    let ahead = path.point_at(s + 0.1) - path.point_at(s - 0.1);
    let n = ahead.norm();
    let normal = if n > 1e-9 {
        Point2::new(-ahead.y / n, ahead.x / n)
    } else {
        Point2::new(0.0, 1.0)
    };
    p + normal * rng.random_range(-lateral..=lateral)
}

struct Placement<'a> {
    layout: &'a WorldLayout,
    grid: &'a OccupancyGrid,
    clearance: f64,
}

impl Placement<'_> {
    fn ok(&self, p: Point2) -> bool {
        self.layout.bounds.contains(p)
            && self.grid.is_free(p)
            && self.layout.wall_clearance(p) >= self.clearance
    }
}

/// Places `spec.n_dynamic` walking and `spec.n_static` standing pedestrians.
///
/// The first walker's endpoints are drawn around the robot path (starting
/// near the robot goal and walking toward the robot start); every further
/// walker gets an A* path crossing the robot path. Pedestrian paths are
/// planned over the uninflated wall map; pedestrians ignore each other.
pub fn spawn_pedestrians(
    layout: &WorldLayout,
    grid: &OccupancyGrid,
    robot_path: &Path,
    spec: &SpawnSpec,
    rng: &mut impl Rng,
) -> Result<Vec<Pedestrian>> {
    let half_diag = spec.half_extent.0.hypot(spec.half_extent.1);
    let place = Placement {
        layout,
        grid,
        clearance: spec.half_extent.0.max(spec.half_extent.1) + 0.05,
    };
    let start = robot_path.start();
    let goal = robot_path.goal();
    let keep_off_robot = |p: Point2| p.distance(start) >= 1.2 + half_diag && p.distance(goal) >= 0.6 + half_diag;
    let fail = |what: &str| Error::Generation {
        what: what.to_string(),
        attempts: MAX_ATTEMPTS,
    };

    let mut peds = Vec::with_capacity(spec.n_dynamic + spec.n_static);
    for index in 0..spec.n_dynamic {
        let mut placed = None;
        for attempt in 0..MAX_ATTEMPTS {
            let crossing = index > 0 && attempt < MAX_ATTEMPTS / 2;
            let (a, b) = if crossing {
                let c = near_path(rng, robot_path, (0.2, 0.9), 0.0);
                let phi = rng.random_range(0.0..std::f64::consts::TAU);
                let dir = Point2::new(phi.cos(), phi.sin());
                (
                    c + dir * rng.random_range(1.0..3.0),
                    c - dir * rng.random_range(1.0..3.0),
                )
            } else {
                (
                    near_path(rng, robot_path, (0.6, 1.0), 0.4),
                    near_path(rng, robot_path, (0.0, 0.4), 0.4),
                )
            };
            if !place.ok(a) || !place.ok(b) || a.distance(b) < 1.0 {
                continue;
            }
            let Ok(path) = plan_astar(grid, a, b) else {
                continue;
            };
            if crossing && path.min_distance_to(robot_path) > 0.3 {
                continue;
            }
            let (arc_position, direction) = if index == 0 {
                (0.0, 1.0)
            } else {
                (
                    rng.random_range(0.0..=path.length()),
                    if rng.random_bool(0.5) { 1.0 } else { -1.0 },
                )
            };
            let ped = Pedestrian {
                half_extent: spec.half_extent,
                speed: sample_speed(rng, spec.speed_range),
                path,
                arc_position,
                direction,
                kind: PedestrianKind::Dynamic,
            };
            if !keep_off_robot(ped.position()) {
                continue;
            }
            placed = Some(ped);
            break;
        }
        peds.push(placed.ok_or_else(|| fail("dynamic pedestrian placement"))?);
    }

    for _ in 0..spec.n_static {
        let mut placed = None;
        for _ in 0..MAX_ATTEMPTS {
            let p = near_path(rng, robot_path, (0.15, 0.85), 0.8);
            if place.ok(p) && keep_off_robot(p) {
                placed = Some(Pedestrian {
                    half_extent: spec.half_extent,
                    path: Path::from_points(vec![p]),
                    speed: 0.0,
                    arc_position: 0.0,
                    direction: 1.0,
                    kind: PedestrianKind::Static,
                });
                break;
            }
        }
        peds.push(placed.ok_or_else(|| fail("static pedestrian placement"))?);
    }
    Ok(peds)
}
