use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::{plan_astar, OccupancyGrid, Path};
use super::{GRID_RESOLUTION, ROBOT_RADIUS};
use crate::error::{Error, Result};
use crate::geometry::{Point2, Rect};

const WALL: f64 = 0.2;
const INNER_WALL: f64 = 0.1;
const MIN_START_GOAL_PATH: f64 = 3.0;
const MAX_ATTEMPTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneKind {
    Corridor,
    Intersection,
    Office,
}

impl SceneKind {
    pub const ALL: [SceneKind; 3] = [SceneKind::Corridor, SceneKind::Intersection, SceneKind::Office];

    pub fn name(self) -> &'static str {
        match self {
            SceneKind::Corridor => "corridor",
            SceneKind::Intersection => "intersection",
            SceneKind::Office => "office",
        }
    }
}

impl std::str::FromStr for SceneKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corridor" => Ok(SceneKind::Corridor),
            "intersection" => Ok(SceneKind::Intersection),
            "office" => Ok(SceneKind::Office),
            other => Err(Error::Usage(format!("unknown scene kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams {
    pub corridor_length: (f64, f64),
    pub hallway_width: (f64, f64),
    /// Outer extent range of the cross-shaped intersection.
    pub intersection_extent: (f64, f64),
    pub office_size: (f64, f64),
    pub door_width: (f64, f64),
}

impl Default for LayoutParams {
    fn default() -> Self {
        Self {
            corridor_length: (6.0, 8.0),
            hallway_width: (2.0, 2.5),
            intersection_extent: (6.0, 8.0),
            office_size: (6.0, 6.0),
            door_width: (0.9, 1.2),
        }
    }
}

/// Scene dimensions drawn for one layout, kept for inspection and tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayoutDims {
    Corridor {
        length: f64,
        width: f64,
    },
    Intersection {
        extent_x: f64,
        extent_y: f64,
        horizontal_width: f64,
        vertical_width: f64,
    },
    Office {
        size_x: f64,
        size_y: f64,
        rooms: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldLayout {
    pub kind: SceneKind,
    pub dims: LayoutDims,
    pub walls: Vec<Rect>,
    /// Bounding box of the free interior.
    pub bounds: Rect,
    pub start: Point2,
    pub goal: Point2,
}

impl WorldLayout {
    /// Area covered by planning grids: interior plus the outer walls.
    pub fn grid_area(&self) -> Rect {
        Rect::new(
            self.bounds.min.x - 0.5,
            self.bounds.min.y - 0.5,
            self.bounds.max.x + 0.5,
            self.bounds.max.y + 0.5,
        )
    }

    pub fn grid(&self, inflation: f64) -> OccupancyGrid {
        OccupancyGrid::from_walls(&self.walls, self.grid_area(), GRID_RESOLUTION, inflation)
    }

    /// Clearance from `p` to the nearest wall.
    pub fn wall_clearance(&self, p: Point2) -> f64 {
        self.walls
            .iter()
            .map(|w| w.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn outer_walls(w: f64, h: f64) -> Vec<Rect> {
    vec![
        Rect::new(-WALL, -WALL, w + WALL, 0.0),
        Rect::new(-WALL, h, w + WALL, h + WALL),
        Rect::new(-WALL, 0.0, 0.0, h),
        Rect::new(w, 0.0, w + WALL, h),
    ]
}

struct Draft {
    dims: LayoutDims,
    walls: Vec<Rect>,
    bounds: Rect,
    candidates: Vec<Point2>,
}

fn corridor(rng: &mut impl Rng, p: &LayoutParams) -> Draft {
    let length = uniform(rng, p.corridor_length);
    let width = uniform(rng, p.hallway_width);
    let jitter = |rng: &mut _| uniform(rng, (-0.3, 0.3));
    let candidates = vec![
        Point2::new(0.5, width / 2.0 + jitter(rng)),
        Point2::new(length - 0.5, width / 2.0 + jitter(rng)),
    ];
    Draft {
        dims: LayoutDims::Corridor { length, width },
        walls: outer_walls(length, width),
        bounds: Rect::new(0.0, 0.0, length, width),
        candidates,
    }
}

fn intersection(rng: &mut impl Rng, p: &LayoutParams) -> Draft {
    let ex = uniform(rng, p.intersection_extent);
    let ey = uniform(rng, p.intersection_extent);
    let wh = uniform(rng, p.hallway_width);
    let wv = uniform(rng, p.hallway_width);
    let cx = ex / 2.0 + uniform(rng, (-0.5, 0.5));
    let cy = ey / 2.0 + uniform(rng, (-0.5, 0.5));
    let (x0, x1) = (cx - wv / 2.0, cx + wv / 2.0);
    let (y0, y1) = (cy - wh / 2.0, cy + wh / 2.0);
    let mut walls = outer_walls(ex, ey);
    walls.extend([
        Rect::new(0.0, 0.0, x0, y0),
        Rect::new(x1, 0.0, ex, y0),
        Rect::new(0.0, y1, x0, ey),
        Rect::new(x1, y1, ex, ey),
    ]);
    let candidates = vec![
        Point2::new(0.5, cy),
        Point2::new(ex - 0.5, cy),
        Point2::new(cx, 0.5),
        Point2::new(cx, ey - 0.5),
    ];
    Draft {
        dims: LayoutDims::Intersection {
            extent_x: ex,
            extent_y: ey,
            horizontal_width: wh,
            vertical_width: wv,
        },
        walls,
        bounds: Rect::new(0.0, 0.0, ex, ey),
        candidates,
    }
}

fn door_position(rng: &mut impl Rng, lo: f64, hi: f64, width: f64) -> f64 {
    let (a, b) = (lo + width / 2.0 + 0.3, hi - width / 2.0 - 0.3);
    if b > a {
        rng.random_range(a..=b)
    } else {
        0.5 * (lo + hi)
    }
}

/// Wall segment along one axis from `a` to `b` at fixed coordinate `at`,
/// with a door gap of `door` centered at `door_at`.
fn wall_with_door(vertical: bool, at: f64, a: f64, b: f64, door_at: f64, door: f64) -> Vec<Rect> {
    let h = INNER_WALL / 2.0;
    let (g0, g1) = (door_at - door / 2.0, door_at + door / 2.0);
    [(a, g0), (g1, b)]
        .into_iter()
        .filter(|(lo, hi)| hi - lo > 1e-6)
        .map(|(lo, hi)| {
            if vertical {
                Rect::new(at - h, lo, at + h, hi)
            } else {
                Rect::new(lo, at - h, hi, at + h)
            }
        })
        .collect()
}

fn office(rng: &mut impl Rng, p: &LayoutParams) -> Draft {
    let (sx, sy) = p.office_size;
    let split_x = uniform(rng, (0.35 * sx, 0.65 * sx));
    let left_y = uniform(rng, (0.35 * sy, 0.65 * sy));
    let right_y = uniform(rng, (0.35 * sy, 0.65 * sy));
    let keep_right = rng.random_bool(0.7);
    let (d0, d1, d2, d3) = (
        uniform(rng, p.door_width),
        uniform(rng, p.door_width),
        uniform(rng, p.door_width),
        uniform(rng, p.door_width),
    );
    let low = left_y.min(if keep_right { right_y } else { sy });
    let high = left_y.max(if keep_right { right_y } else { 0.0 });
    let mut walls = outer_walls(sx, sy);
    // vertical divider with one door below both horizontal walls and one above
    let lower_door = door_position(rng, 0.0, low, d0);
    let upper_door = door_position(rng, high, sy, d1);
    let h = INNER_WALL / 2.0;
    let mut vertical = wall_with_door(true, split_x, 0.0, sy, lower_door, d0);
    let upper = vertical.pop().unwrap();
    vertical.extend(wall_with_door(true, split_x, upper.min.y, upper.max.y, upper_door, d1));
    walls.extend(vertical);
    let left_door = door_position(rng, 0.0, split_x - h, d2);
    walls.extend(wall_with_door(false, left_y, 0.0, split_x - h, left_door, d2));
    let mut rooms = 3;
    if keep_right {
        let right_door = door_position(rng, split_x + h, sx, d3);
        walls.extend(wall_with_door(false, right_y, split_x + h, sx, right_door, d3));
        rooms = 4;
    }
    let m = 0.45;
    let mut candidates = vec![
        Point2::new(m, m),
        Point2::new(m, sy - m),
        Point2::new(sx - m, m),
        Point2::new(sx - m, sy - m),
        Point2::new(split_x - h - m, m),
        Point2::new(split_x + h + m, sy - m),
    ];
    candidates.push(Point2::new(m, left_y - h - m));
    candidates.push(Point2::new(m, left_y + h + m));
    if keep_right {
        candidates.push(Point2::new(sx - m, right_y - h - m));
        candidates.push(Point2::new(sx - m, right_y + h + m));
    }
    Draft {
        dims: LayoutDims::Office {
            size_x: sx,
            size_y: sy,
            rooms,
        },
        walls,
        bounds: Rect::new(0.0, 0.0, sx, sy),
        candidates,
    }
}

/// Draws a random layout of `kind` with start and goal in corners or dead
/// ends, connected by a collision-free path of at least 3 m.
pub fn generate_layout(kind: SceneKind, rng: &mut impl Rng, params: &LayoutParams) -> Result<WorldLayout> {
    for _ in 0..MAX_ATTEMPTS {
        let draft = match kind {
            SceneKind::Corridor => corridor(rng, params),
            SceneKind::Intersection => intersection(rng, params),
            SceneKind::Office => office(rng, params),
        };
        let n = draft.candidates.len();
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let layout = WorldLayout {
            kind,
            dims: draft.dims,
            walls: draft.walls,
            bounds: draft.bounds,
            start: draft.candidates[i],
            goal: draft.candidates[j],
        };
        match robot_path(&layout) {
            Ok(path) if path.length() >= MIN_START_GOAL_PATH => return Ok(layout),
            _ => continue,
        }
    }
    Err(Error::Generation {
        what: format!("{} layout with reachable goal", kind.name()),
        attempts: MAX_ATTEMPTS,
    })
}

/// Global path for the robot over the wall map inflated by the robot radius.
pub fn robot_path(layout: &WorldLayout) -> Result<Path> {
    plan_astar(&layout.grid(ROBOT_RADIUS), layout.start, layout.goal)
}
