use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Rect};

/// Waypoint spacing after densification (half a default grid cell).
pub const PATH_SPACING: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub resolution: f64,
    /// World position of the lower-left corner of cell (0, 0).
    pub origin: Point2,
    pub width: usize,
    pub height: usize,
    pub occupied: Vec<bool>,
}

impl OccupancyGrid {
    /// Rasterizes `walls` over `area`. A cell is occupied when its square
    /// comes within `inflation` of any wall, so with zero inflation every
    /// cell touching a wall is marked.
    pub fn from_walls(walls: &[Rect], area: Rect, resolution: f64, inflation: f64) -> Self {
        let width = (area.width() / resolution).ceil().max(1.0) as usize;
        let height = (area.height() / resolution).ceil().max(1.0) as usize;
        let half = resolution / 2.0;
        let mut occupied = vec![false; width * height];
        for iy in 0..height {
            for ix in 0..width {
                let c = Point2::new(
                    area.min.x + (ix as f64 + 0.5) * resolution,
                    area.min.y + (iy as f64 + 0.5) * resolution,
                );
                occupied[iy * width + ix] = walls.iter().any(|w| {
                    let dx = (w.min.x - c.x).max(c.x - w.max.x).max(0.0);
                    let dy = (w.min.y - c.y).max(c.y - w.max.y).max(0.0);
                    (dx - half).max(0.0).hypot((dy - half).max(0.0)) <= inflation
                });
            }
        }
        Self {
            resolution,
            origin: area.min,
            width,
            height,
            occupied,
        }
    }

    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            None
        } else {
            Some((fx as usize, fy as usize))
        }
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point2 {
        Point2::new(
            self.origin.x + (ix as f64 + 0.5) * self.resolution,
            self.origin.y + (iy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn cell_rect(&self, ix: usize, iy: usize) -> Rect {
        let c = self.cell_center(ix, iy);
        Rect::centered(c, self.resolution / 2.0, self.resolution / 2.0)
    }

    pub fn is_occupied(&self, ix: usize, iy: usize) -> bool {
        self.occupied[iy * self.width + ix]
    }

    pub fn is_free(&self, p: Point2) -> bool {
        self.cell_of(p).is_some_and(|(x, y)| !self.is_occupied(x, y))
    }
}

/// Polyline with cumulative arc length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Point2>,
    pub cumulative: Vec<f64>,
}

impl Path {
    pub fn from_points(waypoints: Vec<Point2>) -> Self {
        assert!(!waypoints.is_empty(), "path needs at least one waypoint");
        let mut cumulative = Vec::with_capacity(waypoints.len());
        let mut s = 0.0;
        cumulative.push(0.0);
        for w in waypoints.windows(2) {
            s += w[0].distance(w[1]);
            cumulative.push(s);
        }
        Self {
            waypoints,
            cumulative,
        }
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn start(&self) -> Point2 {
        self.waypoints[0]
    }

    pub fn goal(&self) -> Point2 {
        *self.waypoints.last().unwrap()
    }

    /// Index of the waypoint closest to `p` (first one on ties).
    pub fn nearest_index(&self, p: Point2) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, w) in self.waypoints.iter().enumerate() {
            let d = w.distance_squared(p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Point at arc length `s`, clamped to the path ends.
    pub fn point_at(&self, s: f64) -> Point2 {
        if s <= 0.0 {
            return self.start();
        }
        if s >= self.length() {
            return self.goal();
        }
        let i = self.cumulative.partition_point(|&c| c <= s);
        let (a, b) = (self.waypoints[i - 1], self.waypoints[i]);
        let seg = self.cumulative[i] - self.cumulative[i - 1];
        if seg <= 0.0 {
            return a;
        }
        a.lerp(b, (s - self.cumulative[i - 1]) / seg)
    }

    /// Resamples at uniform arc spacing, keeping both endpoints.
    pub fn densified(&self, spacing: f64) -> Path {
        let len = self.length();
        if len == 0.0 {
            return Path::from_points(vec![self.start()]);
        }
        let n = (len / spacing).ceil() as usize;
        let pts = (0..=n)
            .map(|k| self.point_at(len * k as f64 / n as f64))
            .collect();
        Path::from_points(pts)
    }

    /// Smallest distance between any waypoint here and any in `other`.
    pub fn min_distance_to(&self, other: &Path) -> f64 {
        let mut best = f64::INFINITY;
        for a in &self.waypoints {
            for b in &other.waypoints {
                best = best.min(a.distance_squared(*b));
            }
        }
        best.sqrt()
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    f: f64,
    order: usize,
    cell: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.order.cmp(&self.order))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn octile(a: (usize, usize), b: (usize, usize)) -> f64 {
    let dx = a.0.abs_diff(b.0) as f64;
    let dy = a.1.abs_diff(b.1) as f64;
    let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
    hi - lo + lo * std::f64::consts::SQRT_2
}

/// 8-connected A* over free cells. Diagonal steps may not cut occupied
/// corners. The result starts at `start`, ends at `goal` and is densified
/// to [`PATH_SPACING`].
pub fn plan_astar(grid: &OccupancyGrid, start: Point2, goal: Point2) -> Result<Path> {
    let no_path = || Error::NoPath {
        sx: start.x,
        sy: start.y,
        gx: goal.x,
        gy: goal.y,
    };
    let s = grid.cell_of(start).ok_or_else(no_path)?;
    let g = grid.cell_of(goal).ok_or_else(no_path)?;
    if grid.is_occupied(s.0, s.1) || grid.is_occupied(g.0, g.1) {
        return Err(no_path());
    }
    if start == goal {
        return Ok(Path::from_points(vec![start]));
    }

    let w = grid.width;
    let idx = |c: (usize, usize)| c.1 * w + c.0;
    let n = grid.width * grid.height;
    let mut cost = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut order = 0;
    cost[idx(s)] = 0.0;
    heap.push(Frontier {
        f: octile(s, g),
        order,
        cell: idx(s),
    });

    while let Some(Frontier { cell, .. }) = heap.pop() {
        if closed[cell] {
            continue;
        }
        closed[cell] = true;
        if cell == idx(g) {
            break;
        }
        let (cx, cy) = ((cell % w) as isize, (cell / w) as isize);
        for (dx, dy) in [
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ] {
            let (nx, ny) = (cx + dx, cy + dy);
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= grid.height as isize {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if grid.is_occupied(nx, ny) {
                continue;
            }
            let diagonal = dx != 0 && dy != 0;
            if diagonal
                && (grid.is_occupied(nx, cy as usize) || grid.is_occupied(cx as usize, ny))
            {
                continue;
            }
            let next = idx((nx, ny));
            let step = if diagonal { std::f64::consts::SQRT_2 } else { 1.0 };
            let c = cost[cell] + step;
            if c < cost[next] {
                cost[next] = c;
                parent[next] = cell;
                order += 1;
                heap.push(Frontier {
                    f: c + octile((nx, ny), g),
                    order,
                    cell: next,
                });
            }
        }
    }
    if !closed[idx(g)] {
        return Err(no_path());
    }

    let mut cells = vec![idx(g)];
    while *cells.last().unwrap() != idx(s) {
        cells.push(parent[*cells.last().unwrap()]);
    }
    cells.reverse();
    let mut pts = vec![start];
    if cells.len() > 2 {
        pts.extend(
            cells[1..cells.len() - 1]
                .iter()
                .map(|&c| grid.cell_center(c % w, c / w)),
        );
    }
    pts.push(goal);
    Ok(Path::from_points(pts).densified(PATH_SPACING))
}
