use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::icp::{icp_align, IcpAlignment, IcpParams};
use super::{PooledScan, D_MAX, N_GROUPS};
use crate::error::{Error, Result};
use crate::geometry::{angle_distance, normalize_angle, polar_to_cartesian, Point2, PolarPoint, RigidTransform2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagdParams {
    pub n_groups: usize,
    /// Group radius around each ray anchor (meters).
    pub d_thresh: f64,
    pub d_max: f64,
    /// Half-width of the angular window used to place the group anchor.
    pub theta_thresh: f64,
}

impl Default for TagdParams {
    fn default() -> Self {
        Self {
            n_groups: N_GROUPS,
            d_thresh: 0.25,
            d_max: D_MAX,
            theta_thresh: PI / N_GROUPS as f64,
        }
    }
}

impl TagdParams {
    /// Checks `d_thresh > v_max * dt`, the margin that keeps an obstacle
    /// moving at `v_max` inside its group across one step.
    pub fn validate_for(&self, v_max: f64, dt: f64) -> Result<()> {
        if self.n_groups == 0 {
            return Err(Error::Config("n_groups must be > 0".into()));
        }
        if !(self.d_thresh > v_max * dt) {
            return Err(Error::Config(format!(
                "d_thresh {} must exceed v_max*dt = {}",
                self.d_thresh,
                v_max * dt
            )));
        }
        Ok(())
    }

    pub fn ray_angle(&self, i: usize) -> f64 {
        normalize_angle(TAU * i as f64 / self.n_groups as f64)
    }
}

/// Paired centroids for one ray-anchored group, both in the current robot
/// frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tagd {
    pub group_index: usize,
    /// Group anchor `g_i`.
    pub center: Point2,
    pub c_t: Point2,
    pub c_prev: Point2,
    pub group_size_t: usize,
    pub group_size_prev: usize,
}

impl Tagd {
    pub fn displacement(&self) -> f64 {
        self.c_t.distance(self.c_prev)
    }
}

#[derive(Debug, Clone)]
pub struct TagdResult {
    pub tagds: Vec<Tagd>,
    pub alignment: IcpAlignment,
}

impl TagdResult {
    pub fn displacements(&self) -> Vec<f64> {
        self.tagds.iter().map(Tagd::displacement).collect()
    }
}

/// Arithmetic mean, or `None` for an empty set.
pub fn centroid(points: &[Point2]) -> Option<Point2> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Point2::ORIGIN, |acc, &p| acc + p);
    Some(sum * (1.0 / points.len() as f64))
}

/// Temporal accumulation group descriptors for two consecutive scans.
///
/// The previous scan is first aligned onto the current one. For each of the
/// `n_groups` rays at `2 pi i / n_groups` the anchor is the closest current
/// point inside the angular window, and both scans contribute the points
/// within `d_thresh` of that anchor. Max-range returns never join a group.
/// An empty current group falls back to the ray point at `d_max` for both
/// centroids; an empty previous group reuses the current centroid.
pub fn compute_tagds(
    prev: &PooledScan,
    current: &PooledScan,
    params: &TagdParams,
    icp: &IcpParams,
) -> TagdResult {
    let alignment = icp_align(prev, current, icp);
    let tagds = tagds_from_aligned(current, prev, &alignment.aligned, params);
    TagdResult { tagds, alignment }
}

/// TAGDs for a known previous-to-current transform, bypassing ICP.
pub fn tagds_with_transform(
    prev: &PooledScan,
    current: &PooledScan,
    transform: &RigidTransform2,
    params: &TagdParams,
) -> Vec<Tagd> {
    let aligned: Vec<Point2> = prev.points.iter().map(|p| transform.apply(p.point)).collect();
    tagds_from_aligned(current, prev, &aligned, params)
}

fn tagds_from_aligned(
    current: &PooledScan,
    prev: &PooledScan,
    aligned_prev: &[Point2],
    params: &TagdParams,
) -> Vec<Tagd> {
    let d2 = params.d_thresh * params.d_thresh;
    let mut group_t = Vec::new();
    let mut group_prev = Vec::new();

    (0..params.n_groups)
        .map(|i| {
            let theta_ref = params.ray_angle(i);
            let r_min = current
                .points
                .iter()
                .filter(|b| angle_distance(b.polar.theta, theta_ref) <= params.theta_thresh)
                .map(|b| b.polar.r)
                .fold(params.d_max, f64::min);
            let center = polar_to_cartesian(PolarPoint::new(r_min, theta_ref));

            group_t.clear();
            group_t.extend(
                current
                    .points
                    .iter()
                    .filter(|b| !b.max_range && b.point.distance_squared(center) <= d2)
                    .map(|b| b.point),
            );
            group_prev.clear();
            group_prev.extend(
                prev.points
                    .iter()
                    .zip(aligned_prev)
                    .filter(|(b, a)| !b.max_range && a.distance_squared(center) <= d2)
                    .map(|(_, &a)| a),
            );

            let (c_t, c_prev) = match centroid(&group_t) {
                None => {
                    let fallback = polar_to_cartesian(PolarPoint::new(params.d_max, theta_ref));
                    (fallback, fallback)
                }
                Some(c_t) => (c_t, centroid(&group_prev).unwrap_or(c_t)),
            };
            Tagd {
                group_index: i,
                center,
                c_t,
                c_prev,
                group_size_t: group_t.len(),
                group_size_prev: group_prev.len(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;

    #[test]
    fn default_threshold() {
        let p = TagdParams::default();
        assert_eq!(p.d_thresh, 0.25);
        assert_eq!(p.n_groups, 30);
        assert!((p.theta_thresh - PI / 30.0).abs() < 1e-15);
        p.validate_for(1.0, 0.2).unwrap();
        assert!(p.validate_for(1.5, 0.2).is_err());
    }

    #[test]
    fn centroid_cases() {
        assert_eq!(centroid(&[Point2::new(1.0, 0.0)]), Some(Point2::new(1.0, 0.0)));
        assert_eq!(
            centroid(&[Point2::new(0.0, 0.0), Point2::new(2.0, 0.0)]),
            Some(Point2::new(1.0, 0.0))
        );
        assert_eq!(centroid(&[]), None);
    }

    fn ray_scan(boxes: &[Rect]) -> PooledScan {
        let ranges: Vec<f64> = (0..180)
            .map(|i| {
                let theta = PooledScan::block_angle(i);
                let dir = Point2::new(theta.cos(), theta.sin());
                boxes
                    .iter()
                    .filter_map(|b| b.ray_intersection(Point2::ORIGIN, dir))
                    .fold(D_MAX, f64::min)
            })
            .collect();
        PooledScan::from_ranges(&ranges, 0, D_MAX).unwrap()
    }

    #[test]
    fn empty_scene_uses_fallbacks() {
        let scan = ray_scan(&[]);
        let out = compute_tagds(&scan, &scan, &TagdParams::default(), &IcpParams::default());
        assert_eq!(out.tagds.len(), 30);
        for t in &out.tagds {
            assert_eq!(t.group_size_t, 0);
            assert_eq!(t.c_t, t.c_prev);
            assert!((t.c_t.norm() - D_MAX).abs() < 1e-12);
        }
        // group 0 fallback on the +x axis
        assert!(out.tagds[0].c_t.distance(Point2::new(D_MAX, 0.0)) < 1e-12);
    }

    #[test]
    fn empty_previous_group_reuses_current() {
        let obstacle = Rect::centered(Point2::new(2.0, 0.0), 0.2, 0.2);
        let now = ray_scan(&[obstacle]);
        let before = ray_scan(&[]);
        let out = compute_tagds(&before, &now, &TagdParams::default(), &IcpParams::disabled());
        let t = &out.tagds[0];
        assert!(t.group_size_t > 0);
        assert_eq!(t.group_size_prev, 0);
        assert_eq!(t.c_prev, t.c_t);
    }

    #[test]
    fn lateral_obstacle_motion_shows_up() {
        // two walls at right angles, so the static scene pins every motion
        let walls = [Rect::new(3.0, -3.0, 3.2, 3.0), Rect::new(-3.0, -2.2, 3.2, -2.0)];
        let a = Rect::centered(Point2::new(2.0, 0.0), 0.05, 0.05);
        let b = Rect::centered(Point2::new(2.0, 0.12), 0.05, 0.05);
        let before = ray_scan(&[walls[0], walls[1], a]);
        let now = ray_scan(&[walls[0], walls[1], b]);
        let out = compute_tagds(&before, &now, &TagdParams::default(), &IcpParams::default());
        let covering = out
            .tagds
            .iter()
            .filter(|t| t.center.distance(Point2::new(2.0, 0.12)) < 0.2)
            .map(Tagd::displacement)
            .fold(0.0, f64::max);
        assert!((covering - 0.12).abs() <= 0.02, "displacement {covering}");
    }

    #[test]
    fn centroids_stay_in_group() {
        let boxes = [
            Rect::new(-2.0, 1.4, 2.0, 1.6),
            Rect::new(1.5, -2.0, 1.7, 2.0),
            Rect::centered(Point2::new(-1.0, -0.8), 0.2, 0.2),
        ];
        let now = ray_scan(&boxes);
        let out = compute_tagds(&now, &now, &TagdParams::default(), &IcpParams::default());
        for t in &out.tagds {
            if t.group_size_t > 0 {
                assert!(t.c_t.distance(t.center) <= 0.25 + 1e-12);
                assert!(t.c_prev.distance(t.center) <= 0.25 + 1e-12);
            }
            assert_eq!(t.displacement(), 0.0);
        }
    }
}
