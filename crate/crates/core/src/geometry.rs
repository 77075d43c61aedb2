//! Planar geometry shared by the perception, simulation and learning code.
//!
//! Frame convention: in the robot-centric frame +x points forward and +y to
//! the left. Angles are measured from +x, counter-clockwise positive, and are
//! kept in `[-pi, pi)`.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Wraps an angle into `[-pi, pi)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let wrapped = (theta + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if wrapped >= PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

/// Smallest absolute angular distance between two angles.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn distance_squared(self, other: Point2) -> f64 {
        (self - other).norm_squared()
    }

    /// Rotates about the origin.
    pub fn rotated(self, theta: f64) -> Point2 {
        let (s, c) = theta.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        self + (other - self) * t
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

/// Range/bearing form of a point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PolarPoint {
    pub r: f64,
    pub theta: f64,
}

impl PolarPoint {
    pub fn new(r: f64, theta: f64) -> Self {
        Self {
            r,
            theta: normalize_angle(theta),
        }
    }
}

pub fn polar_to_cartesian(p: PolarPoint) -> Point2 {
    let (s, c) = p.theta.sin_cos();
    Point2::new(p.r * c, p.r * s)
}

pub fn cartesian_to_polar(p: Point2) -> PolarPoint {
    PolarPoint::new(p.norm(), p.y.atan2(p.x))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub position: Point2,
    pub heading: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: Point2::new(x, y),
            heading: normalize_angle(heading),
        }
    }

    /// Transform taking robot-frame coordinates into the world frame.
    pub fn to_world(&self) -> RigidTransform2 {
        RigidTransform2::new(self.heading, self.position)
    }

    /// Expresses a world-frame point in this pose's local frame.
    pub fn world_to_local(&self, p: Point2) -> Point2 {
        (p - self.position).rotated(-self.heading)
    }

    pub fn local_to_world(&self, p: Point2) -> Point2 {
        p.rotated(self.heading) + self.position
    }
}

/// Proper rigid motion of the plane: rotate about the origin, then translate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform2 {
    pub rotation: f64,
    pub translation: Point2,
}

impl Default for RigidTransform2 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl RigidTransform2 {
    pub const IDENTITY: RigidTransform2 = RigidTransform2 {
        rotation: 0.0,
        translation: Point2::ORIGIN,
    };

    pub fn new(rotation: f64, translation: Point2) -> Self {
        Self {
            rotation: normalize_angle(rotation),
            translation,
        }
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        p.rotated(self.rotation) + self.translation
    }

    /// `self.compose(other)` applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform2) -> RigidTransform2 {
        RigidTransform2::new(
            self.rotation + other.rotation,
            other.translation.rotated(self.rotation) + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform2 {
        RigidTransform2::new(-self.rotation, (self.translation * -1.0).rotated(-self.rotation))
    }
}

pub fn apply_transform(t: &RigidTransform2, p: Point2) -> Point2 {
    t.apply(p)
}

pub fn compose(t1: &RigidTransform2, t2: &RigidTransform2) -> RigidTransform2 {
    t1.compose(t2)
}

pub fn invert(t: &RigidTransform2) -> RigidTransform2 {
    t.inverse()
}

/// Axis-aligned rectangle in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            min: Point2::new(x0.min(x1), y0.min(y1)),
            max: Point2::new(x0.max(x1), y0.max(y1)),
        }
    }

    pub fn centered(center: Point2, half_x: f64, half_y: f64) -> Self {
        Self::new(
            center.x - half_x,
            center.y - half_y,
            center.x + half_x,
            center.y + half_y,
        )
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> Point2 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Euclidean distance from `p` to the rectangle (zero inside).
    pub fn distance_to(&self, p: Point2) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        dx.hypot(dy)
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.min.x < other.max.x
            && other.min.x < self.max.x
            && self.min.y < other.max.y
            && other.min.y < self.max.y
    }

    /// Ray/box slab test. Returns the smallest `t >= 0` with
    /// `origin + t * dir` on the boundary, `dir` need not be unit length.
    /// A ray starting inside the box reports `t = 0`.
    pub fn ray_intersection(&self, origin: Point2, dir: Point2) -> Option<f64> {
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for (o, d, lo, hi) in [
            (origin.x, dir.x, self.min.x, self.max.x),
            (origin.y, dir.y, self.min.y, self.max.y),
        ] {
            if d == 0.0 {
                if o < lo || o > hi {
                    return None;
                }
            } else {
                let a = (lo - o) / d;
                let b = (hi - o) / d;
                let (a, b) = if a <= b { (a, b) } else { (b, a) };
                t_near = t_near.max(a);
                t_far = t_far.min(b);
            }
        }
        if t_near > t_far || t_far < 0.0 {
            None
        } else {
            Some(t_near.max(0.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 1e-9;

    fn close(a: Point2, b: Point2) -> bool {
        a.distance(b) < EPS
    }

    #[test]
    fn polar_axis_cases() {
        assert!(close(
            polar_to_cartesian(PolarPoint::new(1.0, 0.0)),
            Point2::new(1.0, 0.0)
        ));
        assert!(close(
            polar_to_cartesian(PolarPoint::new(0.0, 1.234)),
            Point2::ORIGIN
        ));
        assert!(close(
            polar_to_cartesian(PolarPoint::new(2.0, PI / 2.0)),
            Point2::new(0.0, 2.0)
        ));
    }

    #[test]
    fn transform_examples() {
        let p = Point2::new(1.0, 1.0);
        assert_eq!(RigidTransform2::IDENTITY.apply(p), p);
        let quarter = RigidTransform2::new(PI / 2.0, Point2::ORIGIN);
        assert!(close(quarter.apply(Point2::new(1.0, 0.0)), Point2::new(0.0, 1.0)));
        let shift = RigidTransform2::new(0.0, Point2::new(0.5, -0.2));
        assert!(close(shift.apply(p), Point2::new(1.5, 0.8)));
    }

    #[test]
    fn compose_and_invert() {
        assert_eq!(invert(&RigidTransform2::IDENTITY), RigidTransform2::IDENTITY);
        let quarter = RigidTransform2::new(PI / 2.0, Point2::ORIGIN);
        let half = compose(&quarter, &quarter);
        assert!(angle_distance(half.rotation, PI) < EPS);
        assert!(half.rotation >= -PI && half.rotation < PI);
    }

    #[test]
    fn normalize_range() {
        assert_eq!(normalize_angle(PI), -PI);
        assert!((normalize_angle(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        let tiny = normalize_angle(-1e-18);
        assert!((-PI..PI).contains(&tiny));
    }

    #[test]
    fn ray_hits_box_face() {
        let r = Rect::new(1.0, -1.0, 2.0, 1.0);
        let t = r.ray_intersection(Point2::ORIGIN, Point2::new(1.0, 0.0)).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert!(r.ray_intersection(Point2::ORIGIN, Point2::new(-1.0, 0.0)).is_none());
        assert!(r.ray_intersection(Point2::ORIGIN, Point2::new(0.0, 1.0)).is_none());
    }

    fn transform_strategy() -> impl Strategy<Value = RigidTransform2> {
        (-10.0..10.0f64, -5.0..5.0f64, -5.0..5.0f64)
            .prop_map(|(r, x, y)| RigidTransform2::new(r, Point2::new(x, y)))
    }

    fn point_strategy() -> impl Strategy<Value = Point2> {
        (-20.0..20.0f64, -20.0..20.0f64).prop_map(|(x, y)| Point2::new(x, y))
    }

    proptest! {
        #[test]
        fn round_trip(t in transform_strategy(), p in point_strategy()) {
            let back = invert(&t).apply(t.apply(p));
            prop_assert!(back.distance(p) < EPS);
            let via_compose = compose(&t, &invert(&t)).apply(p);
            prop_assert!(via_compose.distance(p) < EPS);
        }

        #[test]
        fn isometry(t in transform_strategy(), a in point_strategy(), b in point_strategy()) {
            let d0 = a.distance(b);
            let d1 = t.apply(a).distance(t.apply(b));
            prop_assert!((d0 - d1).abs() < EPS);
        }

        #[test]
        fn compose_associative(a in transform_strategy(), b in transform_strategy(), c in transform_strategy(), p in point_strategy()) {
            let left = compose(&compose(&a, &b), &c).apply(p);
            let right = compose(&a, &compose(&b, &c)).apply(p);
            prop_assert!(left.distance(right) < 1e-8);
            let stepwise = a.apply(b.apply(c.apply(p)));
            prop_assert!(left.distance(stepwise) < 1e-8);
        }

        #[test]
        fn polar_round_trip(r in 1e-3..50.0f64, theta in -PI..PI) {
            let p = PolarPoint::new(r, theta);
            let q = cartesian_to_polar(polar_to_cartesian(p));
            prop_assert!((q.r - p.r).abs() < EPS);
            prop_assert!(angle_distance(q.theta, p.theta) < EPS);
        }
    }
}
