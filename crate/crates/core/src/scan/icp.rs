use serde::{Deserialize, Serialize};

use super::PooledScan;
use crate::error::{Error, Result};
use crate::geometry::{Point2, RigidTransform2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpParams {
    /// When false, alignment is skipped and the source is returned as is.
    pub enabled: bool,
    pub max_iterations: usize,
    /// Stop once the mean residual changes by less than this (meters).
    pub convergence_eps: f64,
    /// Correspondences farther apart than this are rejected each iteration.
    pub max_correspondence_dist: f64,
    /// Drop max-range returns from both point sets before matching.
    pub max_range_exclusion: bool,
    /// After converging, rerun from the solution rotated by plus and minus
    /// this angle (radians) and keep whichever fits best. Plain point pairing
    /// on angularly sampled scans has false minima about one beam spacing
    /// from the truth, where every point pairs with its neighbor's ray.
    /// Surface pairing mostly removes them, so this is off by default.
    pub restart_rotation: f64,
    /// Consecutive destination points closer than this (meters) are joined
    /// into surface segments, and each source point is paired with the
    /// nearest point on the segments next to its nearest destination point.
    /// Zero pairs with destination points only.
    pub surface_link: f64,
    /// Pairs whose distance exceeds this multiple of the median pair
    /// distance are dropped, which keeps small moving objects from dragging
    /// the fit. The cut never goes below `trim_floor`. Zero disables.
    pub trim_factor: f64,
    pub trim_floor: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            enabled: true,
            max_iterations: 30,
            convergence_eps: 1e-4,
            max_correspondence_dist: 0.5,
            max_range_exclusion: true,
            restart_rotation: 0.0,
            surface_link: 0.3,
            trim_factor: 3.0,
            trim_floor: 0.04,
        }
    }
}

impl IcpParams {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::Config("ICP max_iterations must be >= 1".into()));
        }
        if !(self.convergence_eps > 0.0) {
            return Err(Error::Config("ICP convergence_eps must be > 0".into()));
        }
        if !(self.max_correspondence_dist > 0.0) {
            return Err(Error::Config("ICP max_correspondence_dist must be > 0".into()));
        }
        if !(self.surface_link >= 0.0) {
            return Err(Error::Config("ICP surface_link must be >= 0".into()));
        }
        if !(self.trim_factor >= 0.0) || !(self.trim_floor >= 0.0) {
            return Err(Error::Config("ICP trim_factor and trim_floor must be >= 0".into()));
        }
        if !(self.restart_rotation >= 0.0) {
            return Err(Error::Config("ICP restart_rotation must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IcpStatus {
    Converged,
    MaxIterations,
    /// Not enough structure to align; the identity was used.
    Unavailable,
    Disabled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpAlignment {
    /// Every source point (max-range ones included) under `transform`.
    pub aligned: Vec<Point2>,
    pub transform: RigidTransform2,
    pub mean_residual: f64,
    pub iterations: usize,
    pub status: IcpStatus,
}

/// Closed-form least-squares rigid transform taking each `pair.0` onto
/// `pair.1`. In the plane the optimal rotation of the cross-covariance
/// method reduces to a single `atan2`, which is always a proper rotation.
pub fn best_rigid_transform(pairs: &[(Point2, Point2)]) -> Result<RigidTransform2> {
    if pairs.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 correspondences, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let (mut src_c, mut dst_c) = (Point2::ORIGIN, Point2::ORIGIN);
    for &(p, q) in pairs {
        src_c = src_c + p;
        dst_c = dst_c + q;
    }
    src_c = src_c * (1.0 / n);
    dst_c = dst_c * (1.0 / n);

    let (mut sxx, mut sxy, mut syx, mut syy) = (0.0, 0.0, 0.0, 0.0);
    let mut spread = 0.0;
    for &(p, q) in pairs {
        let a = p - src_c;
        let b = q - dst_c;
        sxx += a.x * b.x;
        sxy += a.x * b.y;
        syx += a.y * b.x;
        syy += a.y * b.y;
        spread += a.norm_squared() + b.norm_squared();
    }
    let sin_part = sxy - syx;
    let cos_part = sxx + syy;
    if spread <= 1e-18 || sin_part.hypot(cos_part) <= 1e-12 * spread {
        return Err(Error::Degenerate("rank-deficient cross-covariance".into()));
    }
    let rotation = sin_part.atan2(cos_part);
    let translation = dst_c - src_c.rotated(rotation);
    Ok(RigidTransform2::new(rotation, translation))
}

#[derive(Debug, Clone, Copy)]
pub struct IcpOutcome {
    pub transform: RigidTransform2,
    pub mean_residual: f64,
    pub iterations: usize,
    pub status: IcpStatus,
}

/// Uniform bucket grid over the destination points. Lookups only see
/// points within one cell size of the query, so the cell size is the
/// correspondence limit.
struct Neighbors<'a> {
    points: &'a [Point2],
    origin: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    /// Bucket `c` holds `order[start[c]..start[c + 1]]`.
    start: Vec<usize>,
    order: Vec<usize>,
}

impl<'a> Neighbors<'a> {
    const MAX_CELLS_PER_AXIS: f64 = 512.0;

    fn new(points: &'a [Point2], radius: f64) -> Self {
        let (mut lo, mut hi) = (Point2::new(f64::INFINITY, f64::INFINITY), Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in points {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let extent = (hi.x - lo.x).max(hi.y - lo.y).max(0.0);
        let cell = radius.max(extent / Self::MAX_CELLS_PER_AXIS).max(1e-9);
        let nx = ((hi.x - lo.x) / cell) as usize + 1;
        let ny = ((hi.y - lo.y) / cell) as usize + 1;
        let bucket = |p: &Point2| {
            let i = (((p.x - lo.x) / cell) as usize).min(nx - 1);
            let j = (((p.y - lo.y) / cell) as usize).min(ny - 1);
            j * nx + i
        };
        let mut start = vec![0usize; nx * ny + 1];
        for p in points {
            start[bucket(p) + 1] += 1;
        }
        for c in 0..nx * ny {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut order = vec![0usize; points.len()];
        for (k, p) in points.iter().enumerate() {
            let c = bucket(p);
            order[fill[c]] = k;
            fill[c] += 1;
        }
        Self {
            points,
            origin: lo,
            cell,
            nx,
            ny,
            start,
            order,
        }
    }

    /// Index and squared distance of the nearest point, lowest index on
    /// ties. `None` when nothing lies within one cell size.
    fn nearest(&self, p: Point2) -> Option<(usize, f64)> {
        let fx = ((p.x - self.origin.x) / self.cell).floor();
        let fy = ((p.y - self.origin.y) / self.cell).floor();
        let (nx, ny) = (self.nx as f64, self.ny as f64);
        if !(fx >= -1.0 && fx <= nx && fy >= -1.0 && fy <= ny) {
            return None;
        }
        let (i0, i1) = ((fx - 1.0).max(0.0) as usize, ((fx + 1.0).min(nx - 1.0)) as usize);
        let (j0, j1) = ((fy - 1.0).max(0.0) as usize, ((fy + 1.0).min(ny - 1.0)) as usize);
        let mut best: Option<(usize, f64)> = None;
        for j in j0..=j1 {
            for i in i0..=i1 {
                let c = j * self.nx + i;
                for &k in &self.order[self.start[c]..self.start[c + 1]] {
                    let d = p.distance_squared(self.points[k]);
                    if best.is_none_or(|(bk, bd)| d < bd || (d == bd && k < bk)) {
                        best = Some((k, d));
                    }
                }
            }
        }
        best.filter(|&(_, d)| d <= self.cell * self.cell)
    }
}

fn closest_on_segment(a: Point2, b: Point2, p: Point2) -> Point2 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= 0.0 {
        return a;
    }
    a + ab * ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
}

/// Nearest surface point to `p`: the nearest destination point, moved onto
/// an adjacent linked segment when that is closer.
fn surface_match(grid: &Neighbors, p: Point2, link: f64) -> Option<(Point2, f64)> {
    let dst = grid.points;
    let (j, d2) = grid.nearest(p)?;
    let mut best = (dst[j], d2);
    if link > 0.0 {
        let n = dst.len();
        for k in [(j + n - 1) % n, (j + 1) % n] {
            if k != j && dst[k].distance(dst[j]) <= link {
                let q = closest_on_segment(dst[j], dst[k], p);
                let dq = q.distance_squared(p);
                if dq < best.1 {
                    best = (q, dq);
                }
            }
        }
    }
    Some(best)
}

fn icp_from(src: &[Point2], grid: &Neighbors, params: &IcpParams, init: RigidTransform2, trim: bool) -> IcpOutcome {
    let unavailable = IcpOutcome {
        transform: RigidTransform2::IDENTITY,
        mean_residual: f64::NAN,
        iterations: 0,
        status: IcpStatus::Unavailable,
    };
    if src.len() < 2 || grid.points.len() < 2 {
        return unavailable;
    }
    let max_d2 = params.max_correspondence_dist * params.max_correspondence_dist;
    let mut transform = init;
    let mut prev_residual = f64::INFINITY;
    let mut residual = f64::NAN;
    let mut pairs = Vec::with_capacity(src.len());
    let mut matched = Vec::with_capacity(src.len());
    let mut scratch = Vec::with_capacity(src.len());

    for iteration in 1..=params.max_iterations {
        matched.clear();
        for &p in src {
            if let Some((q, d2)) = surface_match(grid, transform.apply(p), params.surface_link) {
                if d2 <= max_d2 {
                    matched.push((p, q, d2));
                }
            }
        }
        let mut keep = max_d2;
        if trim && !matched.is_empty() {
            scratch.clear();
            scratch.extend(matched.iter().map(|m| m.2));
            let mid = scratch.len() / 2;
            let median2 = *scratch.select_nth_unstable_by(mid, f64::total_cmp).1;
            let cut = (params.trim_factor * median2.sqrt()).max(params.trim_floor);
            keep = keep.min(cut * cut);
        }
        pairs.clear();
        pairs.extend(matched.iter().filter(|m| m.2 <= keep).map(|m| (m.0, m.1)));
        let next = match best_rigid_transform(&pairs) {
            Ok(t) => t,
            Err(_) if iteration == 1 => return unavailable,
            Err(_) => {
                return IcpOutcome {
                    transform,
                    mean_residual: residual,
                    iterations: iteration - 1,
                    status: IcpStatus::MaxIterations,
                }
            }
        };
        transform = next;
        residual = pairs
            .iter()
            .map(|&(p, q)| transform.apply(p).distance(q))
            .sum::<f64>()
            / pairs.len() as f64;
        if (prev_residual - residual).abs() < params.convergence_eps {
            return IcpOutcome {
                transform,
                mean_residual: residual,
                iterations: iteration,
                status: IcpStatus::Converged,
            };
        }
        prev_residual = residual;
    }
    IcpOutcome {
        transform,
        mean_residual: residual,
        iterations: params.max_iterations,
        status: IcpStatus::MaxIterations,
    }
}

/// Mean distance from each transformed source point to its nearest
/// destination point, capped at the correspondence limit.
fn truncated_fit(src: &[Point2], grid: &Neighbors, t: &RigidTransform2, cap: f64) -> f64 {
    src.iter()
        .map(|&p| grid.nearest(t.apply(p)).map_or(cap, |(_, d2)| d2.sqrt().min(cap)))
        .sum::<f64>()
        / src.len() as f64
}

/// ICP on raw point sets, estimating `T` with `T(src) ~ dst`.
pub fn icp_points(src: &[Point2], dst: &[Point2], params: &IcpParams) -> IcpOutcome {
    let grid = Neighbors::new(dst, params.max_correspondence_dist);
    let first = icp_from(src, &grid, params, RigidTransform2::IDENTITY, false);
    if first.status == IcpStatus::Unavailable {
        return first;
    }
    let mut best = first;
    if params.restart_rotation > 0.0 {
        let cap = params.max_correspondence_dist;
        let mut best_fit = truncated_fit(src, &grid, &first.transform, cap);
        for sign in [-1.0, 1.0] {
            let init = RigidTransform2::new(sign * params.restart_rotation, Point2::ORIGIN).compose(&first.transform);
            let candidate = icp_from(src, &grid, params, init, false);
            if candidate.status == IcpStatus::Unavailable {
                continue;
            }
            let fit = truncated_fit(src, &grid, &candidate.transform, cap);
            if fit < best_fit {
                best = candidate;
                best_fit = fit;
            }
        }
    }
    // trimming only pays off near the solution, where the median pair
    // distance reflects the static scene rather than the initial offset
    if params.trim_factor > 0.0 {
        let refined = icp_from(src, &grid, params, best.transform, true);
        if refined.status != IcpStatus::Unavailable {
            best = IcpOutcome {
                iterations: best.iterations + refined.iterations,
                ..refined
            };
        }
    }
    best
}

/// Aligns the previous scan onto the current one. Falls back to the
/// identity (returning `src` unchanged) when alignment is disabled or the
/// scans hold too little structure.
pub fn icp_align(src: &PooledScan, dst: &PooledScan, params: &IcpParams) -> IcpAlignment {
    let select = |scan: &PooledScan| -> Vec<Point2> {
        scan.points
            .iter()
            .filter(|p| !(params.max_range_exclusion && p.max_range))
            .map(|p| p.point)
            .collect()
    };
    let outcome = if params.enabled {
        icp_points(&select(src), &select(dst), params)
    } else {
        IcpOutcome {
            transform: RigidTransform2::IDENTITY,
            mean_residual: f64::NAN,
            iterations: 0,
            status: IcpStatus::Disabled,
        }
    };
    IcpAlignment {
        aligned: src.points.iter().map(|p| outcome.transform.apply(p.point)).collect(),
        transform: outcome.transform,
        mean_residual: outcome.mean_residual,
        iterations: outcome.iterations,
        status: outcome.status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::D_MAX;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: scan the rotation angle on a fine grid, refine
    /// by golden section, with the translation solved per angle.
    fn brute_force_fit(pairs: &[(Point2, Point2)]) -> RigidTransform2 {
        let n = pairs.len() as f64;
        let cost = |theta: f64| -> (f64, Point2) {
            let mut t = Point2::ORIGIN;
            for &(p, q) in pairs {
                t = t + (q - p.rotated(theta));
            }
            t = t * (1.0 / n);
            let c = pairs
                .iter()
                .map(|&(p, q)| (p.rotated(theta) + t).distance_squared(q))
                .sum();
            (c, t)
        };
        let steps = 3600;
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..steps {
            let theta = -std::f64::consts::PI + std::f64::consts::TAU * k as f64 / steps as f64;
            let c = cost(theta).0;
            if c < best.0 {
                best = (c, theta);
            }
        }
        let h = std::f64::consts::TAU / steps as f64;
        let (mut a, mut b) = (best.1 - h, best.1 + h);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if cost(c).0 < cost(d).0 {
                b = d;
            } else {
                a = c;
            }
        }
        let theta = 0.5 * (a + b);
        RigidTransform2::new(theta, cost(theta).1)
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point2> {
        (0..n)
            .map(|_| Point2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)))
            .collect()
    }

    #[test]
    fn identity_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = random_points(&mut rng, 10);
        let pairs: Vec<_> = pts.iter().map(|&p| (p, p)).collect();
        let t = best_rigid_transform(&pairs).unwrap();
        assert!(t.rotation.abs() < 1e-12);
        assert!(t.translation.norm() < 1e-12);
    }

    #[test]
    fn recovers_known_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let truth = RigidTransform2::new(0.2, Point2::new(0.1, -0.05));
        let pts = random_points(&mut rng, 25);
        let pairs: Vec<_> = pts.iter().map(|&p| (p, truth.apply(p))).collect();
        let t = best_rigid_transform(&pairs).unwrap();
        assert!((t.rotation - 0.2).abs() < 1e-9);
        assert!(t.translation.distance(Point2::new(0.1, -0.05)) < 1e-9);
    }

    #[test]
    fn two_collinear_pairs_translation() {
        let shift = Point2::new(0.3, -0.7);
        let pairs = [
            (Point2::new(0.0, 0.0), shift),
            (Point2::new(1.0, 0.0), Point2::new(1.0, 0.0) + shift),
        ];
        let t = best_rigid_transform(&pairs).unwrap();
        assert!(t.rotation.abs() < 1e-12);
        assert!(t.translation.distance(shift) < 1e-12);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let p = Point2::new(1.0, 1.0);
        assert!(matches!(best_rigid_transform(&[(p, p)]), Err(Error::Degenerate(_))));
        assert!(matches!(
            best_rigid_transform(&[(p, p), (p, p), (p, p)]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn matches_brute_force_on_noisy_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let truth = RigidTransform2::new(
                rng.random_range(-1.0..1.0),
                Point2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            );
            let pairs: Vec<_> = random_points(&mut rng, 30)
                .into_iter()
                .map(|p| {
                    let noise = Point2::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
                    (p, truth.apply(p) + noise)
                })
                .collect();
            let fast = best_rigid_transform(&pairs).unwrap();
            let slow = brute_force_fit(&pairs);
            assert!((fast.rotation - slow.rotation).abs() < 1e-7);
            assert!(fast.translation.distance(slow.translation) < 1e-7);
        }
    }

    fn square_room_scan() -> PooledScan {
        // Robot inside a 4 x 3 room, off-center.
        let pts: Vec<Point2> = (0..180)
            .map(|i| {
                let theta = PooledScan::block_angle(i);
                let dir = Point2::new(theta.cos(), theta.sin());
                let room = crate::geometry::Rect::new(-1.5, -1.0, 2.5, 2.0);
                // distance to exit the room from inside
                let tx = if dir.x > 0.0 { room.max.x / dir.x } else { room.min.x / dir.x };
                let ty = if dir.y > 0.0 { room.max.y / dir.y } else { room.min.y / dir.y };
                dir * tx.min(ty)
            })
            .collect();
        PooledScan::from_points(&pts, 0, D_MAX)
    }

    #[test]
    fn align_identical_scans() {
        let scan = square_room_scan();
        let out = icp_align(&scan, &scan, &IcpParams::default());
        assert_eq!(out.status, IcpStatus::Converged);
        assert!(out.transform.rotation.abs() < 1e-9);
        assert!(out.transform.translation.norm() < 1e-9);
        assert!(out.mean_residual < 1e-9);
    }

    #[test]
    fn all_max_range_is_unavailable() {
        let scan = PooledScan::from_ranges(&[D_MAX; 180], 0, D_MAX).unwrap();
        let out = icp_align(&scan, &scan, &IcpParams::default());
        assert_eq!(out.status, IcpStatus::Unavailable);
        assert_eq!(out.transform, RigidTransform2::IDENTITY);
        assert_eq!(out.aligned.len(), 180);
    }

    #[test]
    fn disabled_returns_source() {
        let scan = square_room_scan();
        let out = icp_align(&scan, &scan, &IcpParams::disabled());
        assert_eq!(out.status, IcpStatus::Disabled);
        assert!(out.aligned.iter().zip(&scan.points).all(|(a, b)| *a == b.point));
    }

    #[test]
    fn surface_match_projects_onto_linked_neighbors() {
        let dst = [Point2::new(0.0, 0.0), Point2::new(0.2, 0.0), Point2::new(1.0, 0.0)];
        let p = Point2::new(0.13, 0.05);
        let grid = Neighbors::new(&dst, 0.5);
        let (q, d2) = surface_match(&grid, p, 0.3).unwrap();
        assert!(q.distance(Point2::new(0.13, 0.0)) < 1e-15);
        assert!((d2 - 0.0025).abs() < 1e-15);
        // the 0.8 m gap to the third point is not a surface
        let p = Point2::new(0.35, 0.05);
        assert_eq!(surface_match(&grid, p, 0.3).unwrap().0, dst[1]);
        assert_eq!(surface_match(&grid, p, 0.0).unwrap().0, dst[1]);
        assert!(surface_match(&grid, Point2::new(0.6, 0.6), 0.3).is_none());
    }

    #[test]
    fn trimming_ignores_a_small_moving_cluster() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let truth = RigidTransform2::new(0.05, Point2::new(0.08, -0.03));
        let static_pts = random_points(&mut rng, 120);
        let cluster: Vec<Point2> = (0..12).map(|k| Point2::new(1.0 + 0.03 * k as f64, 0.5)).collect();
        let src: Vec<Point2> = static_pts.iter().chain(&cluster).copied().collect();
        let mut dst: Vec<Point2> = static_pts.iter().map(|&p| truth.apply(p)).collect();
        dst.extend(cluster.iter().map(|&p| truth.apply(p) + Point2::new(0.0, 0.15)));
        let params = IcpParams {
            surface_link: 0.0,
            ..IcpParams::default()
        };
        let trimmed = icp_points(&src, &dst, &params);
        assert!((trimmed.transform.rotation - truth.rotation).abs() < 1e-9);
        assert!(trimmed.transform.translation.distance(truth.translation) < 1e-9);
        let plain = icp_points(&src, &dst, &IcpParams { trim_factor: 0.0, ..params });
        assert!(plain.transform.translation.distance(truth.translation) > 1e-3);
    }

    #[test]
    fn grid_lookup_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut pts = random_points(&mut rng, 200);
        pts.push(pts[17]);
        let grid = Neighbors::new(&pts, 0.4);
        for _ in 0..2000 {
            let q = Point2::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
            let brute = pts
                .iter()
                .enumerate()
                .map(|(k, p)| (k, q.distance_squared(*p)))
                .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            let expected = (brute.1 <= 0.16).then_some(brute);
            assert_eq!(grid.nearest(q), expected);
        }
        assert_eq!(grid.nearest(pts[17]), Some((17, 0.0)));
    }
}
