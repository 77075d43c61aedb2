use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{D_MAX, POOLED_BEAMS, POOL_BLOCK, RAW_BEAMS};
use crate::error::{Error, Result};
use crate::geometry::{cartesian_to_polar, normalize_angle, polar_to_cartesian, Point2, PolarPoint};

/// One full sensor revolution. Beam `k` points at `k * 2pi / 1440` in the
/// robot frame, beam 0 along the robot heading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawScan {
    pub ranges: Vec<f64>,
    pub timestamp_step: u64,
}

impl RawScan {
    pub fn beam_angle(k: usize) -> f64 {
        normalize_angle(k as f64 * TAU / RAW_BEAMS as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub polar: PolarPoint,
    pub point: Point2,
    /// Range reached the observation limit; carries no obstacle geometry.
    pub max_range: bool,
}

impl ScanPoint {
    pub fn from_polar(polar: PolarPoint, d_max: f64) -> Self {
        let r = polar.r.min(d_max);
        let polar = PolarPoint::new(r, polar.theta);
        Self {
            polar,
            point: polar_to_cartesian(polar),
            max_range: r >= d_max,
        }
    }

    pub fn from_point(point: Point2, d_max: f64) -> Self {
        let polar = cartesian_to_polar(point);
        if polar.r >= d_max {
            Self::from_polar(polar, d_max)
        } else {
            Self {
                polar,
                point,
                max_range: false,
            }
        }
    }
}

/// Robot-centric scan of 180 points ordered by beam angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledScan {
    pub points: Vec<ScanPoint>,
    pub timestamp_step: u64,
}

impl PooledScan {
    /// Bearing of pooled point `i`, the center of raw block `[8i, 8i+8)`.
    pub fn block_angle(i: usize) -> f64 {
        let center = (i * POOL_BLOCK) as f64 + (POOL_BLOCK as f64 - 1.0) / 2.0;
        normalize_angle(center * TAU / RAW_BEAMS as f64)
    }

    /// Builds a scan from already pooled ranges at the standard bearings.
    pub fn from_ranges(ranges: &[f64], timestamp_step: u64, d_max: f64) -> Result<Self> {
        if ranges.len() != POOLED_BEAMS {
            return Err(Error::Shape(format!(
                "expected {POOLED_BEAMS} pooled ranges, got {}",
                ranges.len()
            )));
        }
        let points = ranges
            .iter()
            .enumerate()
            .map(|(i, &r)| ScanPoint::from_polar(PolarPoint::new(r, Self::block_angle(i)), d_max))
            .collect();
        Ok(Self {
            points,
            timestamp_step,
        })
    }

    /// Builds a scan from arbitrary Cartesian points (order is kept).
    pub fn from_points(points: &[Point2], timestamp_step: u64, d_max: f64) -> Self {
        Self {
            points: points.iter().map(|&p| ScanPoint::from_point(p, d_max)).collect(),
            timestamp_step,
        }
    }

    pub fn ranges(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.polar.r).collect()
    }

    pub fn min_range(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.polar.r)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Reduces 1,440 raw beams to 180 by taking the block minimum, clamped to
/// [`D_MAX`].
pub fn min_pool(raw: &RawScan) -> Result<PooledScan> {
    min_pool_with_range(raw, D_MAX)
}

pub fn min_pool_with_range(raw: &RawScan, d_max: f64) -> Result<PooledScan> {
    if raw.ranges.len() != RAW_BEAMS {
        return Err(Error::Shape(format!(
            "expected {RAW_BEAMS} raw ranges, got {}",
            raw.ranges.len()
        )));
    }
    let pooled: Vec<f64> = raw
        .ranges
        .chunks_exact(POOL_BLOCK)
        .map(|block| block.iter().copied().fold(d_max, f64::min))
        .collect();
    PooledScan::from_ranges(&pooled, raw.timestamp_step, d_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(ranges: Vec<f64>) -> RawScan {
        RawScan {
            ranges,
            timestamp_step: 0,
        }
    }

    #[test]
    fn constant_input() {
        let pooled = min_pool(&raw(vec![3.5; RAW_BEAMS])).unwrap();
        assert_eq!(pooled.len(), POOLED_BEAMS);
        assert!(pooled.points.iter().all(|p| p.polar.r == 3.5 && p.max_range));
    }

    #[test]
    fn block_minimum() {
        let mut r = vec![3.5; RAW_BEAMS];
        r[8 * 7 + 5] = 1.2;
        let pooled = min_pool(&raw(r)).unwrap();
        assert_eq!(pooled.points[7].polar.r, 1.2);
        assert!(!pooled.points[7].max_range);
        assert_eq!(pooled.points[6].polar.r, 3.5);
    }

    #[test]
    fn clamps_to_observation_range() {
        let pooled = min_pool(&raw(vec![5.0; RAW_BEAMS])).unwrap();
        assert!(pooled.points.iter().all(|p| p.polar.r == 3.5));
    }

    #[test]
    fn wrong_length_is_shape_error() {
        assert!(matches!(min_pool(&raw(vec![1.0; 100])), Err(Error::Shape(_))));
    }

    #[test]
    fn bearings_uniform_and_start_at_heading() {
        let step = TAU / POOLED_BEAMS as f64;
        let first = PooledScan::block_angle(0);
        assert!((first - 3.5 * TAU / RAW_BEAMS as f64).abs() < 1e-12);
        for i in 1..POOLED_BEAMS {
            let d = normalize_angle(PooledScan::block_angle(i) - PooledScan::block_angle(i - 1));
            assert!((d - step).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn block_permutation_invariant(
            ranges in proptest::collection::vec(0.05..6.0f64, RAW_BEAMS),
            block in 0usize..POOLED_BEAMS,
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let a = min_pool(&raw(ranges.clone())).unwrap();
            let mut shuffled = ranges;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            shuffled[block * POOL_BLOCK..(block + 1) * POOL_BLOCK].shuffle(&mut rng);
            let b = min_pool(&raw(shuffled)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
