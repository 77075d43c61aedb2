use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Point2, Pose2, Rect};
use crate::scan::{RawScan, RAW_BEAMS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarParams {
    pub beams: usize,
    /// Reading reported for beams that hit nothing.
    pub max_range: f64,
    /// Half-width of the uniform additive range noise on hits (meters).
    pub noise_amplitude: f64,
}

impl Default for LidarParams {
    fn default() -> Self {
        Self {
            beams: RAW_BEAMS,
            max_range: 12.0,
            noise_amplitude: 0.025,
        }
    }
}

impl LidarParams {
    pub fn noise_free() -> Self {
        Self {
            noise_amplitude: 0.0,
            ..Self::default()
        }
    }
}

/// Exact nearest hit along one ray, `None` on a miss.
pub fn cast_ray(obstacles: &[Rect], origin: Point2, angle: f64) -> Option<f64> {
    let dir = Point2::new(angle.cos(), angle.sin());
    obstacles
        .iter()
        .filter_map(|r| r.ray_intersection(origin, dir))
        .min_by(f64::total_cmp)
}

/// Simulated scan from `pose`. Beam `k` is cast at world angle
/// `heading + 2 pi k / beams`.
pub fn raycast_lidar(
    obstacles: &[Rect],
    pose: Pose2,
    params: &LidarParams,
    timestamp_step: u64,
    rng: &mut impl Rng,
) -> RawScan {
    let ranges = (0..params.beams)
        .map(|k| {
            let angle = pose.heading + TAU * k as f64 / params.beams as f64;
            match cast_ray(obstacles, pose.position, angle) {
                Some(d) if d < params.max_range => {
                    let noise = if params.noise_amplitude > 0.0 {
                        rng.random_range(-params.noise_amplitude..=params.noise_amplitude)
                    } else {
                        0.0
                    };
                    (d + noise).clamp(0.0, params.max_range)
                }
                _ => params.max_range,
            }
        })
        .collect();
    RawScan {
        ranges,
        timestamp_step,
    }
}
