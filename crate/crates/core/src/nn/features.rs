use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scan::{PooledScan, Tagd, N_GROUPS, POOLED_BEAMS};
use crate::sim::{Observation, N_WAYPOINTS};

/// Number of spatial sectors.
pub const N_SECTORS: usize = 30;
pub const POINTS_PER_SECTOR: usize = POOLED_BEAMS / N_SECTORS;
pub const WAYPOINT_VALUES: usize = 2 * N_WAYPOINTS;
pub const SPATIAL_DIM: usize = 2 * POINTS_PER_SECTOR + WAYPOINT_VALUES;
pub const TEMPORAL_DIM: usize = 4 + WAYPOINT_VALUES;

/// Which attention streams feed the output network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ablation {
    #[serde(rename = "none")]
    None,
    /// Temporal stream only.
    A1,
    /// Spatial stream only.
    A2,
    /// Two spatial streams on the current and previous raw scans.
    A3,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::None, Ablation::A1, Ablation::A2, Ablation::A3];

    pub fn streams(self) -> &'static [StreamKind] {
        match self {
            Ablation::None => &[StreamKind::Temporal, StreamKind::Spatial],
            Ablation::A1 => &[StreamKind::Temporal],
            Ablation::A2 => &[StreamKind::Spatial],
            Ablation::A3 => &[StreamKind::PreviousSpatial, StreamKind::Spatial],
        }
    }

    pub fn uses_tagd(self) -> bool {
        self.streams().contains(&StreamKind::Temporal)
    }

    pub fn name(self) -> &'static str {
        match self {
            Ablation::None => "none",
            Ablation::A1 => "A1",
            Ablation::A2 => "A2",
            Ablation::A3 => "A3",
        }
    }
}

impl std::str::FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Ablation::None),
            "A1" | "a1" => Ok(Ablation::A1),
            "A2" | "a2" => Ok(Ablation::A2),
            "A3" | "a3" => Ok(Ablation::A3),
            other => Err(Error::Usage(format!("unknown ablation '{other}' (none, A1, A2, A3)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    Spatial,
    Temporal,
    PreviousSpatial,
}

impl StreamKind {
    pub fn input_dim(self) -> usize {
        match self {
            StreamKind::Temporal => TEMPORAL_DIM,
            _ => SPATIAL_DIM,
        }
    }
}

/// Compact network input derived from an [`Observation`].
///
/// Values are stored as `f32` to keep replay memory small; the network
/// itself computes in `f64`. Streams not used by the ablation stay empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsFeatures {
    /// Pooled scan as x,y pairs in beam order.
    pub scan_xy: Vec<f32>,
    pub prev_scan_xy: Vec<f32>,
    /// Per group `[c_prev.x, c_prev.y, c_t.x, c_t.y]`.
    pub tagd: Vec<f32>,
    pub waypoints: [f32; WAYPOINT_VALUES],
}

fn scan_xy(scan: &PooledScan) -> Result<Vec<f32>> {
    if scan.len() != POOLED_BEAMS {
        return Err(Error::Shape(format!("expected {POOLED_BEAMS} pooled points, got {}", scan.len())));
    }
    Ok(scan.points.iter().flat_map(|p| [p.point.x as f32, p.point.y as f32]).collect())
}

fn tagd_values(tagds: &[Tagd]) -> Result<Vec<f32>> {
    if tagds.len() != N_GROUPS {
        return Err(Error::Shape(format!("expected {N_GROUPS} TAGDs, got {}", tagds.len())));
    }
    Ok(tagds
        .iter()
        .flat_map(|t| [t.c_prev.x as f32, t.c_prev.y as f32, t.c_t.x as f32, t.c_t.y as f32])
        .collect())
}

fn waypoint_values(waypoints: &[Point2; N_WAYPOINTS]) -> [f32; WAYPOINT_VALUES] {
    let mut out = [0.0; WAYPOINT_VALUES];
    for (k, w) in waypoints.iter().enumerate() {
        out[2 * k] = w.x as f32;
        out[2 * k + 1] = w.y as f32;
    }
    out
}

impl ObsFeatures {
    pub fn from_observation(obs: &Observation, ablation: Ablation) -> Result<Self> {
        let streams = ablation.streams();
        let need = |k: StreamKind| streams.contains(&k);
        Ok(Self {
            scan_xy: if need(StreamKind::Spatial) { scan_xy(&obs.scan)? } else { Vec::new() },
            prev_scan_xy: if need(StreamKind::PreviousSpatial) {
                scan_xy(&obs.prev_scan)?
            } else {
                Vec::new()
            },
            tagd: if need(StreamKind::Temporal) { tagd_values(&obs.tagds)? } else { Vec::new() },
            waypoints: waypoint_values(&obs.waypoints),
        })
    }

    /// Rows for one stream, `N_SECTORS` (or `N_GROUPS`) rows per item.
    pub fn stream_rows(&self, kind: StreamKind, out: &mut Vec<f64>) -> Result<()> {
        let (src, per_row) = match kind {
            StreamKind::Spatial => (&self.scan_xy, 2 * POINTS_PER_SECTOR),
            StreamKind::PreviousSpatial => (&self.prev_scan_xy, 2 * POINTS_PER_SECTOR),
            StreamKind::Temporal => (&self.tagd, 4),
        };
        if src.len() != per_row * N_SECTORS {
            return Err(Error::Shape(format!("{kind:?} features missing for this observation")));
        }
        for chunk in src.chunks_exact(per_row) {
            out.extend(chunk.iter().map(|&v| v as f64));
            out.extend(self.waypoints.iter().map(|&v| v as f64));
        }
        Ok(())
    }
}

/// Stacks one stream of a batch into a `(batch * 30) x dim` matrix.
pub fn stream_matrix(batch: &[&ObsFeatures], kind: StreamKind) -> Result<Matrix> {
    let dim = kind.input_dim();
    let mut data = Vec::with_capacity(batch.len() * N_SECTORS * dim);
    for obs in batch {
        obs.stream_rows(kind, &mut data)?;
    }
    Matrix::from_vec(batch.len() * N_SECTORS, dim, data)
}

/// Sector `i` holds pooled points `6i..6i+6` as x,y pairs followed by the
/// flattened waypoints.
pub fn build_spatial_inputs(scan: &PooledScan, waypoints: &[Point2; N_WAYPOINTS]) -> Result<Vec<Vec<f64>>> {
    if scan.len() != POOLED_BEAMS {
        return Err(Error::Shape(format!("expected {POOLED_BEAMS} pooled points, got {}", scan.len())));
    }
    let wp: Vec<f64> = waypoints.iter().flat_map(|w| [w.x, w.y]).collect();
    Ok(scan
        .points
        .chunks_exact(POINTS_PER_SECTOR)
        .map(|sector| {
            let mut v: Vec<f64> = sector.iter().flat_map(|p| [p.point.x, p.point.y]).collect();
            v.extend_from_slice(&wp);
            v
        })
        .collect())
}

/// Vector `i` is `[c_prev, c_t, waypoints]` for group `i`.
pub fn build_temporal_inputs(tagds: &[Tagd], waypoints: &[Point2; N_WAYPOINTS]) -> Result<Vec<Vec<f64>>> {
    if tagds.len() != N_GROUPS {
        return Err(Error::Shape(format!("expected {N_GROUPS} TAGDs, got {}", tagds.len())));
    }
    let wp: Vec<f64> = waypoints.iter().flat_map(|w| [w.x, w.y]).collect();
    Ok(tagds
        .iter()
        .map(|t| {
            let mut v = vec![t.c_prev.x, t.c_prev.y, t.c_t.x, t.c_t.y];
            v.extend_from_slice(&wp);
            v
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::D_MAX;

    fn scan() -> PooledScan {
        let ranges: Vec<f64> = (0..180).map(|i| 1.0 + i as f64 * 0.01).collect();
        PooledScan::from_ranges(&ranges, 0, D_MAX).unwrap()
    }

    fn waypoints(offset: f64) -> [Point2; N_WAYPOINTS] {
        std::array::from_fn(|k| Point2::new(0.3 * (k + 1) as f64, offset))
    }

    #[test]
    fn spatial_shape_and_ordering() {
        let s = scan();
        let v = build_spatial_inputs(&s, &waypoints(0.0)).unwrap();
        assert_eq!(v.len(), 30);
        assert!(v.iter().all(|x| x.len() == 22));
        assert_eq!(v[1][0], s.points[6].point.x);
        assert_eq!(v[29][11], s.points[179].point.y);
    }

    #[test]
    fn waypoints_fill_trailing_entries() {
        let s = scan();
        let a = build_spatial_inputs(&s, &waypoints(0.0)).unwrap();
        let b = build_spatial_inputs(&s, &waypoints(0.5)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x[..12], y[..12]);
            assert_ne!(x[12..], y[12..]);
        }
    }

    #[test]
    fn short_scan_is_shape_error() {
        let s = PooledScan {
            points: scan().points[..10].to_vec(),
            timestamp_step: 0,
        };
        assert!(matches!(build_spatial_inputs(&s, &waypoints(0.0)), Err(Error::Shape(_))));
        assert!(matches!(build_temporal_inputs(&[], &waypoints(0.0)), Err(Error::Shape(_))));
    }

    #[test]
    fn ablation_parsing() {
        for a in Ablation::ALL {
            assert_eq!(a.name().parse::<Ablation>().unwrap(), a);
        }
        assert!("A4".parse::<Ablation>().is_err());
        assert!(!Ablation::A3.uses_tagd());
        assert!(Ablation::A1.uses_tagd());
    }
}
