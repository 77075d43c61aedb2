//! Lidar preprocessing: min-pooling, scan-to-scan ICP alignment and
//! temporal accumulation group descriptors (TAGDs).

mod icp;
mod pool;
mod tagd;

pub use icp::{
    best_rigid_transform, icp_align, icp_points, IcpAlignment, IcpOutcome, IcpParams, IcpStatus,
};
pub use pool::{min_pool, PooledScan, RawScan, ScanPoint};
pub use tagd::{centroid, compute_tagds, tagds_with_transform, Tagd, TagdParams, TagdResult};

/// Beams emitted by the simulated sensor per revolution.
pub const RAW_BEAMS: usize = 1440;
/// Points per pooled scan.
pub const POOLED_BEAMS: usize = 180;
/// Raw beams folded into one pooled point.
pub const POOL_BLOCK: usize = RAW_BEAMS / POOLED_BEAMS;
/// Observation range limit in meters.
pub const D_MAX: f64 = 3.5;
/// Number of TAGD groups per frame.
pub const N_GROUPS: usize = 30;
