//! Lidar-only navigation among pedestrians.
//!
//! The crate covers the full loop: a randomized indoor simulator producing
//! 1,440-beam scans, min-pooling and ICP-aligned temporal descriptors
//! ([`scan`]), a dual-stream attention actor-critic ([`nn`]), DDPG training
//! ([`rl`]) and evaluation, logging and visualization ([`eval`]).

pub mod cli;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod nn;
pub mod rl;
pub mod scan;
pub mod sim;

pub use error::{Error, Result};
