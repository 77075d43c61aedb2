use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape error: {0}")]
    Shape(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no path from ({sx:.2}, {sy:.2}) to ({gx:.2}, {gy:.2})")]
    NoPath { sx: f64, sy: f64, gx: f64, gy: f64 },

    #[error("generation failed after {attempts} attempts: {what}")]
    Generation { what: String, attempts: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("replay buffer not ready: {have} stored, {need} requested")]
    NotReady { have: usize, need: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at episode {episode}: {detail} (state dumped to {})", dump.display())]
    Divergence {
        episode: usize,
        detail: String,
        dump: PathBuf,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("load error: {0}")]
    Load(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
