//! Error type shared across the crate.

use thiserror::Error;

/// Errors surfaced by signal handling, coding, and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Frame or block geometry does not satisfy a required constraint.
    #[error("geometry: {0}")]
    Geometry(String),

    /// A numeric argument is outside its documented domain.
    #[error("domain: {0}")]
    Domain(String),

    /// An input collection is empty where at least one element is required.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Content statistics are too degenerate for the requested estimate.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A rate query fell outside the convex hull of measured points.
    /// Extrapolation is never performed.
    #[error("rate {rate:.6} outside measured span [{lo:.6}, {hi:.6}]")]
    OutOfHull { rate: f64, lo: f64, hi: f64 },

    /// Decoded payload disagrees with the declared symbol universe.
    #[error("codec: {0}")]
    Codec(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
