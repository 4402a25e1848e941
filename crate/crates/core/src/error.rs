// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CppError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CppError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("non-finite observation {value} rejected")]
    NonFinite { value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("detector has no observations")]
    Empty,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid aggregate: {out_of_bounds} of {count} trials out of bounds (limit {limit:.2})")]
    TooManyOutOfBounds {
        out_of_bounds: usize,
        count: usize,
        limit: f64,
    },

    #[error("invalid aggregate: {0}")]
    InvalidAggregate(String),

    #[error("trial {trial} failed: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<CppError>,
    },

    #[error("snapshot error: {0}")]
    Snapshot(String),
}

pub(crate) fn ensure_finite(value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(CppError::NonFinite { value })
    }
}
