// SPDX-License-Identifier: MIT OR Apache-2.0

//! Bayesian last-changepoint probabilities for Gaussian time series.
//!
//! [`cpp_kernel::CppDetector`] maintains, online, the probability that each
//! index is the most recent changepoint of a series. The crate also ships
//! the building blocks it relies on ([`gaussian_stats`], [`single_change`],
//! [`variance_change`]), a GLR detector for comparison ([`glr`]), and a
//! Monte-Carlo harness measuring detection delay against false-alarm
//! probability ([`harness`]).

#![forbid(unsafe_code)]

pub mod cpp_kernel;
pub mod datasets;
pub mod detector;
pub mod error;
pub mod gaussian_stats;
pub mod glr;
pub mod harness;
pub mod rng;
pub mod series;
pub mod single_change;
pub mod variance_change;

pub use cpp_kernel::{CppConfig, CppDetector, CppSnapshot};
pub use detector::OnlineDetector;
pub use error::{CppError, Result};
pub use gaussian_stats::{EstimationMode, GaussianParams, GaussianSegmentStats, VarianceFloor};
pub use glr::{GlrConfig, GlrDetector};
pub use series::TimeSeries;
pub use single_change::{MeanMode, ProbabilityVector, SigmaMode, SingleCpModel};
