// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::error::Result;

/// A sequential detector driven one observation at a time.
pub trait OnlineDetector {
    /// Consume `x` and return the updated decision statistic.
    fn observe(&mut self, x: f64) -> Result<f64>;

    /// Current decision statistic.
    fn statistic(&self) -> f64;

    /// Number of observations consumed.
    fn steps(&self) -> usize;
}
