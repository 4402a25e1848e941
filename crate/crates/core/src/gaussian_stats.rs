// SPDX-License-Identifier: MIT OR Apache-2.0

//! Gaussian log-likelihoods, sufficient statistics and conjugate posterior
//! draws under the noninformative prior uniform on `(mu, log sigma)`:
//!
//! ```text
//! sigma^2 | y          ~ Inv-chi^2(n - 1, s^2)
//! mu      | y, sigma^2 ~ N(ybar, sigma^2 / n)
//! ```
//!
//! Everything is evaluated in log space.

use std::ops::Add;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, CppError, Result};

/// `ln(sqrt(2 pi))`
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    mu: f64,
    sigma: f64,
}

impl GaussianParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !sigma.is_finite() || sigma <= 0.0 {
            return Err(CppError::Domain(format!(
                "gaussian parameters need finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
            )));
        }
        Ok(Self { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }
}

/// Count, sum and sum of squares of a segment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GaussianSegmentStats {
    pub n: usize,
    pub sum: f64,
    pub sumsq: f64,
}

impl GaussianSegmentStats {
    pub fn from_slice(xs: &[f64]) -> Self {
        xs.iter().fold(Self::default(), |mut acc, &x| {
            acc.push(x);
            acc
        })
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            n: self.n + other.n,
            sum: self.sum + other.sum,
            sumsq: self.sumsq + other.sumsq,
        }
    }

    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }

    /// `sum (x - xbar)^2`, clamped at zero against cancellation.
    pub fn sum_sq_dev(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (self.sumsq - self.sum * self.sum / self.n as f64).max(0.0)
    }

    /// Unbiased sample variance `s^2`; `None` for fewer than two points.
    pub fn sample_variance(&self) -> Option<f64> {
        (self.n >= 2).then(|| self.sum_sq_dev() / (self.n - 1) as f64)
    }
}

impl Add for GaussianSegmentStats {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        self.merge(&rhs)
    }
}

/// Prefix count/sum/sum-of-squares arrays giving the statistics of any
/// interval `(a, b]` in O(1).
///
/// Values are stored relative to `origin` (the first observation) to keep
/// the sums of squares well conditioned; [`PrefixStats::segment`] returns
/// statistics of the shifted values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrefixStats {
    origin: f64,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

impl PrefixStats {
    pub fn new() -> Self {
        Self {
            origin: 0.0,
            sum: vec![0.0],
            sumsq: vec![0.0],
        }
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut prefix = Self::new();
        for &x in xs {
            prefix.push(x);
        }
        prefix
    }

    pub fn push(&mut self, x: f64) {
        if self.sum.is_empty() {
            *self = Self::new();
        }
        if self.is_empty() {
            self.origin = x;
        }
        let d = x - self.origin;
        let n = self.sum.len();
        self.sum.push(self.sum[n - 1] + d);
        self.sumsq.push(self.sumsq[n - 1] + d * d);
    }

    pub fn len(&self) -> usize {
        self.sum.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    /// Shifted statistics of `x_{a+1} ..= x_b` (1-based), i.e. prefix `b`
    /// minus prefix `a`.
    #[inline]
    pub fn segment(&self, a: usize, b: usize) -> GaussianSegmentStats {
        debug_assert!(a <= b && b <= self.len());
        GaussianSegmentStats {
            n: b - a,
            sum: self.sum[b] - self.sum[a],
            sumsq: self.sumsq[b] - self.sumsq[a],
        }
    }

    /// Sample variance of all observations, if defined.
    pub fn variance(&self) -> Option<f64> {
        self.segment(0, self.len()).sample_variance()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EstimationMode {
    /// Substitute the point estimates `(ybar, s^2)`.
    PlugIn,
    /// Draw the parameters from their conjugate posterior.
    #[default]
    PosteriorSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraw {
    pub mu: f64,
    pub sigma2: f64,
    pub source: EstimationMode,
}

/// Lower bound on any estimated or sampled variance, relative to a
/// reference variance (the global sample variance, or 1 when undefined).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceFloor {
    pub relative: f64,
}

impl Default for VarianceFloor {
    fn default() -> Self {
        Self { relative: 1e-8 }
    }
}

impl VarianceFloor {
    pub fn resolve(&self, reference_variance: Option<f64>) -> f64 {
        let reference = match reference_variance {
            Some(v) if v.is_finite() && v > 0.0 => v,
            _ => 1.0,
        };
        self.relative * reference
    }
}

pub fn log_likelihood_point(x: f64, params: &GaussianParams) -> Result<f64> {
    ensure_finite(x)?;
    let z = (x - params.mu) / params.sigma;
    Ok(-LN_SQRT_2PI - params.sigma.ln() - 0.5 * z * z)
}

/// Closed-form `sum ln pdf(x_j)` from sufficient statistics.
pub fn log_likelihood_segment(stats: &GaussianSegmentStats, params: &GaussianParams) -> Result<f64> {
    if !stats.sum.is_finite() || !stats.sumsq.is_finite() {
        return Err(CppError::Domain("non-finite segment statistics".into()));
    }
    Ok(segment_loglik(stats, params.mu, params.variance()))
}

/// Unchecked segment log-likelihood; `mu` must be in the same coordinates as
/// `stats`.
#[inline]
pub(crate) fn segment_loglik(stats: &GaussianSegmentStats, mu: f64, var: f64) -> f64 {
    if stats.n == 0 {
        return 0.0;
    }
    let n = stats.n as f64;
    let mean = stats.sum / n;
    let d = mean - mu;
    let ss = stats.sum_sq_dev() + n * d * d;
    -n * (LN_SQRT_2PI + 0.5 * var.ln()) - ss / (2.0 * var)
}

/// `(n - 1, s^2)` for the scaled inverse chi-square posterior of `sigma^2`.
pub fn posterior_sigma2_params(stats: &GaussianSegmentStats) -> Result<(usize, f64)> {
    match stats.sample_variance() {
        Some(s2) => Ok((stats.n - 1, s2)),
        None => Err(CppError::InsufficientData {
            needed: 2,
            got: stats.n,
        }),
    }
}

/// One draw from `Inv-chi^2(dof, scale)`, i.e. `dof * scale / X` with
/// `X ~ chi^2(dof)`. A zero scale returns `floor`; draws never fall below it.
pub fn sample_sigma2<R: Rng + ?Sized>(dof: usize, scale: f64, floor: f64, rng: &mut R) -> Result<f64> {
    if dof == 0 || !scale.is_finite() || scale < 0.0 || !(floor > 0.0) {
        return Err(CppError::Domain(format!(
            "inverse chi-square needs dof >= 1, scale >= 0, floor > 0 (dof={dof}, scale={scale}, floor={floor})"
        )));
    }
    if scale == 0.0 {
        return Ok(floor);
    }
    Ok(draw_inv_chi2(dof as f64, scale, rng).max(floor))
}

#[inline]
pub(crate) fn draw_inv_chi2<R: Rng + ?Sized>(dof: f64, scale: f64, rng: &mut R) -> f64 {
    let chi2 = ChiSquared::new(dof).expect("positive degrees of freedom");
    dof * scale / chi2.sample(rng)
}

#[inline]
pub(crate) fn draw_normal<R: Rng + ?Sized>(mean: f64, var: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + var.sqrt() * z
}

/// One draw from `N(ybar, sigma2 / n)`.
pub fn sample_mu<R: Rng + ?Sized>(stats: &GaussianSegmentStats, sigma2: f64, rng: &mut R) -> Result<f64> {
    let mean = stats.mean().ok_or(CppError::InsufficientData {
        needed: 1,
        got: 0,
    })?;
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(CppError::Domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    Ok(draw_normal(mean, sigma2 / stats.n as f64, rng))
}

/// Point estimate or posterior draw of `(mu, sigma^2)` for one segment.
///
/// With fewer than two points, or zero spread, the variance is `floor`.
pub fn estimate_draw<R: Rng + ?Sized>(
    stats: &GaussianSegmentStats,
    mode: EstimationMode,
    floor: f64,
    rng: &mut R,
) -> Result<PosteriorDraw> {
    let mean = stats.mean().ok_or(CppError::InsufficientData {
        needed: 1,
        got: 0,
    })?;
    let (mu, sigma2) = match mode {
        EstimationMode::PlugIn => {
            let s2 = stats.sample_variance().unwrap_or(0.0);
            (mean, s2.max(floor))
        }
        EstimationMode::PosteriorSample => {
            let sigma2 = match posterior_sigma2_params(stats) {
                Ok((dof, s2)) => sample_sigma2(dof, s2, floor, rng)?,
                Err(_) => floor,
            };
            (sample_mu(stats, sigma2, rng)?, sigma2)
        }
    };
    Ok(PosteriorDraw {
        mu,
        sigma2,
        source: mode,
    })
}
