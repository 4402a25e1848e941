// SPDX-License-Identifier: MIT OR Apache-2.0

//! Generalized likelihood ratio test for a shift in the mean of a Gaussian
//! sequence with known pre-change mean `mu0` and known variance.
//!
//! ```text
//! g_k = max_{1<=j<=k} sup_{|nu| >= nu_min} sum_{i=j}^{k} [ nu (x_i - mu0) - nu^2 / 2 ] / sigma^2
//! ```
//!
//! For a candidate onset `j` with `m = k - j + 1` points and deviation sum
//! `S`, the inner supremum is attained at `nu = S / m` when
//! `|S / m| >= nu_min`, giving `S^2 / (2 sigma^2 m)`; otherwise at
//! `nu = sign(S) nu_min`. An onset after `k` (no change yet) contributes 0,
//! so `g_k >= 0`.

use serde::{Deserialize, Serialize};

use crate::detector::OnlineDetector;
use crate::error::{ensure_finite, CppError, Result};
use crate::gaussian_stats::PrefixStats;

pub const DEFAULT_NU_MIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlrConfig {
    pub mu0: f64,
    pub sigma: f64,
    /// Smallest change magnitude considered.
    pub nu_min: f64,
    /// Alarm threshold `h`.
    pub threshold_h: f64,
}

impl GlrConfig {
    pub fn new(mu0: f64, sigma: f64) -> Self {
        Self {
            mu0,
            sigma,
            nu_min: DEFAULT_NU_MIN,
            threshold_h: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu0.is_finite() {
            return Err(CppError::InvalidConfig(format!("mu0 must be finite, got {}", self.mu0)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(CppError::InvalidConfig(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.nu_min >= 0.0 && self.nu_min.is_finite()) {
            return Err(CppError::InvalidConfig(format!("nu_min must be non-negative, got {}", self.nu_min)));
        }
        if !(self.threshold_h > 0.0) {
            return Err(CppError::InvalidConfig(format!("threshold must be positive, got {}", self.threshold_h)));
        }
        Ok(())
    }
}

/// Log-likelihood ratio of a segment with `m` points and deviation sum `s`,
/// maximized over `|nu| >= nu_min`.
#[inline]
pub fn segment_ratio(s: f64, m: usize, sigma2: f64, nu_min: f64) -> f64 {
    let m = m as f64;
    let nu_hat = s / m;
    if nu_hat.abs() >= nu_min {
        s * s / (2.0 * sigma2 * m)
    } else {
        let nu = if s < 0.0 { -nu_min } else { nu_min };
        (nu * s - 0.5 * m * nu * nu) / sigma2
    }
}

/// Running sums for the GLR decision function.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GlrState {
    prefix: PrefixStats,
}

impl GlrState {
    pub fn new() -> Self {
        Self {
            prefix: PrefixStats::new(),
        }
    }

    pub fn from_slice(xs: &[f64]) -> Result<Self> {
        let mut state = Self::new();
        for &x in xs {
            state.observe(x)?;
        }
        Ok(state)
    }

    /// Number of observations processed.
    pub fn k(&self) -> usize {
        self.prefix.len()
    }

    pub fn observe(&mut self, x: f64) -> Result<()> {
        ensure_finite(x)?;
        self.prefix.push(x);
        Ok(())
    }

    /// `g_k` for the observations so far; 0 before any data.
    pub fn decision(&self, config: &GlrConfig) -> f64 {
        let k = self.k();
        let sigma2 = config.sigma * config.sigma;
        let shift = config.mu0 - self.prefix.origin();
        let mut best = 0.0_f64;
        for j in 1..=k {
            let seg = self.prefix.segment(j - 1, k);
            let s = seg.sum - seg.n as f64 * shift;
            best = best.max(segment_ratio(s, seg.n, sigma2, config.nu_min));
        }
        best
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| CppError::Snapshot(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CppError::Snapshot(e.to_string()))
    }
}

/// [`GlrState`] bundled with its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlrDetector {
    config: GlrConfig,
    state: GlrState,
    statistic: f64,
}

impl GlrDetector {
    pub fn new(config: GlrConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            state: GlrState::new(),
            statistic: 0.0,
        })
    }

    pub fn config(&self) -> &GlrConfig {
        &self.config
    }

    pub fn state(&self) -> &GlrState {
        &self.state
    }

    pub fn alarm(&self) -> bool {
        self.statistic >= self.config.threshold_h
    }
}

impl OnlineDetector for GlrDetector {
    fn observe(&mut self, x: f64) -> Result<f64> {
        self.state.observe(x)?;
        self.statistic = self.state.decision(&self.config);
        Ok(self.statistic)
    }

    fn statistic(&self) -> f64 {
        self.statistic
    }

    fn steps(&self) -> usize {
        self.state.k()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn config(mu0: f64, sigma: f64, nu_min: f64) -> GlrConfig {
        GlrConfig {
            mu0,
            sigma,
            nu_min,
            threshold_h: 1.0,
        }
    }

    /// Double loop over onsets and a fine grid of change sizes.
    fn grid_oracle(xs: &[f64], cfg: &GlrConfig) -> f64 {
        let sigma2 = cfg.sigma * cfg.sigma;
        let k = xs.len();
        let mut best = 0.0_f64;
        let steps = 40_000;
        for j in 0..k {
            let seg = &xs[j..];
            let s: f64 = seg.iter().map(|x| x - cfg.mu0).sum();
            let m = seg.len() as f64;
            let span = (s / m).abs().max(cfg.nu_min) * 1.5 + 0.1;
            for g in 0..=steps {
                let nu = -span + 2.0 * span * g as f64 / steps as f64;
                if nu.abs() < cfg.nu_min {
                    continue;
                }
                best = best.max((nu * s - 0.5 * m * nu * nu) / sigma2);
            }
            for nu in [cfg.nu_min, -cfg.nu_min] {
                best = best.max((nu * s - 0.5 * m * nu * nu) / sigma2);
            }
        }
        best
    }

    #[test]
    fn flat_data_gives_zero() {
        let state = GlrState::from_slice(&[2.0; 25]).unwrap();
        assert_eq!(state.decision(&config(2.0, 1.0, 0.0)), 0.0);
        assert_eq!(state.decision(&config(2.0, 1.0, 0.5)), 0.0);
        assert_eq!(GlrState::new().decision(&config(0.0, 1.0, 0.0)), 0.0);
    }

    #[test]
    fn single_point_closed_form() {
        for d in [-2.0, 0.3, 1.7] {
            let state = GlrState::from_slice(&[d]).unwrap();
            assert_relative_eq!(state.decision(&config(0.0, 1.0, 0.0)), d * d / 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn matches_grid_search() {
        let mut r = rng::stream(42);
        let noise = Normal::new(0.0, 1.0).unwrap();
        for (case, nu_min) in [0.0, 0.5, 1.5].into_iter().enumerate() {
            let xs: Vec<f64> = (0..50).map(|i| noise.sample(&mut r) + if i > 30 { 0.8 } else { 0.0 }).collect();
            let cfg = config(0.1 * case as f64, 1.3, nu_min);
            let state = GlrState::from_slice(&xs).unwrap();
            let oracle = grid_oracle(&xs, &cfg);
            assert!((state.decision(&cfg) - oracle).abs() < 1e-4, "nu_min={nu_min}: {} vs {oracle}", state.decision(&cfg));
        }
    }

    #[test]
    fn observe_counts_and_rejects_nan() {
        let mut state = GlrState::new();
        for x in [0.1, 0.2, 0.3] {
            state.observe(x).unwrap();
        }
        assert_eq!(state.k(), 3);
        assert!(state.observe(f64::NAN).is_err());
        assert_eq!(state.k(), 3);
    }

    #[test]
    fn state_round_trips_through_json() {
        let state = GlrState::from_slice(&[1.0, -0.5, 2.25]).unwrap();
        let back = GlrState::from_json(&state.to_json().unwrap()).unwrap();
        assert_eq!(state, back);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(GlrDetector::new(config(0.0, 0.0, 0.5)).is_err());
        assert!(GlrDetector::new(config(0.0, 1.0, -1.0)).is_err());
    }

    proptest! {
        #[test]
        fn incremental_equals_batch(xs in prop::collection::vec(-4.0f64..4.0, 1..120), nu_min in 0.0f64..1.0) {
            let cfg = config(0.2, 0.8, nu_min);
            let mut detector = GlrDetector::new(cfg).unwrap();
            for (k, &x) in xs.iter().enumerate() {
                let online = detector.observe(x).unwrap();
                let batch = GlrState::from_slice(&xs[..=k]).unwrap().decision(&cfg);
                prop_assert!((online - batch).abs() <= 1e-9 * batch.abs().max(1.0));
            }
        }

        #[test]
        fn translation_invariance(xs in prop::collection::vec(-4.0f64..4.0, 1..80), shift in -1e3f64..1e3) {
            let a = GlrState::from_slice(&xs).unwrap().decision(&config(0.3, 1.1, 0.4));
            let moved: Vec<f64> = xs.iter().map(|x| x + shift).collect();
            let b = GlrState::from_slice(&moved).unwrap().decision(&config(0.3 + shift, 1.1, 0.4));
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }

        #[test]
        fn unconstrained_form_is_max_squared_sum(xs in prop::collection::vec(-3.0f64..3.0, 1..60)) {
            let cfg = config(0.0, 1.0, 0.0);
            let expected = (0..xs.len())
                .map(|j| {
                    let s: f64 = xs[j..].iter().sum();
                    s * s / (2.0 * (xs.len() - j) as f64)
                })
                .fold(0.0, f64::max);
            let got = GlrState::from_slice(&xs).unwrap().decision(&cfg);
            prop_assert!((got - expected).abs() <= 1e-9 * expected.max(1.0));
        }
    }
}
