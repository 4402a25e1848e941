// SPDX-License-Identifier: MIT OR Apache-2.0

//! Posterior over the location of a single changepoint.
//!
//! Two closed subproblems: the window is known to contain exactly one
//! changepoint, or it is known to contain zero or one. A changepoint at
//! position `i` means `x_1..x_i` follow the pre-change law and
//! `x_{i+1}..x_n` the post-change law; both sides must be non-empty, so
//! `i` ranges over `1..n-1`.
//!
//! The post-change mean is never known. It is either plugged in as the
//! segment mean or drawn from its conjugate posterior, by default once per
//! hypothesis: a Monte-Carlo stand-in for integrating it out.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CppError, Result};
use crate::gaussian_stats::{
    draw_inv_chi2, draw_normal, segment_loglik, EstimationMode, GaussianSegmentStats, PrefixStats,
    VarianceFloor,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanMode {
    Known(f64),
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// Known standard deviation.
    Known(f64),
    /// Common variance estimated from the within-segment residuals.
    Estimated,
}

pub const DEFAULT_CHANGE_PRIOR: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleCpModel {
    /// Pre-change mean of the first segment.
    pub mu0: MeanMode,
    pub sigma: SigmaMode,
    /// Per-step changepoint probability `f`.
    pub change_prior: f64,
    pub estimation: EstimationMode,
    /// Posterior draws averaged per hypothesis and step (likelihood scale);
    /// ignored under plug-in estimation.
    #[serde(default = "one_draw")]
    pub draws: usize,
    #[serde(default)]
    pub floor: VarianceFloor,
}

fn one_draw() -> usize {
    1
}

impl Default for SingleCpModel {
    fn default() -> Self {
        Self {
            mu0: MeanMode::Estimated,
            sigma: SigmaMode::Estimated,
            change_prior: DEFAULT_CHANGE_PRIOR,
            estimation: EstimationMode::default(),
            draws: 1,
            floor: VarianceFloor::default(),
        }
    }
}

impl SingleCpModel {
    /// Known pre-change mean and known standard deviation.
    pub fn known(mu0: f64, sigma: f64) -> Self {
        Self {
            mu0: MeanMode::Known(mu0),
            sigma: SigmaMode::Known(sigma),
            ..Self::default()
        }
    }

    pub fn with_change_prior(mut self, f: f64) -> Self {
        self.change_prior = f;
        self
    }

    pub fn with_estimation(mut self, mode: EstimationMode) -> Self {
        self.estimation = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.change_prior > 0.0 && self.change_prior < 1.0) {
            return Err(CppError::InvalidConfig(format!(
                "change prior must lie in (0, 1), got {}",
                self.change_prior
            )));
        }
        if let MeanMode::Known(mu) = self.mu0 {
            if !mu.is_finite() {
                return Err(CppError::InvalidConfig(format!("known mean must be finite, got {mu}")));
            }
        }
        if let SigmaMode::Known(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(CppError::InvalidConfig(format!("known sigma must be positive, got {s}")));
            }
        }
        if self.draws == 0 {
            return Err(CppError::InvalidConfig("draws must be at least 1".into()));
        }
        if !(self.floor.relative > 0.0 && self.floor.relative.is_finite()) {
            return Err(CppError::InvalidConfig("variance floor must be positive".into()));
        }
        Ok(())
    }
}

/// Probabilities indexed by absolute 1-based series position, covering
/// `start .. start + values.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ProbabilityVector {
    pub start: usize,
    pub values: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(start: usize, values: Vec<f64>) -> Self {
        Self { start, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Probability at absolute position `i` (zero outside the window).
    pub fn get(&self, i: usize) -> f64 {
        i.checked_sub(self.start)
            .and_then(|k| self.values.get(k))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Position of the largest entry; the smallest position wins ties.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (k, &v) in self.values.iter().enumerate() {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((k, v));
            }
        }
        best.map(|(k, _)| self.start + k)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().map(move |(k, &v)| (self.start + k, v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum VarianceModel {
    Known(f64),
    Pooled,
    Separate,
}

/// A segment `(a, b]` of the prefix arrays, with an optional known mean in
/// shifted coordinates.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Segment {
    pub stats: GaussianSegmentStats,
    pub known_mean: Option<f64>,
}

/// Evaluates hypothesis log-likelihoods over intervals of one series.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SplitScorer<'a> {
    pub prefix: &'a PrefixStats,
    pub variance: VarianceModel,
    pub estimation: EstimationMode,
    /// Absolute variance floor.
    pub floor: f64,
    /// Reference variance used for pseudo-observations and as the fallback
    /// when no residual degrees of freedom remain.
    pub reference_var: f64,
    /// Pseudo-observations of `reference_var` added to each variance
    /// estimate.
    pub pseudo_obs: f64,
    pub draws: usize,
}

impl<'a> SplitScorer<'a> {
    pub fn new(prefix: &'a PrefixStats, model: &SingleCpModel, variance_change: bool, pseudo_obs: f64) -> Self {
        let reference = prefix.variance();
        let floor = model.floor.resolve(reference);
        let variance = if variance_change {
            VarianceModel::Separate
        } else {
            match model.sigma {
                SigmaMode::Known(s) => VarianceModel::Known(s * s),
                SigmaMode::Estimated => VarianceModel::Pooled,
            }
        };
        Self {
            prefix,
            variance,
            estimation: model.estimation,
            floor,
            reference_var: reference.filter(|v| *v > 0.0).unwrap_or(1.0),
            pseudo_obs: if variance_change { pseudo_obs } else { 0.0 },
            draws: match model.estimation {
                EstimationMode::PlugIn => 1,
                EstimationMode::PosteriorSample => model.draws.max(1),
            },
        }
    }

    /// Shifted form of a mean mode.
    pub fn shift(&self, mode: MeanMode) -> Option<f64> {
        match mode {
            MeanMode::Known(mu) => Some(mu - self.prefix.origin()),
            MeanMode::Estimated => None,
        }
    }

    #[inline]
    pub fn segment(&self, a: usize, b: usize, known_mean: Option<f64>) -> Segment {
        Segment {
            stats: self.prefix.segment(a, b),
            known_mean,
        }
    }

    /// Residual sum of squares about the known mean or the segment mean.
    #[inline]
    fn residual(seg: &Segment) -> (f64, usize) {
        let n = seg.stats.n;
        match seg.known_mean {
            Some(mu) => {
                let d = seg.stats.sum / n as f64 - mu;
                (seg.stats.sum_sq_dev() + n as f64 * d * d, n)
            }
            None => (seg.stats.sum_sq_dev(), n.saturating_sub(1)),
        }
    }

    #[inline]
    fn variance_draw<R: Rng + ?Sized>(&self, ss: f64, dof: usize, rng: &mut R) -> f64 {
        let dof = dof as f64 + self.pseudo_obs;
        if dof <= 0.0 {
            return self.reference_var.max(self.floor);
        }
        let scale = (ss + self.pseudo_obs * self.reference_var) / dof;
        if scale <= 0.0 {
            return self.floor;
        }
        match self.estimation {
            EstimationMode::PlugIn => scale.max(self.floor),
            EstimationMode::PosteriorSample => draw_inv_chi2(dof, scale, rng).max(self.floor),
        }
    }

    #[inline]
    fn mean_draw<R: Rng + ?Sized>(&self, seg: &Segment, var: f64, rng: &mut R) -> f64 {
        match seg.known_mean {
            Some(mu) => mu,
            None => {
                let n = seg.stats.n as f64;
                let mean = seg.stats.sum / n;
                match self.estimation {
                    EstimationMode::PlugIn => mean,
                    EstimationMode::PosteriorSample => draw_normal(mean, var / n, rng),
                }
            }
        }
    }

    /// Mean (shifted) and variance of one segment estimated on its own.
    pub fn separate_draw<R: Rng + ?Sized>(&self, seg: &Segment, rng: &mut R) -> (f64, f64) {
        let (ss, dof) = Self::residual(seg);
        let var = self.variance_draw(ss, dof, rng);
        (self.mean_draw(seg, var, rng), var)
    }

    /// Log-likelihood of consecutive non-empty segments under the configured
    /// variance model, with estimated parameters plugged in or drawn.
    pub fn loglik<R: Rng + ?Sized>(&self, segments: &[Segment], rng: &mut R) -> f64 {
        match self.variance {
            VarianceModel::Known(var) => segments
                .iter()
                .map(|seg| {
                    let mu = self.mean_draw(seg, var, rng);
                    segment_loglik(&seg.stats, mu, var)
                })
                .sum(),
            VarianceModel::Pooled => {
                let (ss, dof) = segments.iter().fold((0.0, 0usize), |(ss, dof), seg| {
                    let (s, d) = Self::residual(seg);
                    (ss + s, dof + d)
                });
                let var = self.variance_draw(ss, dof, rng);
                segments
                    .iter()
                    .map(|seg| {
                        let mu = self.mean_draw(seg, var, rng);
                        segment_loglik(&seg.stats, mu, var)
                    })
                    .sum()
            }
            VarianceModel::Separate => segments
                .iter()
                .map(|seg| {
                    let (mu, var) = self.separate_draw(seg, rng);
                    segment_loglik(&seg.stats, mu, var)
                })
                .sum(),
        }
    }

    /// Log of the likelihood averaged over `draws` parameter draws.
    fn hypothesis_loglik<R: Rng + ?Sized>(&self, segments: &[Segment], rng: &mut R) -> f64 {
        if self.draws == 1 {
            return self.loglik(segments, rng);
        }
        let lls: Vec<f64> = (0..self.draws).map(|_| self.loglik(segments, rng)).collect();
        let max = lls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max + (lls.iter().map(|l| (l - max).exp()).sum::<f64>() / self.draws as f64).ln()
    }

    /// Unnormalized log-weights of "exactly one changepoint in `(a, b]`" for
    /// split positions `a + min_seg ..= b - min_seg`, written to `out`.
    pub fn exactly_one_log_weights<R: Rng + ?Sized>(
        &self,
        a: usize,
        b: usize,
        pre_mean: Option<f64>,
        min_seg: usize,
        rng: &mut R,
        out: &mut Vec<f64>,
    ) {
        out.clear();
        if b < a + 2 * min_seg {
            return;
        }
        for i in (a + min_seg)..=(b - min_seg) {
            let segs = [self.segment(a, i, pre_mean), self.segment(i, b, None)];
            out.push(self.hypothesis_loglik(&segs, rng));
        }
    }

    /// Log-weights of the no-change hypothesis and of each split position
    /// `min_seg ..= n - min_seg` over `(0, n]`, with the improper priors
    /// `(1-f)^n` and `f (1-f)^(n-1)`.
    pub fn zero_or_one_log_weights<R: Rng + ?Sized>(
        &self,
        n: usize,
        pre_mean: Option<f64>,
        change_prior: f64,
        min_seg: usize,
        rng: &mut R,
        out: &mut Vec<f64>,
    ) -> f64 {
        let log_stay = (1.0 - change_prior).ln();
        let log_none = n as f64 * log_stay + self.hypothesis_loglik(&[self.segment(0, n, pre_mean)], rng);
        let log_change = change_prior.ln() + (n as f64 - 1.0) * log_stay;
        out.clear();
        if n >= 2 * min_seg {
            for i in min_seg..=(n - min_seg) {
                let segs = [self.segment(0, i, pre_mean), self.segment(i, n, None)];
                out.push(log_change + self.hypothesis_loglik(&segs, rng));
            }
        }
        log_none
    }
}

/// In-place softmax; returns the log of the normalizing sum.
pub(crate) fn normalize_log_weights(weights: &mut [f64], extra: &mut [f64]) -> f64 {
    let max = weights
        .iter()
        .chain(extra.iter())
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        let n = (weights.len() + extra.len()) as f64;
        for w in weights.iter_mut().chain(extra.iter_mut()) {
            *w = 1.0 / n;
        }
        return f64::NAN;
    }
    let mut total = 0.0;
    for w in weights.iter_mut().chain(extra.iter_mut()) {
        *w = (*w - max).exp();
        total += *w;
    }
    for w in weights.iter_mut().chain(extra.iter_mut()) {
        *w /= total;
    }
    max + total.ln()
}

/// Posterior over the single changepoint location when the window is known
/// to contain exactly one. Positions `1..n-1`; sums to one.
pub fn posterior_exactly_one<R: Rng + ?Sized>(
    window: &[f64],
    model: &SingleCpModel,
    rng: &mut R,
) -> Result<ProbabilityVector> {
    model.validate()?;
    check_window(window, 2)?;
    let prefix = PrefixStats::from_slice(window);
    let scorer = SplitScorer::new(&prefix, model, false, 0.0);
    let mut weights = Vec::with_capacity(window.len());
    scorer.exactly_one_log_weights(0, window.len(), scorer.shift(model.mu0), 1, rng, &mut weights);
    normalize_log_weights(&mut weights, &mut []);
    Ok(ProbabilityVector::new(1, weights))
}

/// Posterior when the window holds zero or one changepoints. Returns the
/// no-change probability and the split probabilities over positions
/// `1..n-1`; together they sum to one.
pub fn posterior_zero_or_one<R: Rng + ?Sized>(
    window: &[f64],
    model: &SingleCpModel,
    rng: &mut R,
) -> Result<(f64, ProbabilityVector)> {
    model.validate()?;
    check_window(window, 1)?;
    let prefix = PrefixStats::from_slice(window);
    let scorer = SplitScorer::new(&prefix, model, false, 0.0);
    let mut weights = Vec::with_capacity(window.len());
    let log_none = scorer.zero_or_one_log_weights(
        window.len(),
        scorer.shift(model.mu0),
        model.change_prior,
        1,
        rng,
        &mut weights,
    );
    let mut none = [log_none];
    normalize_log_weights(&mut weights, &mut none);
    Ok((none[0], ProbabilityVector::new(1, weights)))
}

pub(crate) fn check_window(window: &[f64], needed: usize) -> Result<()> {
    if window.len() < needed {
        return Err(CppError::InsufficientData {
            needed,
            got: window.len(),
        });
    }
    if let Some(&bad) = window.iter().find(|v| !v.is_finite()) {
        return Err(CppError::NonFinite { value: bad });
    }
    Ok(())
}
