// SPDX-License-Identifier: MIT OR Apache-2.0

//! Changepoints in mean and variance: each side of a split gets its own
//! `(mu, sigma^2)`, plugged in or drawn from the noninformative-prior
//! posterior of that segment.
//!
//! A short run of near-identical values has a tiny sample variance and
//! would otherwise dominate the posterior. Every segment variance is
//! therefore estimated with `variance_pseudo_obs` extra observations of the
//! window variance and is never allowed below the variance floor.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cpp_kernel::CppConfig;
use crate::error::{CppError, Result};
use crate::gaussian_stats::{EstimationMode, PosteriorDraw, PrefixStats};
use crate::single_change::{check_window, normalize_log_weights, ProbabilityVector, SplitScorer};

/// Shortest segment on either side of a split.
pub const MIN_SEGMENT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSegmentDraw {
    pub pre: PosteriorDraw,
    pub post: PosteriorDraw,
}

/// Exactly-one-changepoint posterior with separate variances, over split
/// positions `2 ..= n-2`.
pub fn posterior_exactly_one_var<R: Rng + ?Sized>(
    window: &[f64],
    config: &CppConfig,
    rng: &mut R,
) -> Result<ProbabilityVector> {
    config.validate()?;
    check_window(window, 2 * MIN_SEGMENT)?;
    let prefix = PrefixStats::from_slice(window);
    let scorer = SplitScorer::new(&prefix, &config.model, true, config.variance_pseudo_obs);
    let mut weights = Vec::with_capacity(window.len());
    scorer.exactly_one_log_weights(
        0,
        window.len(),
        scorer.shift(config.model.mu0),
        MIN_SEGMENT,
        rng,
        &mut weights,
    );
    normalize_log_weights(&mut weights, &mut []);
    Ok(ProbabilityVector::new(MIN_SEGMENT, weights))
}

/// Parameters used for the two segments of a split at `split`, in data
/// units.
pub fn two_segment_draw<R: Rng + ?Sized>(
    window: &[f64],
    split: usize,
    config: &CppConfig,
    rng: &mut R,
) -> Result<TwoSegmentDraw> {
    config.validate()?;
    check_window(window, 2 * MIN_SEGMENT)?;
    let n = window.len();
    if split < MIN_SEGMENT || split + MIN_SEGMENT > n {
        return Err(CppError::Domain(format!(
            "split {split} leaves fewer than {MIN_SEGMENT} points on a side of a {n}-point window"
        )));
    }
    let prefix = PrefixStats::from_slice(window);
    let scorer = SplitScorer::new(&prefix, &config.model, true, config.variance_pseudo_obs);
    let origin = prefix.origin();
    let source = config.model.estimation;
    let draw = |(mu, sigma2): (f64, f64), source: EstimationMode| PosteriorDraw {
        mu: mu + origin,
        sigma2,
        source,
    };
    let pre = scorer.separate_draw(&scorer.segment(0, split, scorer.shift(config.model.mu0)), rng);
    let post = scorer.separate_draw(&scorer.segment(split, n, None), rng);
    Ok(TwoSegmentDraw {
        pre: draw(pre, source),
        post: draw(post, source),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpp_kernel::CppDetector;
    use crate::rng;
    use rand_distr::{Distribution, Normal};

    fn draws(segments: &[(usize, f64, f64)], seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed);
        segments
            .iter()
            .flat_map(|&(len, mu, sigma)| {
                let d = Normal::new(mu, sigma).unwrap();
                (0..len).map(|_| d.sample(&mut r)).collect::<Vec<_>>()
            })
            .collect()
    }

    fn config(mode: EstimationMode) -> CppConfig {
        let mut config = CppConfig::default();
        config.variance_change = true;
        config.model.estimation = mode;
        config
    }

    fn max_prob(p: &ProbabilityVector) -> f64 {
        p.iter().map(|(_, v)| v).fold(0.0, f64::max)
    }

    #[test]
    fn short_windows_are_rejected() {
        let config = config(EstimationMode::PlugIn);
        let err = posterior_exactly_one_var(&[1.0, 2.0, 3.0], &config, &mut rng::stream(0)).unwrap_err();
        assert!(matches!(err, CppError::InsufficientData { needed: 4, got: 3 }));
        let p = posterior_exactly_one_var(&[1.0, 2.0, 3.0, 4.0], &config, &mut rng::stream(0)).unwrap();
        assert_eq!((p.start, p.len()), (2, 1));
        assert!((p.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn covers_splits_two_through_n_minus_two() {
        let xs = draws(&[(30, 0.0, 1.0)], 1);
        let p = posterior_exactly_one_var(&xs, &config(EstimationMode::PosteriorSample), &mut rng::stream(1)).unwrap();
        assert_eq!(p.start, 2);
        assert_eq!(p.start + p.len() - 1, 28);
        assert!((p.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scale_equivariance() {
        for mode in [EstimationMode::PlugIn, EstimationMode::PosteriorSample] {
            for seed in 0..20u64 {
                let xs = draws(&[(25, 0.0, 1.0), (25, 0.5, 2.0)], seed);
                for c in [1e-3, 0.37, 12.0, 4e4] {
                    let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
                    let a = posterior_exactly_one_var(&xs, &config(mode), &mut rng::stream(seed)).unwrap();
                    let b = posterior_exactly_one_var(&scaled, &config(mode), &mut rng::stream(seed)).unwrap();
                    for (x, y) in a.values.iter().zip(&b.values) {
                        assert!((x - y).abs() <= 1e-6, "{mode:?} c={c}: {x} vs {y}");
                    }
                }
            }
        }
    }

    #[test]
    fn run_of_identical_values_does_not_capture_the_posterior() {
        for mode in [EstimationMode::PlugIn, EstimationMode::PosteriorSample] {
            for len in [30, 50] {
                for seed in 0..300u64 {
                    let mut xs = draws(&[(len, 0.0, 1.0)], 9000 + seed);
                    let at = (seed as usize * 7) % (len - 4);
                    xs[at..at + 5].fill(0.0);
                    let p = posterior_exactly_one_var(&xs, &config(mode), &mut rng::stream(seed)).unwrap();
                    let max = max_prob(&p);
                    assert!(max <= 0.9, "{mode:?} len={len} seed={seed}: {max}");
                }
            }
        }
    }

    #[test]
    fn without_pseudo_observations_a_run_dominates() {
        let mut bare = config(EstimationMode::PlugIn);
        bare.variance_pseudo_obs = 0.0;
        let captured = (0..100u64)
            .filter(|&seed| {
                let mut xs = draws(&[(30, 0.0, 1.0)], 9000 + seed);
                let at = (seed as usize * 7) % 26;
                xs[at..at + 5].fill(0.0);
                max_prob(&posterior_exactly_one_var(&xs, &bare, &mut rng::stream(seed)).unwrap()) > 0.9
            })
            .count();
        assert!(captured > 0);
    }

    #[test]
    fn identical_halves_stay_near_uniform() {
        let n = 100;
        let mut avg = vec![0.0; n - 3];
        for seed in 0..100u64 {
            let xs = draws(&[(n, 0.0, 1.0)], 5000 + seed);
            let p = posterior_exactly_one_var(&xs, &config(EstimationMode::PosteriorSample), &mut rng::stream(seed)).unwrap();
            for (slot, v) in avg.iter_mut().zip(&p.values) {
                *slot += v / 100.0;
            }
        }
        let uniform = 1.0 / (n - 3) as f64;
        let max = avg.iter().copied().fold(0.0, f64::max);
        assert!(max <= 5.0 * uniform, "{max} vs {}", 5.0 * uniform);
    }

    #[test]
    fn doubled_scale_is_localized() {
        let hits = (0..200u64)
            .filter(|&seed| {
                let xs = draws(&[(50, 0.0, 1.0), (50, 0.0, 2.0)], 7000 + seed);
                let p = posterior_exactly_one_var(&xs, &config(EstimationMode::PosteriorSample), &mut rng::stream(seed)).unwrap();
                (45..=55).contains(&p.argmax().unwrap())
            })
            .count();
        assert!(hits >= 140, "{hits}/200");
    }

    #[test]
    fn kernel_finds_the_variance_drop() {
        let hits = (0..50u64)
            .filter(|&seed| {
                let xs = draws(&[(50, 1.0, 1.0), (50, 0.0, 1.0), (50, 0.0, 0.5)], seed);
                let d = CppDetector::run(config(EstimationMode::PosteriorSample), 900 + seed, &xs).unwrap();
                (90..=110).contains(&d.p_last().unwrap().argmax().unwrap())
            })
            .count();
        assert!(hits >= 40, "{hits}/50");
    }

    #[test]
    fn two_segment_draw_respects_floor_and_plug_in() {
        let xs = [1.0, 1.0, 1.0, 5.0, 7.0];
        let config = config(EstimationMode::PlugIn);
        let draw = two_segment_draw(&xs, 3, &config, &mut rng::stream(0)).unwrap();
        assert!((draw.pre.mu - 1.0).abs() < 1e-12);
        assert!((draw.post.mu - 6.0).abs() < 1e-12);
        assert!(draw.pre.sigma2 > 0.0 && draw.post.sigma2 > 0.0);
        assert!(two_segment_draw(&xs, 1, &config, &mut rng::stream(0)).is_err());
        assert!(two_segment_draw(&xs, 4, &config, &mut rng::stream(0)).is_err());
        let sampled = config_sampled_draws(&xs);
        assert!(sampled.iter().all(|d| d.pre.sigma2 > 0.0 && d.post.sigma2 > 0.0));
    }

    fn config_sampled_draws(xs: &[f64]) -> Vec<TwoSegmentDraw> {
        let config = config(EstimationMode::PosteriorSample);
        let mut r = rng::stream(3);
        (0..100).map(|_| two_segment_draw(xs, 2, &config, &mut r).unwrap()).collect()
    }
}
