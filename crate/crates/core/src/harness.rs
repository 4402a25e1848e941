// SPDX-License-Identifier: MIT OR Apache-2.0

//! Detection-delay versus false-alarm benchmark.
//!
//! Each trial draws a changepoint time `t0 ~ Geometric(rho)` on `{1, 2, ..}`,
//! feeds `N(mu0, sigma^2)` observations before `t0` and `N(mu1, sigma^2)`
//! from `t0` on, and stops at the first step whose decision statistic
//! reaches the threshold. An alarm before `t0` is a false alarm; otherwise
//! the delay is `t_a - t0 + 1`. Trials with no alarm by step
//! `t0 + horizon_after_t0` are out of bounds (`t_a = inf`).
//!
//! Trial `i` takes its data from child stream `2i` of the scenario seed and
//! its detector randomness from stream `2i + 1`, so every detector sees
//! exactly the same observations for a given trial.

use rand::Rng;
use rand_distr::{Distribution, Geometric, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cpp_kernel::{CppConfig, CppDetector};
use crate::detector::OnlineDetector;
use crate::error::{CppError, Result};
use crate::glr::{GlrConfig, GlrDetector};
use crate::rng::{child_stream, RngStream};
use crate::single_change::SingleCpModel;

pub const DEFAULT_TRIM: f64 = 0.05;
/// Smallest number of non-false-alarm trials for which a trimmed mean is
/// reported.
pub const MIN_SURVIVING_TRIALS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub mu0: f64,
    pub mu1: f64,
    pub sigma: f64,
    /// Geometric onset parameter; mean `t0` is `1 / rho`.
    pub rho: f64,
    pub horizon_after_t0: usize,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            mu0: 0.0,
            mu1: 1.0,
            sigma: 1.0,
            rho: 0.02,
            horizon_after_t0: 100,
            seed: 2007,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(CppError::InvalidConfig(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(CppError::InvalidConfig(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !self.mu0.is_finite() || !self.mu1.is_finite() {
            return Err(CppError::InvalidConfig("means must be finite".into()));
        }
        if self.horizon_after_t0 == 0 {
            return Err(CppError::InvalidConfig("horizon_after_t0 must be positive".into()));
        }
        Ok(())
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn data_stream(&self, trial: usize) -> RngStream {
        child_stream(self.seed, 2 * trial as u64)
    }

    pub fn detector_stream(&self, trial: usize) -> RngStream {
        child_stream(self.seed, 2 * trial as u64 + 1)
    }
}

/// Geometric variate on `{1, 2, ...}` with `P(t0 = n) = (1 - rho)^(n-1) rho`.
pub fn sample_t0<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> Result<usize> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(CppError::Domain(format!("rho must lie in (0, 1), got {rho}")));
    }
    let geometric = Geometric::new(rho).map_err(|e| CppError::Domain(format!("rho={rho}: {e}")))?;
    Ok(geometric.sample(rng) as usize + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorKind {
    Cpp(CppConfig),
    Glr(GlrConfig),
}

impl DetectorKind {
    /// CPP with the scenario's `mu0` and `sigma` known.
    pub fn cpp_for(spec: &ScenarioSpec) -> Self {
        Self::Cpp(CppConfig::new(SingleCpModel::known(spec.mu0, spec.sigma)))
    }

    pub fn glr_for(spec: &ScenarioSpec) -> Self {
        Self::Glr(GlrConfig::new(spec.mu0, spec.sigma))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Cpp(_) => "cpp",
            Self::Glr(_) => "glr",
        }
    }

    /// Same detector with the scenario's known parameters substituted.
    pub fn adapted_to(&self, spec: &ScenarioSpec) -> Self {
        match self {
            Self::Cpp(config) => {
                let mut config = config.clone();
                config.model = SingleCpModel {
                    mu0: crate::single_change::MeanMode::Known(spec.mu0),
                    sigma: crate::single_change::SigmaMode::Known(spec.sigma),
                    ..config.model
                };
                Self::Cpp(config)
            }
            Self::Glr(config) => Self::Glr(GlrConfig {
                mu0: spec.mu0,
                sigma: spec.sigma,
                ..*config
            }),
        }
    }

    pub fn build(&self, rng: RngStream) -> Result<Box<dyn OnlineDetector + Send>> {
        Ok(match self {
            Self::Cpp(config) => Box::new(CppDetector::new(config.clone(), rng)?),
            Self::Glr(config) => Box::new(GlrDetector::new(*config)?),
        })
    }

    /// Default threshold grid for this detector's statistic.
    pub fn default_thresholds(&self) -> Vec<f64> {
        match self {
            Self::Cpp(_) => default_cpp_thresholds(),
            Self::Glr(_) => default_glr_thresholds(),
        }
    }
}

/// Probability-scale grid for CPP's `g_k = sum P(i+)`, dense where the
/// false-alarm rate falls through a few percent.
pub fn default_cpp_thresholds() -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=8).map(|k| 0.5 + 0.04 * k as f64).collect();
    grid.extend((1..=30).map(|k| 0.82 + 0.005 * k as f64));
    grid.extend([0.975, 0.98, 0.985, 0.99, 0.993, 0.995, 0.997, 0.998, 0.999]);
    grid
}

/// Log-spaced grid for the GLR statistic, from 1 to 30.
pub fn default_glr_thresholds() -> Vec<f64> {
    (0..=60).map(|k| 30f64.powf(k as f64 / 60.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub t0: usize,
    /// Alarm time; `None` when the trial went out of bounds.
    pub t_a: Option<usize>,
    pub false_alarm: bool,
    pub out_of_bounds: bool,
}

impl TrialRecord {
    fn from_alarm(trial: usize, t0: usize, t_a: Option<usize>) -> Self {
        Self {
            trial,
            t0,
            t_a,
            false_alarm: t_a.is_some_and(|t| t < t0),
            out_of_bounds: t_a.is_none(),
        }
    }

    /// `t_a - t0 + 1`, infinite when out of bounds, `None` for false alarms.
    pub fn delay(&self) -> Option<f64> {
        if self.false_alarm {
            return None;
        }
        Some(match self.t_a {
            Some(t) => (t + 1 - self.t0) as f64,
            None => f64::INFINITY,
        })
    }
}

/// Decision statistics of one trial, recorded until `stop_at` is reached or
/// the horizon expires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTrace {
    pub trial: usize,
    pub t0: usize,
    pub statistics: Vec<f64>,
}

impl TrialTrace {
    /// Outcome for threshold `h`: the first step with statistic `>= h`.
    pub fn record(&self, h: f64) -> TrialRecord {
        let t_a = self.statistics.iter().position(|&g| g >= h).map(|k| k + 1);
        TrialRecord::from_alarm(self.trial, self.t0, t_a)
    }
}

/// Drive `detector` over freshly generated trial data until the statistic
/// reaches `stop_at` or `t0 + horizon` steps have been observed.
fn drive<R: Rng + ?Sized>(
    spec: &ScenarioSpec,
    detector: &mut dyn OnlineDetector,
    stop_at: f64,
    data: &mut R,
) -> Result<(usize, Vec<f64>)> {
    let t0 = sample_t0(spec.rho, data)?;
    let before = Normal::new(spec.mu0, spec.sigma).map_err(|e| CppError::Domain(e.to_string()))?;
    let after = Normal::new(spec.mu1, spec.sigma).map_err(|e| CppError::Domain(e.to_string()))?;
    let limit = t0 + spec.horizon_after_t0;
    let mut statistics = Vec::with_capacity(limit.min(4096));
    for k in 1..=limit {
        let x = if k < t0 { before.sample(data) } else { after.sample(data) };
        let g = detector.observe(x)?;
        statistics.push(g);
        if g >= stop_at {
            break;
        }
    }
    Ok((t0, statistics))
}

/// One trial with a fresh `detector`, threshold `threshold_h` and data from
/// `rng`.
pub fn run_trial<R: Rng + ?Sized>(
    spec: &ScenarioSpec,
    detector: &mut dyn OnlineDetector,
    threshold_h: f64,
    rng: &mut R,
) -> Result<TrialRecord> {
    spec.validate()?;
    if detector.steps() != 0 {
        return Err(CppError::InvalidConfig("run_trial needs a fresh detector".into()));
    }
    let (t0, statistics) = drive(spec, detector, threshold_h, rng)?;
    Ok(TrialTrace {
        trial: 0,
        t0,
        statistics,
    }
    .record(threshold_h))
}

/// Trial `index` of `spec` run with a detector of `kind`, stopping once
/// `stop_at` is reached.
pub fn trace_trial(spec: &ScenarioSpec, kind: &DetectorKind, index: usize, stop_at: f64) -> Result<TrialTrace> {
    let wrap = |e: CppError| CppError::Trial {
        trial: index,
        source: Box::new(e),
    };
    let mut detector = kind.build(spec.detector_stream(index)).map_err(wrap)?;
    let (t0, statistics) = drive(spec, detector.as_mut(), stop_at, &mut spec.data_stream(index)).map_err(wrap)?;
    Ok(TrialTrace {
        trial: index,
        t0,
        statistics,
    })
}

/// Observations consumed by trial `index` for its first `steps` steps.
pub fn trial_data(spec: &ScenarioSpec, index: usize, steps: usize) -> Result<(usize, Vec<f64>)> {
    struct Recorder(Vec<f64>);
    impl OnlineDetector for Recorder {
        fn observe(&mut self, x: f64) -> Result<f64> {
            self.0.push(x);
            Ok(0.0)
        }
        fn statistic(&self) -> f64 {
            0.0
        }
        fn steps(&self) -> usize {
            self.0.len()
        }
    }
    let mut recorder = Recorder(Vec::new());
    let short = ScenarioSpec {
        horizon_after_t0: steps,
        ..*spec
    };
    let (t0, _) = drive(&short, &mut recorder, f64::INFINITY, &mut spec.data_stream(index))?;
    recorder.0.truncate(steps);
    Ok((t0, recorder.0))
}

/// Mean of `t_a - t0 + 1` over non-false-alarm trials after discarding the
/// smallest and largest `trim_fraction` of them. Out-of-bounds trials count
/// as infinite delays and must number fewer than `trim_fraction` of the
/// surviving trials.
pub fn trimmed_mean_delay(records: &[TrialRecord], trim_fraction: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&trim_fraction) {
        return Err(CppError::InvalidAggregate(format!("trim fraction {trim_fraction} outside [0, 0.5)")));
    }
    let mut delays: Vec<f64> = records.iter().filter_map(TrialRecord::delay).collect();
    let count = delays.len();
    if count < MIN_SURVIVING_TRIALS {
        return Err(CppError::InvalidAggregate(format!(
            "{count} trials without false alarm, need at least {MIN_SURVIVING_TRIALS}"
        )));
    }
    let out_of_bounds = delays.iter().filter(|d| d.is_infinite()).count();
    let limit = trim_fraction * count as f64;
    if out_of_bounds as f64 >= limit && out_of_bounds > 0 {
        return Err(CppError::TooManyOutOfBounds {
            out_of_bounds,
            count,
            limit,
        });
    }
    delays.sort_by(f64::total_cmp);
    let cut = (limit + 1e-9).floor() as usize;
    let kept = &delays[cut..count - cut];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub detector: String,
    pub h: f64,
    /// False-alarm fraction over all trials.
    pub alpha: f64,
    /// Trimmed mean delay; `None` when the aggregate is invalid.
    pub mean_delay: Option<f64>,
    pub n_trials: usize,
    pub n_false_alarms: usize,
    pub n_oob: usize,
    /// Why `mean_delay` is missing, if it is.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub detector: String,
    pub scenario: ScenarioSpec,
    pub rows: Vec<SweepRow>,
}

/// Aggregate precomputed traces at each threshold.
pub fn sweep_from_traces(
    detector: &str,
    spec: &ScenarioSpec,
    traces: &[TrialTrace],
    thresholds: &[f64],
) -> SweepResult {
    let rows = thresholds
        .iter()
        .map(|&h| {
            let records: Vec<TrialRecord> = traces.iter().map(|t| t.record(h)).collect();
            let n_false_alarms = records.iter().filter(|r| r.false_alarm).count();
            let n_oob = records.iter().filter(|r| r.out_of_bounds).count();
            let (mean_delay, note) = match trimmed_mean_delay(&records, DEFAULT_TRIM) {
                Ok(d) => (Some(d), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SweepRow {
                detector: detector.to_string(),
                h,
                alpha: n_false_alarms as f64 / records.len().max(1) as f64,
                mean_delay,
                n_trials: records.len(),
                n_false_alarms,
                n_oob,
                note,
            }
        })
        .collect();
    SweepResult {
        detector: detector.to_string(),
        scenario: *spec,
        rows,
    }
}

/// Run `n_trials` trials once each and evaluate every threshold on the
/// recorded statistics. A detector's evolution does not depend on the
/// threshold, so stopping at the largest threshold yields the same first
/// alarm for every smaller one.
pub fn run_traces(spec: &ScenarioSpec, kind: &DetectorKind, thresholds: &[f64], n_trials: usize) -> Result<Vec<TrialTrace>> {
    spec.validate()?;
    if thresholds.is_empty() {
        return Err(CppError::InvalidConfig("threshold list is empty".into()));
    }
    if n_trials == 0 {
        return Err(CppError::InvalidConfig("n_trials must be positive".into()));
    }
    let stop_at = thresholds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut traces = (0..n_trials)
        .into_par_iter()
        .map(|i| trace_trial(spec, kind, i, stop_at))
        .collect::<Result<Vec<_>>>()?;
    traces.sort_by_key(|t| t.trial);
    Ok(traces)
}

pub fn threshold_sweep(
    spec: &ScenarioSpec,
    kind: &DetectorKind,
    thresholds: &[f64],
    n_trials: usize,
) -> Result<SweepResult> {
    let traces = run_traces(spec, kind, thresholds, n_trials)?;
    let mut sorted = thresholds.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sweep_from_traces(kind.name(), spec, &traces, &sorted))
}

/// Mean delay at false-alarm probability `alpha`, by linear interpolation
/// between the two bracketing sweep rows with valid delays.
pub fn interpolate_at_alpha(sweep: &SweepResult, alpha: f64) -> Result<f64> {
    let mut points: Vec<(f64, f64)> = sweep
        .rows
        .iter()
        .filter_map(|r| r.mean_delay.map(|d| (r.alpha, d)))
        .collect();
    // ascending alpha; among equal alphas keep the smallest delay (largest
    // reachable detection speed at that false-alarm level)
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    points.dedup_by(|b, a| a.0 == b.0);
    if let Some(&(_, d)) = points.iter().find(|(a, _)| *a == alpha) {
        return Ok(d);
    }
    for w in points.windows(2) {
        let ((a0, d0), (a1, d1)) = (w[0], w[1]);
        if a0 < alpha && alpha < a1 {
            return Ok(d0 + (d1 - d0) * (alpha - a0) / (a1 - a0));
        }
    }
    Err(CppError::InvalidAggregate(format!(
        "alpha {alpha} not spanned by {} valid sweep rows of {}",
        points.len(),
        sweep.detector
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub sigma: f64,
    pub alpha: f64,
    pub cpp_delay: Option<f64>,
    pub glr_delay: Option<f64>,
}

/// CPP and GLR sweeps on identical data, summarized at `alpha`.
pub fn compare_at_alpha(
    spec: &ScenarioSpec,
    cpp: &DetectorKind,
    glr: &DetectorKind,
    n_trials: usize,
    alpha: f64,
) -> Result<(SweepResult, SweepResult, ComparisonRow)> {
    let cpp = cpp.adapted_to(spec);
    let glr = glr.adapted_to(spec);
    let cpp_sweep = threshold_sweep(spec, &cpp, &cpp.default_thresholds(), n_trials)?;
    let glr_sweep = threshold_sweep(spec, &glr, &glr.default_thresholds(), n_trials)?;
    let row = ComparisonRow {
        sigma: spec.sigma,
        alpha,
        cpp_delay: interpolate_at_alpha(&cpp_sweep, alpha).ok(),
        glr_delay: interpolate_at_alpha(&glr_sweep, alpha).ok(),
    };
    Ok((cpp_sweep, glr_sweep, row))
}

/// Delay at `alpha` for both detectors across noise levels.
pub fn sigma_sweep(
    base: &ScenarioSpec,
    sigmas: &[f64],
    cpp: &DetectorKind,
    glr: &DetectorKind,
    n_trials: usize,
    alpha: f64,
) -> Result<Vec<ComparisonRow>> {
    sigmas
        .iter()
        .map(|&sigma| compare_at_alpha(&base.with_sigma(sigma), cpp, glr, n_trials, alpha).map(|(_, _, row)| row))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn record(t0: usize, t_a: Option<usize>) -> TrialRecord {
        TrialRecord::from_alarm(0, t0, t_a)
    }

    /// Records with the given delays (`None` = out of bounds).
    fn with_delays(delays: &[Option<usize>]) -> Vec<TrialRecord> {
        delays.iter().map(|d| record(10, d.map(|d| d + 9))).collect()
    }

    #[test]
    fn t0_is_geometric_on_positive_integers() {
        let mut r = rng::stream(1);
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_t0(0.02, &mut r).unwrap() as f64).sum::<f64>() / n as f64;
        assert!((mean - 50.0).abs() <= 0.5, "{mean}");
        let ones = (0..100_000).filter(|_| sample_t0(0.5, &mut r).unwrap() == 1).count() as f64 / 1e5;
        assert!((ones - 0.5).abs() <= 0.01, "{ones}");
        assert!((0..1000).all(|_| sample_t0(0.9, &mut r).unwrap() >= 1));
        let a: Vec<usize> = (0..10).map(|_| sample_t0(0.1, &mut rng::stream(4)).unwrap()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        for bad in [0.0, 1.0, 1.5, f64::NAN] {
            assert!(sample_t0(bad, &mut r).is_err());
        }
    }

    #[test]
    fn false_alarm_and_delay_conventions() {
        let early = record(10, Some(9));
        assert!(early.false_alarm && early.delay().is_none());
        let onset = record(10, Some(10));
        assert!(!onset.false_alarm);
        assert_eq!(onset.delay(), Some(1.0));
        let oob = record(10, None);
        assert!(oob.out_of_bounds && !oob.false_alarm);
        assert_eq!(oob.delay(), Some(f64::INFINITY));
    }

    #[test]
    fn run_trial_extremes() {
        let spec = ScenarioSpec::default();
        for seed in 0..20 {
            let mut glr = GlrDetector::new(GlrConfig::new(0.0, 1.0)).unwrap();
            let rec = run_trial(&spec, &mut glr, 0.0, &mut rng::stream(seed)).unwrap();
            assert_eq!(rec.t_a, Some(1));
            assert_eq!(rec.false_alarm, rec.t0 > 1);
            let mut glr = GlrDetector::new(GlrConfig::new(0.0, 1.0)).unwrap();
            let rec = run_trial(&spec, &mut glr, 1e12, &mut rng::stream(seed)).unwrap();
            assert!(rec.out_of_bounds && rec.t_a.is_none());
        }
        let mut used = GlrDetector::new(GlrConfig::new(0.0, 1.0)).unwrap();
        used.observe(0.0).unwrap();
        assert!(run_trial(&spec, &mut used, 1.0, &mut rng::stream(0)).is_err());
    }

    #[test]
    fn trimmed_mean_arithmetic() {
        let delays: Vec<Option<usize>> = (1..=100).map(Some).collect();
        assert_eq!(trimmed_mean_delay(&with_delays(&delays), 0.05).unwrap(), 50.5);
        let same = with_delays(&[Some(7); 40]);
        assert_eq!(trimmed_mean_delay(&same, 0.05).unwrap(), 7.0);
        // false alarms are excluded before trimming
        let mut mixed = with_delays(&delays);
        mixed.push(record(50, Some(3)));
        assert_eq!(trimmed_mean_delay(&mixed, 0.05).unwrap(), 50.5);
    }

    #[test]
    fn trimmed_mean_with_some_infinities() {
        // 97 finite delays 1..=97 and 3 out of bounds; trim 5 from each end
        let mut delays: Vec<Option<usize>> = (1..=97).map(Some).collect();
        delays.extend([None; 3]);
        let expected = (6..=95).sum::<usize>() as f64 / 90.0;
        assert_eq!(trimmed_mean_delay(&with_delays(&delays), 0.05).unwrap(), expected);
    }

    #[test]
    fn trimmed_mean_ignores_infinities_inside_the_trim() {
        let mut r = rng::stream(2);
        let mut delays: Vec<usize> = (0..200).map(|_| 1 + sample_t0(0.1, &mut r).unwrap()).collect();
        delays.sort_unstable();
        let base: Vec<Option<usize>> = delays.iter().copied().map(Some).collect();
        let mut perturbed = base.clone();
        for d in perturbed.iter_mut().rev().take(8) {
            *d = None;
        }
        let a = trimmed_mean_delay(&with_delays(&base), 0.05).unwrap();
        let b = trimmed_mean_delay(&with_delays(&perturbed), 0.05).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trimmed_mean_errors() {
        let few = with_delays(&[Some(3); 19]);
        assert!(matches!(trimmed_mean_delay(&few, 0.05), Err(CppError::InvalidAggregate(_))));
        let mut delays: Vec<Option<usize>> = (1..=95).map(Some).collect();
        delays.extend([None; 5]);
        match trimmed_mean_delay(&with_delays(&delays), 0.05) {
            Err(CppError::TooManyOutOfBounds { out_of_bounds, count, .. }) => {
                assert_eq!((out_of_bounds, count), (5, 100));
            }
            other => panic!("{other:?}"),
        }
    }

    fn sweep(points: &[(f64, Option<f64>)]) -> SweepResult {
        SweepResult {
            detector: "test".into(),
            scenario: ScenarioSpec::default(),
            rows: points
                .iter()
                .enumerate()
                .map(|(k, &(alpha, mean_delay))| SweepRow {
                    detector: "test".into(),
                    h: k as f64,
                    alpha,
                    mean_delay,
                    n_trials: 100,
                    n_false_alarms: (alpha * 100.0) as usize,
                    n_oob: 0,
                    note: None,
                })
                .collect(),
        }
    }

    #[test]
    fn interpolation() {
        let s = sweep(&[(0.2, Some(4.0)), (0.1, Some(8.0)), (0.0, Some(12.0))]);
        assert_eq!(interpolate_at_alpha(&s, 0.1).unwrap(), 8.0);
        assert!((interpolate_at_alpha(&s, 0.15).unwrap() - 6.0).abs() < 1e-12);
        assert!((interpolate_at_alpha(&s, 0.025).unwrap() - 11.0).abs() < 1e-12);
        assert!(interpolate_at_alpha(&s, 0.3).is_err());
        let gap = sweep(&[(0.2, Some(4.0)), (0.1, None), (0.0, Some(12.0))]);
        assert!((interpolate_at_alpha(&gap, 0.1).unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_is_monotone_reproducible_and_data_matched() {
        let spec = ScenarioSpec {
            seed: 11,
            ..ScenarioSpec::default()
        };
        let glr = DetectorKind::glr_for(&spec);
        let thresholds = [0.0, 2.0, 5.0, 8.0, f64::INFINITY];
        let a = threshold_sweep(&spec, &glr, &thresholds, 60).unwrap();
        let b = threshold_sweep(&spec, &glr, &thresholds, 60).unwrap();
        assert_eq!(a, b);
        for w in a.rows.windows(2) {
            assert!(w[1].alpha <= w[0].alpha);
        }
        let last = a.rows.last().unwrap();
        assert_eq!(last.alpha, 0.0);
        assert_eq!(last.n_oob, 60);
        assert!(last.mean_delay.is_none() && last.note.is_some());
        // h = 0 alarms at step 1, so alpha is the share of trials with t0 > 1
        let traces = run_traces(&spec, &glr, &thresholds, 60).unwrap();
        let late = traces.iter().filter(|t| t.t0 > 1).count() as f64 / 60.0;
        assert_eq!(a.rows[0].alpha, late);

        let cpp = DetectorKind::cpp_for(&spec);
        for i in [0, 7, 33] {
            let from_glr = trace_trial(&spec, &glr, i, f64::INFINITY).unwrap();
            let from_cpp = trace_trial(&spec, &cpp, i, f64::INFINITY).unwrap();
            assert_eq!(from_glr.t0, from_cpp.t0);
            let (t0, data) = trial_data(&spec, i, from_glr.statistics.len()).unwrap();
            assert_eq!(t0, from_glr.t0);
            let mut replay = GlrDetector::new(GlrConfig::new(0.0, 1.0)).unwrap();
            let replayed: Vec<f64> = data.iter().map(|&x| replay.observe(x).unwrap()).collect();
            assert_eq!(replayed, from_glr.statistics);
        }
    }

    #[test]
    fn single_trial_sweep_flags_degenerate_rows() {
        let spec = ScenarioSpec::default();
        let s = threshold_sweep(&spec, &DetectorKind::glr_for(&spec), &[5.0], 1).unwrap();
        assert_eq!(s.rows.len(), 1);
        assert!(s.rows[0].mean_delay.is_none());
        assert!(s.rows[0].note.as_deref().unwrap().contains("need at least"));
    }

    #[test]
    fn detector_errors_carry_the_trial_index() {
        let spec = ScenarioSpec::default();
        let broken = DetectorKind::Glr(GlrConfig {
            sigma: -1.0,
            ..GlrConfig::new(0.0, 1.0)
        });
        match trace_trial(&spec, &broken, 4, 1.0) {
            Err(CppError::Trial { trial, .. }) => assert_eq!(trial, 4),
            other => panic!("{other:?}"),
        }
        assert!(threshold_sweep(&spec, &broken, &[1.0], 3).is_err());
        assert!(threshold_sweep(&spec, &DetectorKind::glr_for(&spec), &[], 3).is_err());
        let bad = ScenarioSpec {
            rho: 1.0,
            ..spec
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn adapted_detectors_use_the_scenario_parameters() {
        let spec = ScenarioSpec::default().with_sigma(0.6);
        match DetectorKind::Glr(GlrConfig::new(3.0, 9.0)).adapted_to(&spec) {
            DetectorKind::Glr(c) => assert_eq!((c.mu0, c.sigma), (0.0, 0.6)),
            other => panic!("{other:?}"),
        }
        match DetectorKind::Cpp(CppConfig::default()).adapted_to(&spec) {
            DetectorKind::Cpp(c) => assert_eq!(c.model, SingleCpModel::known(0.0, 0.6)),
            other => panic!("{other:?}"),
        }
    }
}
