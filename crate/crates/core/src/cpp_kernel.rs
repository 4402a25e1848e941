// SPDX-License-Identifier: MIT OR Apache-2.0

//! Incremental last-changepoint probabilities.
//!
//! After `n` observations the detector holds, for every position `i`,
//!
//! * `P(i+)`  - probability that `i` is the most recent changepoint,
//! * `P(i++)` - probability that `i` is the second most recent,
//! * `P(H0)`  - probability of fewer than two changepoints so far,
//!
//! tied together by the coupled system
//!
//! ```text
//! P(i+)  = P(i+ | H0) P(H0) + sum_{j<i} P(i+ | j++) P(j++)
//! P(i++) = sum_{k>i} P_k(i+) P(k+)
//! P(H0)  = 1 - sum_j P(j++)
//! ```
//!
//! `P(i+ | H0)` is the zero-or-one-changepoint posterior on the whole
//! series, `P(i+ | j++)` the exactly-one posterior on `x_{j+1}..x_n`, and
//! `P_k(i+)` the row of `P(i+)` stored when `k` observations had been seen
//! (given a changepoint at `k`, later data carries no information about
//! earlier ones). Each step recomputes the two conditional tables and
//! relaxes the system with a fixed number of Jacobi sweeps, warm-started
//! from the previous step's solution.
//!
//! `P(i+)` is reported sub-normalized: the missing mass is the probability
//! that no changepoint has happened yet.

use serde::{Deserialize, Serialize};

use crate::detector::OnlineDetector;
use crate::error::{ensure_finite, CppError, Result};
use crate::gaussian_stats::PrefixStats;
use crate::rng::{self, RngStream};
use crate::single_change::{normalize_log_weights, ProbabilityVector, SingleCpModel, SplitScorer};

/// Pseudo-observations of the series variance added to every segment
/// variance estimate in variance-change mode.
pub const DEFAULT_VARIANCE_PSEUDO_OBS: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CppConfig {
    /// Inner single-changepoint model; its `estimation` field selects plug-in
    /// or posterior-draw estimation for every conditional.
    pub model: SingleCpModel,
    pub jacobi_iterations: usize,
    /// Estimate the variance separately on each side of a split.
    pub variance_change: bool,
    #[serde(default = "default_pseudo_obs")]
    pub variance_pseudo_obs: f64,
    /// Only the most recent `window_cap` positions carry individual
    /// hypotheses; older mass is pooled.
    #[serde(default)]
    pub window_cap: Option<usize>,
}

fn default_pseudo_obs() -> f64 {
    DEFAULT_VARIANCE_PSEUDO_OBS
}

impl Default for CppConfig {
    fn default() -> Self {
        Self {
            model: SingleCpModel::default(),
            jacobi_iterations: 1,
            variance_change: false,
            variance_pseudo_obs: DEFAULT_VARIANCE_PSEUDO_OBS,
            window_cap: None,
        }
    }
}

impl CppConfig {
    pub fn new(model: SingleCpModel) -> Self {
        Self {
            model,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.jacobi_iterations == 0 {
            return Err(CppError::InvalidConfig("jacobi_iterations must be at least 1".into()));
        }
        if !(self.variance_pseudo_obs >= 0.0 && self.variance_pseudo_obs.is_finite()) {
            return Err(CppError::InvalidConfig("variance_pseudo_obs must be non-negative".into()));
        }
        if let Some(cap) = self.window_cap {
            if cap < 4 {
                return Err(CppError::InvalidConfig(format!("window_cap must be at least 4, got {cap}")));
            }
        }
        Ok(())
    }

    fn min_segment(&self) -> usize {
        if self.variance_change {
            2
        } else {
            1
        }
    }
}

/// Probabilities over the active positions `offset+1 ..= offset+len`, plus
/// the pooled mass of every position at or before `offset`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActiveVector {
    pub offset: usize,
    pub older: f64,
    pub values: Vec<f64>,
}

impl ActiveVector {
    /// Probability at absolute position `i`; pooled positions read as zero.
    #[inline]
    pub fn at(&self, i: usize) -> f64 {
        if i <= self.offset {
            return 0.0;
        }
        self.values.get(i - self.offset - 1).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.older + self.values.iter().sum::<f64>()
    }

    /// Mass on positions `<= pos`, pooled mass included.
    fn mass_through(&self, pos: usize) -> f64 {
        let upto = pos.saturating_sub(self.offset).min(self.values.len());
        self.older + self.values[..upto].iter().sum::<f64>()
    }

    fn to_probability_vector(&self) -> ProbabilityVector {
        ProbabilityVector::new(self.offset + 1, self.values.clone())
    }

    /// Slide the pooled boundary to `offset` and extend with zeros through
    /// position `end`.
    fn advance(&mut self, offset: usize, end: usize) {
        if offset > self.offset {
            let drop = (offset - self.offset).min(self.values.len());
            self.older += self.values.drain(..drop).sum::<f64>();
            self.offset = offset;
        }
        let len = end - self.offset;
        self.values.resize(len, 0.0);
    }
}

/// Rows `P_k(i+)` for every processed step `k`; row `k` covers positions up
/// to `k` (the last entry is structurally zero).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PosteriorMatrix {
    rows: Vec<ActiveVector>,
}

impl PosteriorMatrix {
    /// Row for step `k` (1-based).
    pub fn row(&self, k: usize) -> Option<&ActiveVector> {
        k.checked_sub(1).and_then(|idx| self.rows.get(idx))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = &ActiveVector> {
        self.rows.iter()
    }

    fn push(&mut self, row: ActiveVector) {
        self.rows.push(row);
    }
}

/// Conditional probabilities needed by one Jacobi sweep at step `n`.
#[derive(Debug, Clone)]
pub struct ConditionalTables<'h> {
    n: usize,
    offset: usize,
    /// `P(i+ | H0)` over the active positions, pooled mass in `older`.
    given_hzero: ActiveVector,
    /// Probability of no changepoint at all under `H0`.
    p_none: f64,
    /// First `j` with a stored `P(. | j++)` row; equals `offset` when older
    /// second-to-last mass is pooled into row `offset`.
    first_second: usize,
    given_second: Vec<f64>,
    second_offsets: Vec<usize>,
    history: &'h PosteriorMatrix,
}

impl<'h> ConditionalTables<'h> {
    /// Assemble tables from explicit parts. `given_second[j - first_second]`
    /// holds `P(i+ | j++)` for `i = j+1 ..= n-1`.
    pub fn from_parts(
        n: usize,
        given_hzero: ActiveVector,
        p_none: f64,
        first_second: usize,
        given_second: Vec<Vec<f64>>,
        history: &'h PosteriorMatrix,
    ) -> Result<Self> {
        let offset = given_hzero.offset;
        if given_hzero.values.len() != n - offset {
            return Err(CppError::Dimension(format!(
                "P(i+|H0) has {} active entries, expected {}",
                given_hzero.values.len(),
                n - offset
            )));
        }
        let mut tables = Self {
            n,
            offset,
            given_hzero,
            p_none,
            first_second,
            given_second: Vec::new(),
            second_offsets: Vec::new(),
            history,
        };
        for (k, row) in given_second.into_iter().enumerate() {
            let j = first_second + k;
            if row.len() != n - 1 - j {
                return Err(CppError::Dimension(format!(
                    "P(i+|{j}++) has {} entries, expected {}",
                    row.len(),
                    n - 1 - j
                )));
            }
            tables.second_offsets.push(tables.given_second.len());
            tables.given_second.extend(row);
        }
        if history.len() + 1 < n {
            return Err(CppError::Dimension(format!(
                "history has {} rows, step {n} needs {}",
                history.len(),
                n - 1
            )));
        }
        Ok(tables)
    }

    pub fn step(&self) -> usize {
        self.n
    }

    pub fn p_none(&self) -> f64 {
        self.p_none
    }

    pub fn given_hzero(&self) -> &ActiveVector {
        &self.given_hzero
    }

    /// `P(i+ | j++)` over `i = j+1 ..= n-1`, if `j` has a row.
    pub fn given_second(&self, j: usize) -> Option<&[f64]> {
        if j < self.first_second || j + 2 > self.n {
            return None;
        }
        let k = j - self.first_second;
        let start = *self.second_offsets.get(k)?;
        Some(&self.given_second[start..start + (self.n - 1 - j)])
    }

    /// `P(i++ | k+)`, read straight from the stored row `P_k(i+)`.
    pub fn second_given_last(&self, k: usize, i: usize) -> f64 {
        self.history.row(k).map_or(0.0, |row| row.at(i))
    }
}

/// Output of one Jacobi sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiUpdate {
    pub p_last: ActiveVector,
    pub p_second: ActiveVector,
    pub p_hzero: f64,
    /// L1 distance between the input and output vectors.
    pub residual: f64,
}

/// One simultaneous substitution into the coupled system, using only the
/// input vectors on the right-hand side.
pub fn jacobi_step(
    p_last: &ActiveVector,
    p_second: &ActiveVector,
    tables: &ConditionalTables<'_>,
) -> Result<JacobiUpdate> {
    let n = tables.n;
    let offset = tables.offset;
    let active = n - offset;
    for (name, v) in [("P(i+)", p_last), ("P(i++)", p_second)] {
        if v.offset != offset || v.values.len() != active {
            return Err(CppError::Dimension(format!(
                "{name} covers ({}, {}], tables cover ({offset}, {n}]",
                v.offset,
                v.offset + v.values.len()
            )));
        }
    }

    let p_hzero = (1.0 - p_second.total()).clamp(0.0, 1.0);

    // P(i+) = P(i+|H0) P(H0) + sum_{j<i} P(i+|j++) P(j++)
    let mut last = ActiveVector {
        offset,
        older: tables.given_hzero.older * p_hzero,
        values: tables.given_hzero.values.iter().map(|p| p * p_hzero).collect(),
    };
    for j in tables.first_second..n.saturating_sub(1) {
        let weight = if j == offset { p_second.older } else { p_second.at(j) };
        if weight == 0.0 {
            continue;
        }
        let Some(row) = tables.given_second(j) else { continue };
        // row covers i = j+1 ..= n-1, i.e. active index i - offset - 1
        let dst = &mut last.values[j - offset..j - offset + row.len()];
        for (d, &p) in dst.iter_mut().zip(row) {
            *d += p * weight;
        }
    }

    // P(i++) = sum_{k>i} P_k(i+) P(k+)
    let mut second = ActiveVector {
        offset,
        older: 0.0,
        values: vec![0.0; active],
    };
    for k in (offset + 1)..n {
        let weight = p_last.at(k);
        if weight == 0.0 {
            continue;
        }
        let row = tables
            .history
            .row(k)
            .ok_or_else(|| CppError::Dimension(format!("missing history row {k}")))?;
        if offset > 0 {
            second.older += row.mass_through(offset) * weight;
        }
        for i in (offset + 1)..k {
            second.values[i - offset - 1] += row.at(i) * weight;
        }
    }

    clamp_unit_mass(&mut last);
    clamp_unit_mass(&mut second);
    let p_hzero_new = (1.0 - second.total()).max(0.0);

    let residual = l1(p_last, &last) + l1(p_second, &second);
    Ok(JacobiUpdate {
        p_last: last,
        p_second: second,
        p_hzero: p_hzero_new,
        residual,
    })
}

fn clamp_unit_mass(v: &mut ActiveVector) {
    v.older = v.older.clamp(0.0, 1.0);
    for p in &mut v.values {
        *p = p.clamp(0.0, 1.0);
    }
    let total = v.total();
    if total > 1.0 {
        v.older /= total;
        for p in &mut v.values {
            *p /= total;
        }
    }
}

fn l1(a: &ActiveVector, b: &ActiveVector) -> f64 {
    (a.older - b.older).abs() + a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Full detector state. Single owner; `observe` mutates it in place.
#[derive(Debug, Clone)]
pub struct CppDetector {
    config: CppConfig,
    series: Vec<f64>,
    prefix: PrefixStats,
    history: PosteriorMatrix,
    p_last: ActiveVector,
    p_second: ActiveVector,
    p_hzero: f64,
    p_none: f64,
    /// Residual of every Jacobi sweep in the latest step.
    residuals: Vec<f64>,
    rng: RngStream,
}

impl CppDetector {
    pub fn new(config: CppConfig, rng: RngStream) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            series: Vec::new(),
            prefix: PrefixStats::new(),
            history: PosteriorMatrix::default(),
            p_last: ActiveVector::default(),
            p_second: ActiveVector::default(),
            p_hzero: 1.0,
            p_none: 1.0,
            residuals: Vec::new(),
            rng,
        })
    }

    pub fn with_seed(config: CppConfig, seed: u64) -> Result<Self> {
        Self::new(config, rng::stream(seed))
    }

    /// Feed every value of `xs` in order.
    pub fn run(config: CppConfig, seed: u64, xs: &[f64]) -> Result<Self> {
        let mut detector = Self::with_seed(config, seed)?;
        for &x in xs {
            detector.observe(x)?;
        }
        Ok(detector)
    }

    pub fn config(&self) -> &CppConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn series(&self) -> &[f64] {
        &self.series
    }

    pub fn history(&self) -> &PosteriorMatrix {
        &self.history
    }

    /// L1 change made by the last Jacobi sweep of the most recent step.
    pub fn last_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }

    /// Residuals of each Jacobi sweep of the most recent step, in order.
    pub fn sweep_residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// No-change probability of the zero-or-one subproblem at this step.
    pub fn p_none_given_hzero(&self) -> f64 {
        self.p_none
    }

    fn active_offset(&self, n: usize) -> usize {
        self.config.window_cap.map_or(0, |cap| n.saturating_sub(cap))
    }

    /// Process one observation. A non-finite value is rejected and leaves
    /// the state untouched.
    pub fn observe(&mut self, x: f64) -> Result<()> {
        ensure_finite(x)?;
        self.series.push(x);
        self.prefix.push(x);
        let n = self.series.len();
        let offset = self.active_offset(n);

        self.p_last.advance(offset, n);
        self.p_second.advance(offset, n);

        let (given_hzero, p_none, first_second, given_second) = self.conditionals(n, offset);
        let tables = ConditionalTables::from_parts(n, given_hzero, p_none, first_second, given_second, &self.history)?;

        let mut last = std::mem::take(&mut self.p_last);
        let mut second = std::mem::take(&mut self.p_second);
        let mut p_hzero = (1.0 - second.total()).max(0.0);
        let mut residuals = Vec::with_capacity(self.config.jacobi_iterations);
        for _ in 0..self.config.jacobi_iterations {
            let update = jacobi_step(&last, &second, &tables)?;
            last = update.p_last;
            second = update.p_second;
            p_hzero = update.p_hzero;
            residuals.push(update.residual);
        }
        drop(tables);

        self.history.push(last.clone());
        self.p_last = last;
        self.p_second = second;
        self.p_hzero = p_hzero;
        self.p_none = p_none;
        self.residuals = residuals;
        Ok(())
    }

    /// Recompute `P(i+ | H0)` and every `P(i+ | j++)` for step `n`.
    fn conditionals(&mut self, n: usize, offset: usize) -> (ActiveVector, f64, usize, Vec<Vec<f64>>) {
        let config = &self.config;
        let min_seg = config.min_segment();
        let scorer = SplitScorer::new(&self.prefix, &config.model, config.variance_change, config.variance_pseudo_obs);
        // windows too short for per-segment variances fall back to the
        // common-variance likelihood
        let fallback = SplitScorer::new(&self.prefix, &config.model, false, 0.0);
        let rng = &mut self.rng;
        let mut weights = Vec::with_capacity(n);

        let (scorer_h, min_h) = if n >= 2 * min_seg { (&scorer, min_seg) } else { (&fallback, 1) };
        let pre_mean = scorer_h.shift(config.model.mu0);
        let log_none = scorer_h.zero_or_one_log_weights(n, pre_mean, config.model.change_prior, min_h, rng, &mut weights);
        let mut none = [log_none];
        normalize_log_weights(&mut weights, &mut none);
        let mut given_hzero = ActiveVector {
            offset,
            older: 0.0,
            values: vec![0.0; n - offset],
        };
        for (k, &p) in weights.iter().enumerate() {
            let i = min_h + k;
            if i <= offset {
                given_hzero.older += p;
            } else {
                given_hzero.values[i - offset - 1] = p;
            }
        }

        let first_second = if offset == 0 { 1 } else { offset };
        let mut given_second = Vec::with_capacity(n.saturating_sub(first_second + 1));
        for j in first_second..n.saturating_sub(1) {
            let (s, m) = if n - j >= 2 * min_seg { (&scorer, min_seg) } else { (&fallback, 1) };
            s.exactly_one_log_weights(j, n, None, m, rng, &mut weights);
            normalize_log_weights(&mut weights, &mut []);
            let mut row = vec![0.0; n - 1 - j];
            row[m - 1..m - 1 + weights.len()].copy_from_slice(&weights);
            given_second.push(row);
        }
        (given_hzero, none[0], first_second, given_second)
    }

    fn require_data(&self) -> Result<()> {
        if self.series.is_empty() {
            Err(CppError::Empty)
        } else {
            Ok(())
        }
    }

    /// Current `P(i+)` over the active positions (sub-normalized).
    pub fn p_last(&self) -> Result<ProbabilityVector> {
        self.require_data()?;
        Ok(self.p_last.to_probability_vector())
    }

    /// Current `P(i++)` and `P(H0)`.
    pub fn p_second(&self) -> Result<(ProbabilityVector, f64)> {
        self.require_data()?;
        Ok((self.p_second.to_probability_vector(), self.p_hzero))
    }

    pub fn p_hzero(&self) -> f64 {
        self.p_hzero
    }

    /// `P(i+)` mass pooled beyond the window cap.
    pub fn older_last_mass(&self) -> f64 {
        self.p_last.older
    }

    pub fn older_second_mass(&self) -> f64 {
        self.p_second.older
    }

    pub fn raw_p_last(&self) -> &ActiveVector {
        &self.p_last
    }

    pub fn raw_p_second(&self) -> &ActiveVector {
        &self.p_second
    }

    /// Total probability that some changepoint has occurred: `sum_i P(i+)`.
    pub fn decision(&self) -> f64 {
        self.p_last.total()
    }

    /// Build the tables for the current step from the current state (used by
    /// diagnostics and tests; consumes randomness like `observe` would).
    pub fn current_tables(&mut self) -> Result<ConditionalTables<'_>> {
        self.require_data()?;
        let n = self.series.len();
        let offset = self.active_offset(n);
        let (h, p_none, first, second) = self.conditionals(n, offset);
        ConditionalTables::from_parts(n, h, p_none, first, second, &self.history)
    }

    pub fn snapshot(&self) -> CppSnapshot {
        CppSnapshot {
            format: SNAPSHOT_FORMAT.to_string(),
            config: self.config.clone(),
            series: self.series.clone(),
            history: self.history.clone(),
            p_last: self.p_last.clone(),
            p_second: self.p_second.clone(),
            p_hzero: self.p_hzero,
            p_none: self.p_none,
            residual: self.last_residual(),
            rng: self.rng.clone(),
        }
    }

    pub fn from_snapshot(snapshot: CppSnapshot) -> Result<Self> {
        if snapshot.format != SNAPSHOT_FORMAT {
            return Err(CppError::Snapshot(format!("unsupported format {:?}", snapshot.format)));
        }
        snapshot.config.validate()?;
        if snapshot.history.len() != snapshot.series.len() {
            return Err(CppError::Snapshot(format!(
                "{} posterior rows for {} observations",
                snapshot.history.len(),
                snapshot.series.len()
            )));
        }
        let series = snapshot.series;
        for &x in &series {
            ensure_finite(x)?;
        }
        Ok(Self {
            prefix: PrefixStats::from_slice(&series),
            config: snapshot.config,
            series,
            history: snapshot.history,
            p_last: snapshot.p_last,
            p_second: snapshot.p_second,
            p_hzero: snapshot.p_hzero,
            p_none: snapshot.p_none,
            residuals: vec![snapshot.residual],
            rng: snapshot.rng,
        })
    }
}

impl OnlineDetector for CppDetector {
    fn observe(&mut self, x: f64) -> Result<f64> {
        CppDetector::observe(self, x)?;
        Ok(self.decision())
    }

    fn statistic(&self) -> f64 {
        self.decision()
    }

    fn steps(&self) -> usize {
        self.len()
    }
}

pub const SNAPSHOT_FORMAT: &str = "cpp-detector/1";

/// JSON-serializable detector state.
///
/// Fields: `format` (always `"cpp-detector/1"`), `config`, `series` (raw
/// observations), `history` (`rows[k-1]` is `P_k(i+)` as an
/// [`ActiveVector`]), the current `p_last`/`p_second` vectors, `p_hzero`,
/// `p_none`, the last Jacobi `residual`, and the ChaCha `rng` state (seed,
/// stream, word position). Restoring a snapshot and continuing yields the
/// same results as never having stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CppSnapshot {
    pub format: String,
    pub config: CppConfig,
    pub series: Vec<f64>,
    pub history: PosteriorMatrix,
    pub p_last: ActiveVector,
    pub p_second: ActiveVector,
    pub p_hzero: f64,
    pub p_none: f64,
    pub residual: f64,
    pub rng: RngStream,
}

impl CppSnapshot {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| CppError::Snapshot(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CppError::Snapshot(e.to_string()))
    }
}
