// SPDX-License-Identifier: MIT OR Apache-2.0

//! Running a detector over a series, saved state, and the detect report.

use std::io::Write;

use anyhow::{bail, Context, Result};
use cpp_core::{CppDetector, CppSnapshot, GlrDetector, OnlineDetector, ProbabilityVector};
use serde::{Deserialize, Serialize};

use crate::series_io::Series;
use crate::Format;

pub const STATE_FORMAT: &str = "cpp-cli-state/1";

pub enum Engine {
    Cpp(CppDetector),
    Glr { detector: GlrDetector, trace: Vec<f64> },
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Cpp(_) => "cpp",
            Engine::Glr { .. } => "glr",
        }
    }

    pub fn observe(&mut self, x: f64) -> Result<()> {
        match self {
            Engine::Cpp(d) => {
                d.observe(x)?;
            }
            Engine::Glr { detector, trace } => trace.push(detector.observe(x)?),
        }
        Ok(())
    }

    /// Decision statistic after each step.
    pub fn trace(&self) -> Vec<f64> {
        match self {
            Engine::Cpp(d) => d.history().rows().map(|r| r.total()).collect(),
            Engine::Glr { trace, .. } => trace.clone(),
        }
    }

    pub fn values(&self, saved: &[f64]) -> Vec<f64> {
        match self {
            Engine::Cpp(d) => d.series().to_vec(),
            Engine::Glr { .. } => saved.to_vec(),
        }
    }
}

/// On-disk state: the detector plus what the report needs.
#[derive(Debug, Serialize, Deserialize)]
pub struct SavedState {
    pub format: String,
    pub threshold: f64,
    pub labels: Vec<String>,
    pub detector: SavedDetector,
}

#[derive(Debug, Serialize, Deserialize)]
/// Externally tagged: the rng state holds a `u128`, which internally tagged
/// enums cannot buffer.
#[serde(rename_all = "snake_case")]
pub enum SavedDetector {
    Cpp { state: CppSnapshot },
    Glr { values: Vec<f64>, trace: Vec<f64>, state: GlrDetector },
}

/// A detector together with the series it has consumed.
pub struct Session {
    pub engine: Engine,
    pub threshold: f64,
    pub series: Series,
}

impl Session {
    pub fn new(engine: Engine, threshold: f64) -> Self {
        Self {
            engine,
            threshold,
            series: Series {
                labels: Vec::new(),
                values: Vec::new(),
            },
        }
    }

    pub fn feed(&mut self, series: &Series) -> Result<()> {
        for (i, (label, &x)) in series.labels.iter().zip(&series.values).enumerate() {
            self.engine
                .observe(x)
                .with_context(|| format!("observation {} (label {label})", i + 1))?;
            self.series.labels.push(label.clone());
            self.series.values.push(x);
        }
        Ok(())
    }

    pub fn save(&self) -> Result<String> {
        let detector = match &self.engine {
            Engine::Cpp(d) => SavedDetector::Cpp { state: d.snapshot() },
            Engine::Glr { detector, trace } => SavedDetector::Glr {
                values: self.series.values.clone(),
                trace: trace.clone(),
                state: detector.clone(),
            },
        };
        let state = SavedState {
            format: STATE_FORMAT.into(),
            threshold: self.threshold,
            labels: self.series.labels.clone(),
            detector,
        };
        Ok(serde_json::to_string_pretty(&state)? + "\n")
    }

    pub fn load(text: &str) -> Result<Self> {
        let state: SavedState = serde_json::from_str(text).context("malformed state file")?;
        if state.format != STATE_FORMAT {
            bail!("unsupported state format {:?}, expected {STATE_FORMAT:?}", state.format);
        }
        let (engine, values) = match state.detector {
            SavedDetector::Cpp { state } => {
                let d = CppDetector::from_snapshot(state)?;
                let values = d.series().to_vec();
                (Engine::Cpp(d), values)
            }
            SavedDetector::Glr { values, trace, state } => {
                if trace.len() != values.len() || state.steps() != values.len() {
                    bail!("glr state is inconsistent: {} values, {} trace entries", values.len(), trace.len());
                }
                (Engine::Glr { detector: state, trace }, values)
            }
        };
        if state.labels.len() != values.len() {
            bail!("state has {} labels for {} values", state.labels.len(), values.len());
        }
        Ok(Self {
            engine,
            threshold: state.threshold,
            series: Series {
                labels: state.labels,
                values,
            },
        })
    }

    pub fn report(&self) -> Result<Report> {
        let trace = self.engine.trace();
        let values = self.engine.values(&self.series.values);
        let labels = &self.series.labels;
        let point = |index: usize| Point {
            index,
            label: labels[index - 1].clone(),
        };
        let (p_last, p_second) = match &self.engine {
            Engine::Cpp(d) if !d.is_empty() => {
                let (second, _) = d.p_second()?;
                (Some(d.p_last()?), Some(second))
            }
            _ => (None, None),
        };
        let lookup = |v: &Option<ProbabilityVector>, i: usize| {
            v.as_ref().filter(|v| i >= v.start && i < v.start + v.len()).map(|v| v.get(i))
        };
        let rows = (1..=values.len())
            .map(|i| Row {
                index: i,
                label: labels[i - 1].clone(),
                value: values[i - 1],
                p_last: lookup(&p_last, i),
                p_second: lookup(&p_second, i),
                statistic: trace[i - 1],
            })
            .collect();
        let statistic = trace.last().copied().unwrap_or(0.0);
        let first_alarm = trace.iter().position(|&g| g >= self.threshold).map(|k| point(k + 1));
        let cpp = match &self.engine {
            Engine::Cpp(d) => {
                let p_last = p_last.as_ref().expect("cpp report has data");
                let p_second = p_second.as_ref().expect("cpp report has data");
                Some(CppSummary {
                    sum_p_last: p_last.sum() + d.older_last_mass(),
                    sum_p_second: p_second.sum() + d.older_second_mass(),
                    p_hzero: d.p_hzero(),
                    older_last_mass: d.older_last_mass(),
                    older_second_mass: d.older_second_mass(),
                    argmax_last: p_last.argmax().map(point),
                    argmax_second: p_second.argmax().map(point),
                    jacobi_residual: d.last_residual(),
                })
            }
            Engine::Glr { .. } => None,
        };
        Ok(Report {
            detector: self.engine.name(),
            n: values.len(),
            threshold: self.threshold,
            statistic,
            change_detected: statistic >= self.threshold,
            first_alarm,
            cpp,
            rows,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point {
    pub index: usize,
    pub label: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CppSummary {
    pub sum_p_last: f64,
    pub sum_p_second: f64,
    pub p_hzero: f64,
    pub older_last_mass: f64,
    pub older_second_mass: f64,
    pub argmax_last: Option<Point>,
    pub argmax_second: Option<Point>,
    pub jacobi_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub index: usize,
    pub label: String,
    pub value: f64,
    pub p_last: Option<f64>,
    pub p_second: Option<f64>,
    pub statistic: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub detector: &'static str,
    pub n: usize,
    pub threshold: f64,
    /// Final decision statistic.
    pub statistic: f64,
    pub change_detected: bool,
    pub first_alarm: Option<Point>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cpp: Option<CppSummary>,
    pub rows: Vec<Row>,
}

/// `x` with six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-5..6).contains(&exp) {
        format!("{:.*}", (5 - exp) as usize, x)
    } else {
        sci
    }
}

fn point_text(p: &Option<Point>) -> String {
    p.as_ref().map_or_else(|| "none".into(), |p| format!("{} ({})", p.index, p.label))
}

impl Report {
    /// CSV table on `out`; summary lines on `summary`. JSON goes entirely to
    /// `out`.
    pub fn write(&self, format: Format, out: &mut dyn Write, summary: &mut dyn Write) -> Result<()> {
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, self)?;
                writeln!(out)?;
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(&mut *out);
                w.write_record(["index", "label", "value", "p_last", "p_second", "statistic"])?;
                let opt = |p: Option<f64>| p.map(sig6).unwrap_or_default();
                for r in &self.rows {
                    w.write_record([
                        r.index.to_string(),
                        r.label.clone(),
                        r.value.to_string(),
                        opt(r.p_last),
                        opt(r.p_second),
                        sig6(r.statistic),
                    ])?;
                }
                w.flush()?;
                drop(w);
                writeln!(summary, "detector: {}", self.detector)?;
                writeln!(summary, "observations: {}", self.n)?;
                writeln!(summary, "statistic: {} (threshold {})", sig6(self.statistic), self.threshold)?;
                writeln!(summary, "change detected: {}", if self.change_detected { "yes" } else { "no" })?;
                writeln!(summary, "first alarm: {}", point_text(&self.first_alarm))?;
                if let Some(c) = &self.cpp {
                    writeln!(summary, "sum P(i+): {}", sig6(c.sum_p_last))?;
                    writeln!(summary, "sum P(i++): {}", sig6(c.sum_p_second))?;
                    writeln!(summary, "P(no earlier change): {}", sig6(c.p_hzero))?;
                    if c.older_last_mass > 0.0 || c.older_second_mass > 0.0 {
                        writeln!(
                            summary,
                            "pooled older mass: P(i+) {}, P(i++) {}",
                            sig6(c.older_last_mass),
                            sig6(c.older_second_mass)
                        )?;
                    }
                    writeln!(summary, "argmax P(i+): {}", point_text(&c.argmax_last))?;
                    writeln!(summary, "argmax P(i++): {}", point_text(&c.argmax_second))?;
                    writeln!(summary, "jacobi residual: {}", sig6(c.jacobi_residual))?;
                }
            }
        }
        Ok(())
    }
}
