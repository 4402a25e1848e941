// SPDX-License-Identifier: MIT OR Apache-2.0

//! Benchmark sweeps written as plot-ready files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cpp_core::harness::{interpolate_at_alpha, sigma_sweep, threshold_sweep, ComparisonRow, DetectorKind, ScenarioSpec, SweepResult};
use serde::Serialize;

use crate::Format;

pub struct BenchPlan {
    pub spec: ScenarioSpec,
    pub detectors: Vec<DetectorKind>,
    /// Replaces the default grid; only with a single detector.
    pub thresholds: Option<Vec<f64>>,
    pub trials: usize,
    pub alpha: f64,
    pub sigmas: Option<Vec<f64>>,
    pub out_dir: PathBuf,
    pub format: Format,
}

#[derive(Serialize)]
struct SweepCsvRow<'a> {
    detector: &'a str,
    h: f64,
    alpha: f64,
    mean_delay: Option<f64>,
    n_trials: usize,
    n_oob: usize,
    note: &'a str,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_sweep(path: &Path, sweep: &SweepResult, format: Format) -> Result<()> {
    match format {
        Format::Json => write_json(path, sweep),
        Format::Csv => write_csv(
            path,
            sweep.rows.iter().map(|r| SweepCsvRow {
                detector: &r.detector,
                h: r.h,
                alpha: r.alpha,
                mean_delay: r.mean_delay,
                n_trials: r.n_trials,
                n_oob: r.n_oob,
                note: r.note.as_deref().unwrap_or(""),
            }),
        ),
    }
}

#[derive(Serialize)]
struct MatsigRow {
    sigma: f64,
    cpp_delay: Option<f64>,
    glr_delay: Option<f64>,
}

/// Run the plan; returns the files written.
pub fn run(plan: &BenchPlan) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&plan.out_dir).with_context(|| format!("creating {}", plan.out_dir.display()))?;
    let ext = match plan.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let mut written = Vec::new();

    if let Some(sigmas) = &plan.sigmas {
        let kind = |name: &str| plan.detectors.iter().find(|d| d.name() == name).cloned();
        let (cpp, glr) = (kind("cpp").expect("both detectors"), kind("glr").expect("both detectors"));
        let rows = sigma_sweep(&plan.spec, sigmas, &cpp, &glr, plan.trials, plan.alpha)?;
        let path = plan.out_dir.join(format!("matsig.{ext}"));
        match plan.format {
            Format::Json => write_json(&path, &rows)?,
            Format::Csv => write_csv(
                &path,
                rows.iter().map(|r| MatsigRow {
                    sigma: r.sigma,
                    cpp_delay: r.cpp_delay,
                    glr_delay: r.glr_delay,
                }),
            )?,
        }
        written.push(path);
        return Ok(written);
    }

    let mut delays = Vec::new();
    for kind in &plan.detectors {
        let kind = kind.adapted_to(&plan.spec);
        let grid = plan.thresholds.clone().unwrap_or_else(|| kind.default_thresholds());
        let sweep = threshold_sweep(&plan.spec, &kind, &grid, plan.trials)?;
        let path = plan.out_dir.join(format!("sweep_{}.{ext}", kind.name()));
        write_sweep(&path, &sweep, plan.format)?;
        written.push(path);
        delays.push((kind.name(), interpolate_at_alpha(&sweep, plan.alpha).ok()));
    }
    if plan.detectors.len() == 2 {
        let delay = |name: &str| delays.iter().find(|d| d.0 == name).and_then(|d| d.1);
        let row = ComparisonRow {
            sigma: plan.spec.sigma,
            alpha: plan.alpha,
            cpp_delay: delay("cpp"),
            glr_delay: delay("glr"),
        };
        let path = plan.out_dir.join(format!("comparison.{ext}"));
        match plan.format {
            Format::Json => write_json(&path, &[row])?,
            Format::Csv => write_csv(&path, [row])?,
        }
        written.push(path);
    }
    Ok(written)
}
