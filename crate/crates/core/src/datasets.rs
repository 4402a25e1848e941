// SPDX-License-Identifier: MIT OR Apache-2.0

//! Bundled reference data.

use crate::error::{CppError, Result};
use crate::series::TimeSeries;

/// The bundled file: provenance comments, a `year,flow` header, 100 rows.
pub const NILE_CSV: &str = include_str!("../data/nile.csv");

/// Index (1-based, last pre-change observation) of the well-known Nile
/// level shift: 1898 is the 28th year of the record.
pub const NILE_CHANGE_INDEX: usize = 28;

/// Annual flow of the Nile at Aswan, 1871-1970, in 10^8 m^3 (Cobb, 1978).
/// Labels are the years.
pub fn nile() -> TimeSeries {
    parse_year_csv(NILE_CSV).expect("bundled Nile data is well formed")
}

fn parse_year_csv(text: &str) -> Result<TimeSeries> {
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut header = true;
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if std::mem::take(&mut header) {
            continue;
        }
        let bad = || CppError::Domain(format!("line {}: expected `year,value`, got {line:?}", line_no + 1));
        let (year, value) = line.split_once(',').ok_or_else(bad)?;
        labels.push(year.trim().to_string());
        values.push(value.trim().parse::<f64>().map_err(|_| bad())?);
    }
    TimeSeries::with_labels(values, labels)
}
