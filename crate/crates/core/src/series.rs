// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{CppError, Result};

/// Ordered real-valued observations with optional time labels.
///
/// Position `i` in the public API is 1-based: `value(1)` is the first
/// observation. A changepoint "at i" separates `x_1..x_i` from `x_{i+1}..`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TimeSeries {
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(CppError::NonFinite { value: bad });
        }
        Ok(Self {
            values,
            labels: None,
        })
    }

    pub fn with_labels(values: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != values.len() {
            return Err(CppError::Dimension(format!(
                "{} labels for {} values",
                labels.len(),
                values.len()
            )));
        }
        let mut series = Self::new(values)?;
        series.labels = Some(labels);
        Ok(series)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Label for 1-based position `i`, falling back to the position itself.
    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(labels) if i >= 1 && i <= labels.len() => labels[i - 1].clone(),
            _ => i.to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl AsRef<[f64]> for TimeSeries {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}
