// SPDX-License-Identifier: MIT OR Apache-2.0

//! Series files: CSV rows of `value` or `label,value`, optional header,
//! `#` comment lines.

use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::Usage;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl Series {
    /// Labels `first, first+1, ...` for unlabelled values.
    pub fn numbered(values: Vec<f64>, first: usize) -> Self {
        let labels = (first..first + values.len()).map(|i| i.to_string()).collect();
        Self { labels, values }
    }
}

pub fn read_series(path: &Path) -> Result<Series> {
    let mut text = String::new();
    if path.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut text).context("reading stdin")?;
    } else {
        text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    }
    parse_series(&text, 1).with_context(|| format!("parsing {}", path.display()))
}

/// Parse a series; unlabelled rows are numbered from `first`.
pub fn parse_series(text: &str, first: usize) -> Result<Series> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut labelled = None;
    let mut first_record = true;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            anyhow::anyhow!("line {line}: {e}")
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let (label, raw) = match record.len() {
            1 => (None, &record[0]),
            2 => (Some(&record[0]), &record[1]),
            n => bail!("line {line}: expected `value` or `label,value`, found {n} fields"),
        };
        let value = match raw.parse::<f64>() {
            Ok(v) => v,
            Err(_) if std::mem::take(&mut first_record) => continue,
            Err(_) => bail!("line {line}: cannot parse {raw:?} as a number"),
        };
        first_record = false;
        if !value.is_finite() {
            bail!("line {line}: value {raw:?} is not finite");
        }
        if *labelled.get_or_insert(label.is_some()) != label.is_some() {
            bail!("line {line}: mixes labelled and unlabelled rows");
        }
        labels.push(match label {
            Some(l) => l.to_string(),
            None => (first + values.len()).to_string(),
        });
        values.push(value);
    }
    if values.is_empty() {
        return Err(Usage("input contains no observations".into()).into());
    }
    Ok(Series { labels, values })
}

pub fn write_series(path: &Path, series: &Series) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["t", "x"])?;
    for (label, value) in series.labels.iter().zip(&series.values) {
        w.write_record([label.as_str(), &value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_bare_values_and_labelled_rows() {
        let s = parse_series("1.5\n-2\n\n3e2\n", 1).unwrap();
        assert_eq!(s.values, vec![1.5, -2.0, 300.0]);
        assert_eq!(s.labels, vec!["1", "2", "3"]);

        let s = parse_series("# note\nyear,flow\n1871,1120\n1872, 1160\n", 1).unwrap();
        assert_eq!(s.labels, vec!["1871", "1872"]);
        assert_eq!(s.values, vec![1120.0, 1160.0]);
    }

    #[test]
    fn errors_name_the_line() {
        let err = parse_series("t,x\n1,0.5\n2,abc\n", 1).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        let err = parse_series("0.5\n1,2,3\n", 1).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let err = parse_series("1\nNaN\n", 1).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn empty_input_is_a_usage_error() {
        for text in ["", "\n\n", "# only a comment\n", "t,x\n"] {
            let err = parse_series(text, 1).unwrap_err();
            assert!(err.is::<Usage>(), "{text:?}");
        }
    }

    #[test]
    fn values_survive_a_write_read_cycle() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let values = vec![0.1 + 0.2, -1e-300, 123456.789012345, f64::MIN_POSITIVE, 1.0 / 3.0];
        let series = Series::numbered(values, 1);
        write_series(&path, &series).unwrap();
        assert_eq!(read_series(&path).unwrap(), series);
    }
}
