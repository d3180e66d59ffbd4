//! LIBSVM sparse text format: `label idx:val idx:val ...` with 1-based indices.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use super::Dataset;
use crate::error::{invalid_input, Result, SimbaError};

/// Read a LIBSVM file; the feature count is the largest index seen.
pub fn parse_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_libsvm_str(&text, None)
}

/// Parse LIBSVM text. Labels drawn from `{-1, +1}` are mapped to `{0, 1}`.
/// `n_features` widens the feature matrix beyond the largest index.
pub fn parse_libsvm_str(text: &str, n_features: Option<usize>) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut width = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| SimbaError::Parse { line: lineno + 1, message };
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label: f64 = label_tok
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| err(format!("bad label `{label_tok}`")))?;
        let mut entries = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| err(format!("expected idx:val, got `{tok}`")))?;
            let idx: usize = idx.parse().map_err(|_| err(format!("bad index `{idx}`")))?;
            if idx == 0 {
                return Err(err("indices are 1-based".to_owned()));
            }
            if idx <= prev {
                return Err(err(format!("index {idx} is not increasing")));
            }
            let val: f64 =
                val.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| err(format!("bad value `{val}`")))?;
            prev = idx;
            entries.push((idx - 1, val));
        }
        width = width.max(prev);
        labels.push(label);
        rows.push(entries);
    }
    if rows.is_empty() {
        return Err(invalid_input("LIBSVM input has no samples"));
    }
    if let Some(n) = n_features {
        if n < width {
            return Err(invalid_input(format!("feature index {width} exceeds the declared {n} features")));
        }
        width = n;
    }
    let mut features = DMatrix::zeros(rows.len(), width);
    for (i, entries) in rows.iter().enumerate() {
        for &(j, v) in entries {
            features[(i, j)] = v;
        }
    }
    if labels.iter().all(|&l| l == 1.0 || l == -1.0) && labels.contains(&-1.0) {
        labels.iter_mut().for_each(|l| *l = if *l > 0.0 { 1.0 } else { 0.0 });
    }
    Dataset::new(features, labels)
}

/// Write non-zero entries only; `parse_libsvm_str` with the same feature count
/// reproduces the dataset exactly.
pub fn write_libsvm(data: &Dataset, mut out: impl Write) -> Result<()> {
    for (i, label) in data.labels.iter().enumerate() {
        write!(out, "{label}")?;
        for (j, v) in data.features.row(i).iter().enumerate() {
            if *v != 0.0 {
                write!(out, " {}:{v}", j + 1)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}
