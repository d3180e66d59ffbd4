//! Per-optimizer statistics of final training loss across seeds.

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::trace::TraceRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub optimizer: String,
    pub runs: usize,
    pub final_loss_mean: f64,
    /// Sample standard deviation (zero for a single run).
    pub final_loss_std: f64,
    pub final_loss_min: f64,
    pub final_loss_max: f64,
    pub seconds_mean: f64,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One row per optimizer label, in the order given, from each run's last row.
pub fn summarize(labels: &[&str], traces: &[Vec<TraceRow>]) -> Vec<SummaryRow> {
    labels
        .iter()
        .filter_map(|&label| {
            let finals: Vec<&TraceRow> =
                traces.iter().filter_map(|t| t.last()).filter(|r| r.optimizer == label).collect();
            if finals.is_empty() {
                return None;
            }
            let losses: Vec<f64> = finals.iter().map(|r| r.loss).collect();
            let seconds: Vec<f64> = finals.iter().map(|r| r.seconds).collect();
            let (mean, std) = mean_std(&losses);
            Some(SummaryRow {
                optimizer: label.to_owned(),
                runs: finals.len(),
                final_loss_mean: mean,
                final_loss_std: std,
                final_loss_min: losses.iter().copied().fold(f64::INFINITY, f64::min),
                final_loss_max: losses.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                seconds_mean: mean_std(&seconds).0,
            })
        })
        .collect()
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| BenchError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let file = File::open(path).map_err(|e| BenchError::io(path, e))?;
    Ok(csv::Reader::from_reader(file).deserialize().collect::<std::result::Result<_, _>>()?)
}
