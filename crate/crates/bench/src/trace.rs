//! CSV traces: one row per evaluated iterate.

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub const TRACE_HEADER: [&str; 8] =
    ["run_id", "optimizer", "iter", "epoch", "loss", "grad_norm", "step_kind", "seconds"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub run_id: String,
    pub optimizer: String,
    pub iter: u64,
    pub epoch: f64,
    /// Full objective at the iterate.
    pub loss: f64,
    /// Norm of the full gradient at the iterate.
    pub grad_norm: f64,
    /// Kind of the step that produced the iterate: `none`, `coarse`, `fine` or `mixed`.
    pub step_kind: String,
    /// Optimizer wall-clock time so far, objective evaluations excluded.
    pub seconds: f64,
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| BenchError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    if rows.is_empty() {
        w.write_record(TRACE_HEADER)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))?;
    Ok(())
}

/// Read a trace, rejecting files whose header is not exactly [`TRACE_HEADER`].
pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let file = File::open(path).map_err(|e| BenchError::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    if r.headers()?.iter().ne(TRACE_HEADER) {
        return Err(BenchError::Config(format!("{} is not a trace file", path.display())));
    }
    let rows = r.deserialize().collect::<std::result::Result<Vec<TraceRow>, _>>()?;
    if rows.windows(2).any(|w| w[1].iter <= w[0].iter) {
        return Err(BenchError::Config(format!("{}: iterations are not increasing", path.display())));
    }
    Ok(rows)
}

/// True when the first line of `path` is the trace header.
pub fn is_trace(path: &Path) -> bool {
    File::open(path)
        .ok()
        .and_then(|f| csv::Reader::from_reader(f).headers().ok().map(|h| h.iter().eq(TRACE_HEADER)))
        .unwrap_or(false)
}
