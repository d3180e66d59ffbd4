//! Standalone SVG line charts of loss against iterations and wall-clock time.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::runner::CONFIG_ECHO;
use crate::trace::{is_trace, read_trace, TraceRow};

pub const LOSS_VS_ITER: &str = "loss_vs_iter.svg";
pub const LOSS_VS_TIME: &str = "loss_vs_time.svg";

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Seed-averaged curve for one optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub iters: Vec<f64>,
    pub seconds: Vec<f64>,
    pub loss: Vec<f64>,
}

/// Average traces per optimizer over the iterations every seed recorded.
pub fn collect_series(traces: &[Vec<TraceRow>], order: &[String]) -> Vec<Series> {
    order
        .iter()
        .filter_map(|label| {
            let runs: Vec<&Vec<TraceRow>> =
                traces.iter().filter(|t| t.first().is_some_and(|r| &r.optimizer == label)).collect();
            let len = runs.iter().map(|r| r.len()).min()?;
            let n = runs.len() as f64;
            let avg =
                |f: fn(&TraceRow) -> f64| (0..len).map(|i| runs.iter().map(|r| f(&r[i])).sum::<f64>() / n).collect();
            Some(Series {
                label: label.clone(),
                iters: avg(|r| r.iter as f64),
                seconds: avg(|r| r.seconds),
                loss: avg(|r| r.loss),
            })
        })
        .collect()
}

fn optimizer_order(dir: &Path, traces: &[Vec<TraceRow>]) -> Vec<String> {
    let mut order: Vec<String> = ExperimentConfig::load(&dir.join(CONFIG_ECHO))
        .map(|c| c.optimizers.iter().map(|o| o.label().to_owned()).collect())
        .unwrap_or_default();
    for t in traces {
        if let Some(r) = t.first() {
            if !order.contains(&r.optimizer) {
                order.push(r.optimizer.clone());
            }
        }
    }
    order
}

/// Write both figures for the traces in `dir`.
pub fn plot_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| BenchError::io(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv") && is_trace(p))
        .collect();
    files.sort();
    if files.is_empty() {
        let missing = std::io::Error::new(std::io::ErrorKind::NotFound, "no trace files");
        return Err(BenchError::io(dir, missing));
    }
    let traces = files.iter().map(|f| read_trace(f)).collect::<Result<Vec<_>>>()?;
    let series = collect_series(&traces, &optimizer_order(dir, &traces));
    let mut written = Vec::new();
    for (name, xlabel, by_time) in [(LOSS_VS_ITER, "iteration", false), (LOSS_VS_TIME, "wall-clock seconds", true)] {
        let curves: Vec<(&str, Vec<(f64, f64)>)> = series
            .iter()
            .map(|s| {
                let xs = if by_time { &s.seconds } else { &s.iters };
                (s.label.as_str(), xs.iter().copied().zip(s.loss.iter().copied()).collect())
            })
            .collect();
        let path = dir.join(name);
        std::fs::write(&path, render(&curves, xlabel, "training loss")).map_err(|e| BenchError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64> + Clone, allow_log: bool) -> Self {
        let finite = values.filter(|v| v.is_finite());
        let log = allow_log && finite.clone().all(|v| v > 0.0);
        let mapped = finite.map(|v| if log { v.log10() } else { v });
        let (mut lo, mut hi) = mapped.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if log {
            (lo, hi) = (lo.floor(), hi.ceil());
        }
        if hi - lo < 1e-12 {
            hi = lo + 1.0;
        }
        Self { lo, hi, log }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let step = ((self.hi - self.lo) / 8.0).ceil().max(1.0);
            let mut out = Vec::new();
            let mut e = self.lo;
            while e <= self.hi + 1e-9 {
                out.push((10f64.powf(e), format!("1e{}", e as i64)));
                e += step;
            }
            out
        } else {
            (0..=5)
                .map(|i| {
                    let v = self.lo + (self.hi - self.lo) * i as f64 / 5.0;
                    (v, format!("{v:.3}"))
                })
                .collect()
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One polyline per curve; the y axis is logarithmic when every loss is positive.
pub fn render(curves: &[(&str, Vec<(f64, f64)>)], xlabel: &str, ylabel: &str) -> String {
    let points = || curves.iter().flat_map(|(_, p)| p.iter());
    let xa = Axis::new(points().map(|p| p.0), false);
    let ya = Axis::new(points().map(|p| p.1), true);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let px = |x: f64| LEFT + xa.frac(x) * pw;
    let py = |y: f64| TOP + (1.0 - ya.frac(y)) * ph;

    let mut s = String::new();
    let scale = if ya.log { "log" } else { "linear" };
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" data-y-scale="{scale}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for (v, text) in ya.ticks() {
        let y = py(v);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{text}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    for (v, text) in xa.ticks() {
        let x = px(v);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" font-size="12" text-anchor="middle">{text}</text>"#,
            TOP + ph + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" font-size="14" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(ylabel)
    );
    for (i, (label, pts)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!ya.log || *y > 0.0))
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-label="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            escape(label),
            coords.join(" ")
        );
        let ly = TOP + 20.0 * i as f64 + 10.0;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/>"#,
            lx + 20.0
        );
        let _ =
            writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="12">{}</text>"#, lx + 26.0, ly + 4.0, escape(label));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_axis_only_for_positive_values() {
        let pos = render(&[("a", vec![(0.0, 1.0), (1.0, 1e-3)])], "x", "y");
        assert!(pos.contains(r#"data-y-scale="log""#));
        let mixed = render(&[("a", vec![(0.0, 1.0), (1.0, -1.0)])], "x", "y");
        assert!(mixed.contains(r#"data-y-scale="linear""#));
    }

    #[test]
    fn labels_are_escaped() {
        let svg = render(&[("a<b", vec![(0.0, 1.0)])], "x", "y");
        assert!(svg.contains("a&lt;b"));
        assert!(!svg.contains("a<b"));
    }
}
