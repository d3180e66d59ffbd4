//! Runs every (optimizer, seed) pair of a config and writes traces and a summary.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;
use simba_core::optim::summarize_kinds;
use simba_core::problems::InitScheme;
use simba_core::{OptimizerRegistry, ParamBlock, Problem};

use crate::config::{ExperimentConfig, OptimizerSpec};
use crate::error::{BenchError, Result};
use crate::summary::{summarize, write_summary, SummaryRow};
use crate::trace::{write_trace, TraceRow};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const CONFIG_ECHO: &str = "config.toml";

const INIT_STREAM: u64 = 1;
const BATCH_STREAM: u64 = 2;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    /// In config order: optimizers outer, seeds inner.
    pub trace_files: Vec<PathBuf>,
    pub summary: Vec<SummaryRow>,
}

pub fn run_id(label: &str, seed: u64) -> String {
    format!("{label}-s{seed}")
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Initial parameters for a seed; identical across optimizers.
pub fn initial_params(problem: &dyn Problem, scheme: InitScheme, seed: u64) -> Vec<ParamBlock> {
    problem.init(scheme, &mut stream_rng(seed, INIT_STREAM))
}

fn evaluate(problem: &dyn Problem, params: &[ParamBlock]) -> Result<(f64, f64)> {
    let (loss, grads) = problem.loss_and_grad(params, None)?;
    let norm = grads.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();
    Ok((loss, norm))
}

/// Train one optimizer from one seed and return its trace.
pub fn run_single(
    cfg: &ExperimentConfig,
    problem: &dyn Problem,
    registry: &OptimizerRegistry,
    spec: &OptimizerSpec,
    seed: u64,
) -> Result<Vec<TraceRow>> {
    let mut params = initial_params(problem, cfg.init_scheme(), seed);
    let mut opt = registry.build(&spec.name, &Value::Object(spec.params.clone()), seed)?;
    let mut batch_rng = stream_rng(seed, BATCH_STREAM);
    let samples = problem.num_samples();
    let full_batch = cfg.batch_size >= samples;
    let id = run_id(spec.label(), seed);

    let row = |iter: u64, loss: f64, grad_norm: f64, kind: &str, elapsed: Duration| TraceRow {
        run_id: id.clone(),
        optimizer: spec.label().to_owned(),
        iter,
        epoch: iter as f64 * cfg.batch_size.min(samples) as f64 / samples as f64,
        loss,
        grad_norm,
        step_kind: kind.to_owned(),
        seconds: elapsed.as_secs_f64(),
    };

    let (loss, norm) = evaluate(problem, &params)?;
    let mut rows = vec![row(0, loss, norm, "none", Duration::ZERO)];
    let mut elapsed = Duration::ZERO;
    for k in 1..=cfg.iters {
        let started = Instant::now();
        let batch = (!full_batch).then(|| sample(&mut batch_rng, samples, cfg.batch_size).into_vec());
        let (_, grads) = problem.loss_and_grad(&params, batch.as_deref())?;
        let reports = opt.step(&mut params, &grads)?;
        elapsed += started.elapsed();
        if k % cfg.eval_every == 0 || k == cfg.iters {
            let (loss, norm) = evaluate(problem, &params)?;
            rows.push(row(k as u64, loss, norm, summarize_kinds(&reports), elapsed));
        }
    }
    Ok(rows)
}

/// Run every (optimizer, seed) pair, write `<run_id>.csv` traces, `summary.csv`,
/// and the effective config to `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    let registry = OptimizerRegistry::with_builtins();
    std::fs::create_dir_all(out_dir).map_err(|e| BenchError::io(out_dir, e))?;
    let echo = out_dir.join(CONFIG_ECHO);
    std::fs::write(&echo, cfg.to_toml()?).map_err(|e| BenchError::io(&echo, e))?;

    let jobs: Vec<(&OptimizerSpec, u64)> =
        cfg.optimizers.iter().flat_map(|o| cfg.seed_list().into_iter().map(move |s| (o, s))).collect();
    let job = |&(spec, seed): &(&OptimizerSpec, u64)| -> Result<(PathBuf, Vec<TraceRow>)> {
        let rows = run_single(cfg, problem.as_ref(), &registry, spec, seed)?;
        let path = out_dir.join(format!("{}.csv", run_id(spec.label(), seed)));
        write_trace(&path, &rows)?;
        Ok((path, rows))
    };
    let results: Vec<(PathBuf, Vec<TraceRow>)> = if cfg.parallel {
        jobs.par_iter().map(job).collect::<Result<_>>()?
    } else {
        jobs.iter().map(job).collect::<Result<_>>()?
    };

    let labels: Vec<&str> = cfg.optimizers.iter().map(OptimizerSpec::label).collect();
    let (trace_files, traces): (Vec<PathBuf>, Vec<Vec<TraceRow>>) = results.into_iter().unzip();
    let summary = summarize(&labels, &traces);
    write_summary(&out_dir.join(SUMMARY_FILE), &summary)?;
    Ok(RunOutcome { out_dir: out_dir.to_owned(), trace_files, summary })
}
