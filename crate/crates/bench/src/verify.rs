//! End-to-end rate certificates for problems with known constants.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use simba_core::verify::{
    certify, check_contraction, instrumented_run, rate_constants, Certificate, ContractionReport,
};
use simba_core::{HyperParams, SimbaError};

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::runner::initial_params;

pub const CERTIFICATE_FILE: &str = "certificate.json";

#[derive(Debug, Clone, Serialize)]
pub struct SeedCertificate {
    pub seed: u64,
    pub certificate: Certificate,
    /// Present when `factor_override` is set.
    pub forced: Option<ContractionReport>,
    /// `(eps_fraction, K̂)` pairs under this seed's certificate.
    pub eps_sweep: Vec<(f64, f64)>,
    pub final_gap: f64,
}

impl SeedCertificate {
    pub fn violations(&self) -> usize {
        let c = &self.certificate;
        c.contraction.violation_count()
            + c.direction_bound_violations
            + c.lambda_bound_violations
            + usize::from(!c.iteration_bound_holds)
            + self.forced.as_ref().map_or(0, ContractionReport::violation_count)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutcome {
    pub out_file: PathBuf,
    pub seeds: Vec<SeedCertificate>,
}

impl VerifyOutcome {
    pub fn total_violations(&self) -> usize {
        self.seeds.iter().map(SeedCertificate::violations).sum()
    }
}

pub fn verify_hyper_params(cfg: &ExperimentConfig, seed: u64) -> Result<HyperParams> {
    let mut params = serde_json::Map::new();
    params.insert("momentum".into(), Value::from(0.0));
    params.insert("mode".into(), Value::from("guarded"));
    params.insert("seed".into(), Value::from(seed));
    params.extend(cfg.verify.simba.clone());
    let hp: HyperParams =
        serde_json::from_value(Value::Object(params)).map_err(|e| BenchError::Config(format!("verify.simba: {e}")))?;
    hp.validate().map_err(|e| BenchError::Config(e.to_string()))?;
    Ok(hp)
}

/// Instrumented Simba run per seed, certified against the problem's constants.
/// Writes `certificate.json`; violations are counted, not raised.
pub fn run_verify(cfg: &ExperimentConfig, out_dir: &Path) -> Result<VerifyOutcome> {
    let problem = cfg.build_problem()?;
    let known = problem.constants().ok_or_else(|| {
        BenchError::Core(SimbaError::Unsupported(format!("problem `{}` has no known constants", problem.name())))
    })?;
    let mut seeds = Vec::new();
    for seed in cfg.seed_list() {
        let hp = verify_hyper_params(cfg, seed)?;
        let mut x0 = initial_params(problem.as_ref(), cfg.init_scheme(), seed);
        if x0.len() != 1 {
            return Err(BenchError::Core(SimbaError::Unsupported("verify needs a single-block problem".into())));
        }
        let run = instrumented_run(problem.as_ref(), x0.remove(0), &hp, known.lipschitz, cfg.iters)?;
        let certificate = certify(&run, known, cfg.verify.eps_fraction)?;
        let forced = match cfg.verify.factor_override {
            Some(f) => Some(check_contraction(&run.losses, known.f_star, f)?),
            None => None,
        };
        let r = &certificate.rate;
        let gap0 = run.losses[0] - known.f_star;
        let eps_sweep = cfg
            .verify
            .eps_sweep
            .iter()
            .map(|&e| Ok((e, rate_constants(r.mu, r.lipschitz, r.m, r.big_m, r.xi, r.omega, gap0, e * gap0)?.k_hat)))
            .collect::<simba_core::Result<Vec<_>>>()?;
        let final_gap = run.losses.last().copied().unwrap_or(f64::NAN) - known.f_star;
        seeds.push(SeedCertificate { seed, certificate, forced, eps_sweep, final_gap });
    }
    std::fs::create_dir_all(out_dir).map_err(|e| BenchError::io(out_dir, e))?;
    let out_file = out_dir.join(CERTIFICATE_FILE);
    let json = serde_json::to_string_pretty(&seeds).map_err(|e| BenchError::Config(e.to_string()))?;
    std::fs::write(&out_file, json).map_err(|e| BenchError::io(&out_file, e))?;
    Ok(VerifyOutcome { out_file, seeds })
}
