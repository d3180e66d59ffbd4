//! Experiment configuration, read from a TOML file.
//!
//! ```toml
//! name = "nlls-small"
//! iters = 3000
//! batch_size = 128
//! seeds = [0, 1, 2, 3, 4]
//!
//! [problem]
//! kind = "nlls-synthetic"
//! samples = 600
//! features = 500
//!
//! [[optimizers]]
//! name = "simba"
//! params = { step_size = 0.05, rank = 20, coarse_fraction = 0.05, floor = 1e-12 }
//!
//! [[optimizers]]
//! name = "adam"
//! params = { step_size = 1e-3 }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use simba_core::problems::{
    parse_libsvm_str, synthetic_autoencoder_data, synthetic_nlls, Activation, AutoencoderProblem, Basis, Dataset,
    InitScheme, MlpSpec, NllsProblem, QuadraticProblem,
};
use simba_core::{OptimizerRegistry, Problem};

use crate::error::{BenchError, Result};

pub const DEFAULT_BATCH_SIZE: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub iters: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Explicit seeds; when empty, `0..repetitions`.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<usize>,
    /// Evaluate the full objective every this many iterations (and at the end).
    #[serde(default = "one")]
    pub eval_every: usize,
    /// Overrides the problem's default initialization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitScheme>,
    #[serde(default = "yes")]
    pub parallel: bool,
    pub problem: ProblemSpec,
    pub optimizers: Vec<OptimizerSpec>,
    #[serde(default)]
    pub verify: VerifyConfig,
}

fn default_batch() -> usize {
    DEFAULT_BATCH_SIZE
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic {
        n: usize,
        mu: f64,
        lipschitz: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        basis: Basis,
    },
    NllsSynthetic {
        samples: usize,
        features: usize,
        #[serde(default = "default_sparsity")]
        sparsity: f64,
        #[serde(default)]
        seed: u64,
    },
    NllsLibsvm {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_features: Option<usize>,
        /// Scale every feature column by its largest absolute value.
        #[serde(default)]
        normalize: bool,
    },
    Autoencoder {
        widths: Vec<usize>,
        #[serde(default)]
        activation: Activation,
        #[serde(default = "unit")]
        init_scale: f64,
        #[serde(default)]
        samples: usize,
        #[serde(default = "default_latent")]
        latent: usize,
        #[serde(default)]
        data_seed: u64,
        /// LIBSVM file to use instead of synthetic data.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data_path: Option<PathBuf>,
    },
}

fn default_sparsity() -> f64 {
    0.1
}

fn unit() -> f64 {
    1.0
}

fn default_latent() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    /// Registry name, e.g. `simba` or `adam`.
    pub name: String,
    /// Series name in traces and plots; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl OptimizerSpec {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Target gap as a fraction of the initial gap.
    pub eps_fraction: f64,
    /// Extra targets for which the iteration bound is reported.
    pub eps_sweep: Vec<f64>,
    /// Check every transition against this fixed factor instead of the certificate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor_override: Option<f64>,
    /// Simba parameters; `momentum = 0` and guarded mode unless set.
    pub simba: Map<String, Value>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { eps_fraction: 1e-6, eps_sweep: vec![1e-2, 1e-4, 1e-6, 1e-8], factor_override: None, simba: Map::new() }
    }
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub iters: Option<usize>,
}

/// Environment variable naming the root for relative output directories.
pub const OUT_ROOT_ENV: &str = "SIMBA_OUT_ROOT";

impl ExperimentConfig {
    /// Parse, resolve data paths against the file's directory, and validate.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            BenchError::ConfigParse { source, .. } => BenchError::ConfigParse { path: path.to_owned(), source },
            other => other,
        })?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)
            .map_err(|source| BenchError::ConfigParse { path: PathBuf::from("<inline>"), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| BenchError::Config(e.to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.problem {
            ProblemSpec::NllsLibsvm { path, .. } => fix(path),
            ProblemSpec::Autoencoder { data_path: Some(path), .. } => fix(path),
            _ => {}
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if self.optimizers.is_empty() {
            return bad("at least one optimizer is required".into());
        }
        if self.iters == 0 || self.batch_size == 0 || self.eval_every == 0 {
            return bad("iters, batch_size and eval_every must be positive".into());
        }
        if let Some(r) = self.repetitions {
            if r == 0 || (!self.seeds.is_empty() && self.seeds.len() != r) {
                return bad(format!("repetitions = {r} disagrees with {} seeds", self.seeds.len()));
            }
        }
        let registry = OptimizerRegistry::with_builtins();
        let mut labels = Vec::new();
        for opt in &self.optimizers {
            if !registry.contains(&opt.name) {
                return bad(format!("unknown optimizer `{}`", opt.name));
            }
            if labels.contains(&opt.label()) {
                return bad(format!("duplicate optimizer label `{}`", opt.label()));
            }
            if opt.label().is_empty() || opt.label().contains([',', '/', '\\', '"']) {
                return bad(format!("optimizer label `{}` is not usable as a file name", opt.label()));
            }
            labels.push(opt.label());
            registry
                .build(&opt.name, &Value::Object(opt.params.clone()), 0)
                .map_err(|e| BenchError::Config(format!("optimizer `{}`: {e}", opt.label())))?;
        }
        if !(self.verify.eps_fraction > 0.0) || self.verify.eps_sweep.iter().any(|e| !(*e > 0.0)) {
            return bad("verify eps values must be positive".into());
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seeds = vec![seed];
            self.repetitions = None;
        }
        if let Some(iters) = o.iters {
            self.iters = iters;
        }
        if let Some(out) = &o.out {
            self.out_dir = Some(out.clone());
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..self.repetitions.unwrap_or(1) as u64).collect()
        } else {
            self.seeds.clone()
        }
    }

    /// `out_dir` (default `runs/<name>`); relative paths sit under `$SIMBA_OUT_ROOT` when set.
    pub fn output_dir(&self) -> PathBuf {
        let dir = self.out_dir.clone().unwrap_or_else(|| Path::new("runs").join(&self.name));
        match std::env::var_os(OUT_ROOT_ENV) {
            Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
            _ => dir,
        }
    }

    pub fn init_scheme(&self) -> InitScheme {
        self.init.unwrap_or(match self.problem {
            ProblemSpec::Autoencoder { init_scale, .. } => InitScheme::FanIn { scale: init_scale },
            _ => InitScheme::Zeros,
        })
    }

    pub fn build_problem(&self) -> Result<Box<dyn Problem>> {
        Ok(match &self.problem {
            ProblemSpec::Quadratic { n, mu, lipschitz, seed, basis } => {
                Box::new(QuadraticProblem::with_basis(*n, *mu, *lipschitz, *seed, *basis).map_err(config_err)?)
            }
            ProblemSpec::NllsSynthetic { samples, features, sparsity, seed } => {
                let data = synthetic_nlls(*samples, *features, *sparsity, *seed).map_err(config_err)?;
                Box::new(NllsProblem::new(&data.dataset)?)
            }
            ProblemSpec::NllsLibsvm { path, n_features, normalize } => {
                let mut data = read_dataset(path, *n_features)?;
                if *normalize {
                    max_abs_scale(&mut data);
                }
                Box::new(NllsProblem::new(&data)?)
            }
            ProblemSpec::Autoencoder { widths, activation, init_scale, samples, latent, data_seed, data_path } => {
                let spec =
                    MlpSpec { widths: widths.clone(), activation: *activation, init_scale: *init_scale, seed: 0 };
                spec.validate().map_err(config_err)?;
                let data = match data_path {
                    Some(p) => read_dataset(p, Some(widths[0]))?,
                    None => {
                        if *samples == 0 {
                            return Err(BenchError::Config("autoencoder needs `samples` or `data_path`".into()));
                        }
                        synthetic_autoencoder_data(*samples, widths[0], *latent, *data_seed).map_err(config_err)?
                    }
                };
                Box::new(AutoencoderProblem::new(spec, &data).map_err(config_err)?)
            }
        })
    }
}

fn config_err(e: simba_core::SimbaError) -> BenchError {
    BenchError::Config(e.to_string())
}

fn read_dataset(path: &Path, n_features: Option<usize>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    Ok(parse_libsvm_str(&text, n_features)?)
}

fn max_abs_scale(data: &mut Dataset) {
    for mut col in data.features.column_iter_mut() {
        let peak = col.amax();
        if peak > 0.0 {
            col /= peak;
        }
    }
}
