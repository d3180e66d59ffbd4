//! Differentiable test problems with analytic gradients.

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Result};
use crate::simba::ParamBlock;

mod autoencoder;
mod libsvm;
mod nlls;
mod quadratic;
mod synthetic;

pub use autoencoder::{Activation, AutoencoderProblem, MlpSpec};
pub use libsvm::{parse_libsvm, parse_libsvm_str, write_libsvm};
pub use nlls::{flipped_sigmoid, NllsProblem};
pub use quadratic::{Basis, QuadraticProblem};
pub use synthetic::{synthetic_autoencoder_data, synthetic_nlls, SyntheticNlls};

/// Samples as rows of `features`, one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: DMatrix<f64>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: Vec<f64>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(invalid_input("dataset has no samples"));
        }
        if features.nrows() != labels.len() {
            return Err(invalid_input(format!("{} feature rows but {} labels", features.nrows(), labels.len())));
        }
        if features.iter().chain(&labels).any(|v| !v.is_finite()) {
            return Err(invalid_input("dataset has non-finite values"));
        }
        Ok(Self { features, labels })
    }

    pub fn num_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnownConstants {
    pub mu: f64,
    pub lipschitz: f64,
    pub f_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitScheme {
    #[default]
    Zeros,
    Normal {
        std: f64,
    },
    /// Uniform in `±scale / sqrt(fan_in)` for weights, zero biases.
    FanIn {
        scale: f64,
    },
}

pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    /// `(id, rows, cols)` of every parameter block, in a fixed order.
    fn block_shapes(&self) -> Vec<(String, usize, usize)>;

    /// Samples available for mini-batching; deterministic problems report 1.
    fn num_samples(&self) -> usize;

    /// Objective over `batch` (all samples when `None`).
    fn loss(&self, params: &[ParamBlock], batch: Option<&[usize]>) -> Result<f64>;

    fn loss_and_grad(&self, params: &[ParamBlock], batch: Option<&[usize]>) -> Result<(f64, Vec<DMatrix<f64>>)>;

    fn constants(&self) -> Option<KnownConstants> {
        None
    }

    fn init(&self, scheme: InitScheme, rng: &mut dyn RngCore) -> Vec<ParamBlock> {
        self.block_shapes()
            .into_iter()
            .map(|(id, rows, cols)| ParamBlock::new(id, init_matrix(rows, cols, cols, scheme, rng)))
            .collect()
    }
}

pub(crate) fn init_matrix(
    rows: usize,
    cols: usize,
    fan_in: usize,
    scheme: InitScheme,
    rng: &mut dyn RngCore,
) -> DMatrix<f64> {
    match scheme {
        InitScheme::Zeros => DMatrix::zeros(rows, cols),
        InitScheme::Normal { std } => {
            let dist = Normal::new(0.0, std.abs()).unwrap_or_else(|_| Normal::new(0.0, 1.0).unwrap());
            DMatrix::from_fn(rows, cols, |_, _| rng.sample(dist))
        }
        InitScheme::FanIn { scale } => {
            let bound = scale / (fan_in.max(1) as f64).sqrt();
            DMatrix::from_fn(rows, cols, |_, _| bound * (2.0 * rng.random::<f64>() - 1.0))
        }
    }
}

pub(crate) fn check_blocks(params: &[ParamBlock], shapes: &[(String, usize, usize)]) -> Result<()> {
    if params.len() != shapes.len() {
        return Err(invalid_input(format!("expected {} parameter blocks, got {}", shapes.len(), params.len())));
    }
    for (p, (id, r, c)) in params.iter().zip(shapes) {
        if p.values.shape() != (*r, *c) {
            return Err(invalid_input(format!("block `{id}` should be {r}x{c}, got {:?}", p.values.shape())));
        }
    }
    Ok(())
}

pub(crate) fn check_batch(batch: Option<&[usize]>, samples: usize) -> Result<()> {
    if let Some(b) = batch {
        if b.is_empty() {
            return Err(invalid_input("empty batch"));
        }
        if b.iter().any(|&i| i >= samples) {
            return Err(invalid_input("batch index out of range"));
        }
    }
    Ok(())
}
