//! Seeded synthetic data for the NLLS and autoencoder benchmarks.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, StudentT};

use super::nlls::flipped_sigmoid;
use super::Dataset;
use crate::error::{invalid_param, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticNlls {
    pub dataset: Dataset,
    /// `n × 1` parameter vector that generated the labels.
    pub planted: DMatrix<f64>,
}

/// Sparse features with Student-t (3 dof) values, each entry non-zero with
/// probability `sparsity`; label `1` exactly when `g(aᵀ x_true) > 0.5`.
pub fn synthetic_nlls(m: usize, n: usize, sparsity: f64, seed: u64) -> Result<SyntheticNlls> {
    if m == 0 || n == 0 {
        return Err(invalid_param("synthetic NLLS needs m, n >= 1"));
    }
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return Err(invalid_param(format!("sparsity must lie in (0, 1], got {sparsity}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let heavy = StudentT::new(3.0).map_err(|e| invalid_param(e.to_string()))?;
    let planted = DMatrix::from_fn(n, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
    let features = DMatrix::from_fn(m, n, |_, _| if rng.random::<f64>() < sparsity { rng.sample(heavy) } else { 0.0 });
    let margins = &features * &planted;
    let labels = margins.iter().map(|&w| if flipped_sigmoid(w) > 0.5 { 1.0 } else { 0.0 }).collect();
    Ok(SyntheticNlls { dataset: Dataset::new(features, labels)?, planted })
}

/// Samples of `sigmoid(z W)` for Gaussian latent codes `z ∈ R^latent`, so every
/// feature lies in `(0, 1)` on a `latent`-dimensional manifold. Labels are zero.
pub fn synthetic_autoencoder_data(samples: usize, width: usize, latent: usize, seed: u64) -> Result<Dataset> {
    if samples == 0 || width == 0 || latent == 0 {
        return Err(invalid_param("autoencoder data needs positive sizes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 2.0 / (latent as f64).sqrt();
    let mixing = DMatrix::from_fn(latent, width, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    let codes = DMatrix::from_fn(samples, latent, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut features = codes * mixing;
    features.apply(|v| *v = 1.0 / (1.0 + (-*v).exp()));
    Dataset::new(features, vec![0.0; samples])
}
