//! `f(x) = ½ (x − x*)ᵀ A (x − x*)` with a prescribed spectrum.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{check_blocks, KnownConstants, Problem};
use crate::error::{invalid_param, Result};
use crate::simba::ParamBlock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    #[default]
    Random,
    Identity,
}

#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    hessian: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    minimizer: DMatrix<f64>,
}

impl QuadraticProblem {
    /// Eigenvalues evenly spaced over `[mu, lipschitz]`, random orthogonal basis
    /// and a standard-normal minimizer, all from `seed`.
    pub fn new(n: usize, mu: f64, lipschitz: f64, seed: u64) -> Result<Self> {
        Self::with_basis(n, mu, lipschitz, seed, Basis::Random)
    }

    pub fn with_basis(n: usize, mu: f64, lipschitz: f64, seed: u64, basis: Basis) -> Result<Self> {
        if !(mu > 0.0 && mu < lipschitz && lipschitz.is_finite()) {
            return Err(invalid_param(format!("need 0 < mu < L, got mu={mu}, L={lipschitz}")));
        }
        if n < 2 {
            return Err(invalid_param("quadratic needs at least 2 dimensions"));
        }
        let eigenvalues: Vec<f64> = (0..n).map(|i| lipschitz - (lipschitz - mu) * i as f64 / (n - 1) as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let minimizer = DMatrix::from_fn(n, 1, |_, _| rng.sample(StandardNormal));
        Self::from_spectrum(eigenvalues, minimizer, basis, &mut rng)
    }

    pub fn from_spectrum<R: Rng>(
        eigenvalues: Vec<f64>,
        minimizer: DMatrix<f64>,
        basis: Basis,
        rng: &mut R,
    ) -> Result<Self> {
        let n = eigenvalues.len();
        if minimizer.shape() != (n, 1) {
            return Err(invalid_param("minimizer must be an n x 1 column"));
        }
        if eigenvalues.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(invalid_param("eigenvalues must be positive and finite"));
        }
        let diag = DMatrix::from_diagonal(&DVector::from_vec(eigenvalues.clone()));
        let hessian = match basis {
            Basis::Identity => diag,
            Basis::Random => {
                let g: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| rng.sample(StandardNormal));
                let q = g.qr().q();
                let mut a = &q * diag * q.transpose();
                a = (&a + a.transpose()) * 0.5;
                a
            }
        };
        Ok(Self { hessian, eigenvalues, minimizer })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn minimizer(&self) -> &DMatrix<f64> {
        &self.minimizer
    }

    pub fn mu(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn lipschitz(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(0.0, f64::max)
    }
}

impl Problem for QuadraticProblem {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn block_shapes(&self) -> Vec<(String, usize, usize)> {
        vec![("x".to_owned(), self.dim(), 1)]
    }

    fn num_samples(&self) -> usize {
        1
    }

    fn loss(&self, params: &[ParamBlock], _batch: Option<&[usize]>) -> Result<f64> {
        check_blocks(params, &self.block_shapes())?;
        let e = &params[0].values - &self.minimizer;
        Ok(0.5 * e.dot(&(&self.hessian * &e)))
    }

    fn loss_and_grad(&self, params: &[ParamBlock], _batch: Option<&[usize]>) -> Result<(f64, Vec<DMatrix<f64>>)> {
        check_blocks(params, &self.block_shapes())?;
        let e = &params[0].values - &self.minimizer;
        let grad = &self.hessian * &e;
        Ok((0.5 * e.dot(&grad), vec![grad]))
    }

    fn constants(&self) -> Option<KnownConstants> {
        Some(KnownConstants { mu: self.mu(), lipschitz: self.lipschitz(), f_star: 0.0 })
    }
}
