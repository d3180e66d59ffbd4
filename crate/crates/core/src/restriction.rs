//! Row-sampling restriction `R` and its prolongation `P = Rᵀ`.
//!
//! `R` is made of distinct rows of the identity, so it is never materialized:
//! restriction gathers rows, prolongation scatters them back.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{invalid_input, invalid_param, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestrictionOp {
    source_dim: usize,
    indices: Vec<usize>,
}

impl RestrictionOp {
    /// Uniform sample of `coarse_dim` distinct rows out of `source_dim`.
    pub fn sample<R: Rng + ?Sized>(source_dim: usize, coarse_dim: usize, rng: &mut R) -> Result<Self> {
        if coarse_dim < 1 || coarse_dim > source_dim {
            return Err(invalid_param(format!("coarse dimension {coarse_dim} must lie in [1, {source_dim}]")));
        }
        if coarse_dim == source_dim {
            return Ok(Self::identity(source_dim));
        }
        // Partial Fisher-Yates over a virtual 0..q; only displaced slots are stored.
        let mut swapped: HashMap<usize, usize> = HashMap::with_capacity(coarse_dim);
        let mut indices = Vec::with_capacity(coarse_dim);
        for i in 0..coarse_dim {
            let j = rng.random_range(i..source_dim);
            let at_j = *swapped.get(&j).unwrap_or(&j);
            let at_i = *swapped.get(&i).unwrap_or(&i);
            swapped.insert(j, at_i);
            indices.push(at_j);
        }
        indices.sort_unstable();
        Ok(Self { source_dim, indices })
    }

    pub fn identity(source_dim: usize) -> Self {
        Self { source_dim, indices: (0..source_dim).collect() }
    }

    pub fn from_indices(source_dim: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.is_empty() || indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid_param("indices must be non-empty and distinct"));
        }
        if indices.last().is_some_and(|&i| i >= source_dim) {
            return Err(invalid_param(format!("index out of range for dimension {source_dim}")));
        }
        Ok(Self { source_dim, indices })
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn coarse_dim(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn is_identity(&self) -> bool {
        self.coarse_dim() == self.source_dim
    }

    /// `ω = max(‖R‖₂, ‖P‖₂)`; always 1 for identity rows.
    pub fn omega(&self) -> f64 {
        1.0
    }

    pub fn restrict(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if g.nrows() != self.source_dim {
            return Err(invalid_input(format!("restriction expects {} rows, got {}", self.source_dim, g.nrows())));
        }
        Ok(g.select_rows(self.indices.iter()))
    }

    pub fn prolong(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.source_dim, y.ncols());
        self.prolong_add(y, 1.0, &mut out)?;
        Ok(out)
    }

    /// `target += scale · P y`, touching only the sampled rows.
    pub fn prolong_add(&self, y: &DMatrix<f64>, scale: f64, target: &mut DMatrix<f64>) -> Result<()> {
        if y.nrows() != self.coarse_dim() {
            return Err(invalid_input(format!("prolongation expects {} rows, got {}", self.coarse_dim(), y.nrows())));
        }
        if target.nrows() != self.source_dim || target.ncols() != y.ncols() {
            return Err(invalid_input("prolongation target has the wrong shape"));
        }
        for (row, &dst) in self.indices.iter().enumerate() {
            for col in 0..y.ncols() {
                target[(dst, col)] += scale * y[(row, col)];
            }
        }
        Ok(())
    }

    /// `‖R G‖_F`.
    pub fn restricted_norm(&self, g: &DMatrix<f64>) -> Result<f64> {
        if g.nrows() != self.source_dim {
            return Err(invalid_input("restriction row mismatch"));
        }
        let sq: f64 = self.indices.iter().map(|&i| g.row(i).norm_squared()).sum();
        Ok(sq.sqrt())
    }

    /// Coarse-step acceptance test: `‖RG‖ > ξ‖G‖` and `‖RG‖ > e` (Frobenius norms).
    pub fn guard(&self, g: &DMatrix<f64>, xi: f64, e: f64) -> Result<bool> {
        if !(xi > 0.0 && xi < self.omega().min(1.0)) {
            return Err(invalid_param(format!("guard xi must lie in (0, 1), got {xi}")));
        }
        if !(e > 0.0) {
            return Err(invalid_param(format!("guard e must be positive, got {e}")));
        }
        let coarse = self.restricted_norm(g)?;
        Ok(coarse > xi * g.norm() && coarse > e)
    }
}
