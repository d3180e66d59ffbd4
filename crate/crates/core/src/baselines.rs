//! Reference optimizers: Adam (bias-corrected) and SGD with heavy-ball momentum.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, invalid_param, Result};
use crate::simba::ParamBlock;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: DMatrix<f64>,
    pub second: DMatrix<f64>,
    pub step_count: u64,
}

impl AdamState {
    pub fn for_block(block: &ParamBlock) -> Self {
        let (r, c) = block.values.shape();
        Self { first: DMatrix::zeros(r, c), second: DMatrix::zeros(r, c), step_count: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    pub velocity: DMatrix<f64>,
}

impl MomentumState {
    pub fn for_block(block: &ParamBlock) -> Self {
        let (r, c) = block.values.shape();
        Self { velocity: DMatrix::zeros(r, c) }
    }
}

fn check_grad(values: &DMatrix<f64>, grad: &DMatrix<f64>) -> Result<()> {
    if values.shape() != grad.shape() {
        return Err(invalid_input(format!(
            "gradient shape {:?} does not match block {:?}",
            grad.shape(),
            values.shape()
        )));
    }
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(invalid_input("gradient has non-finite entries"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamParams {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self { step_size: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0)
            || !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || !(self.eps > 0.0)
        {
            return Err(invalid_param(format!("invalid Adam parameters {self:?}")));
        }
        Ok(())
    }
}

pub fn adam_step(
    block: &mut ParamBlock,
    state: &mut AdamState,
    grad: &DMatrix<f64>,
    params: &AdamParams,
) -> Result<()> {
    check_grad(&block.values, grad)?;
    let AdamParams { step_size, beta1, beta2, eps } = *params;
    state.step_count += 1;
    let t = state.step_count as i32;
    let bias1 = 1.0 - beta1.powi(t);
    let bias2 = 1.0 - beta2.powi(t);
    for ((x, m), (v, &g)) in
        block.values.iter_mut().zip(state.first.iter_mut()).zip(state.second.iter_mut().zip(grad.iter()))
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *x -= step_size * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdParams {
    pub step_size: f64,
    pub momentum: f64,
}

impl Default for SgdParams {
    fn default() -> Self {
        Self { step_size: 1e-2, momentum: 0.9 }
    }
}

impl SgdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid_param(format!("invalid SGD parameters {self:?}")));
        }
        Ok(())
    }
}

/// `v <- μ v + g; x <- x - lr v`
pub fn sgd_momentum_step(
    block: &mut ParamBlock,
    state: &mut MomentumState,
    grad: &DMatrix<f64>,
    params: &SgdParams,
) -> Result<()> {
    check_grad(&block.values, grad)?;
    state.velocity *= params.momentum;
    state.velocity += grad;
    block.values -= &state.velocity * params.step_size;
    Ok(())
}
