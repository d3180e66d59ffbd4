//! Optimizers behind a common trait, looked up by name at runtime.
//!
//! ```
//! use simba_core::optim::OptimizerRegistry;
//!
//! let registry = OptimizerRegistry::with_builtins();
//! let params = serde_json::json!({ "step_size": 0.05, "rank": 10 });
//! let opt = registry.build("simba", &params, 7).unwrap();
//! assert_eq!(opt.name(), "simba");
//! ```

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::baselines::{adam_step, sgd_momentum_step, AdamParams, AdamState, MomentumState, SgdParams};
use crate::error::{invalid_input, invalid_param, Result, SimbaError};
use crate::simba::{HyperParams, ParamBlock, Simba, StepKind, StepReport};

pub trait Optimizer: Send {
    fn name(&self) -> &str;

    /// Apply one update given one gradient per block. Simba returns a report per
    /// block; the baselines return none.
    fn step(&mut self, blocks: &mut [ParamBlock], grads: &[DMatrix<f64>]) -> Result<Vec<StepReport>>;
}

/// `"coarse"`, `"fine"`, `"mixed"`, or `"none"` when the optimizer has no step kinds.
pub fn summarize_kinds(reports: &[StepReport]) -> &'static str {
    let coarse = reports.iter().filter(|r| r.kind == StepKind::Coarse).count();
    match (reports.len(), coarse) {
        (0, _) => "none",
        (n, c) if c == n => StepKind::Coarse.as_str(),
        (_, 0) => StepKind::Fine.as_str(),
        _ => "mixed",
    }
}

fn check_lengths(blocks: &[ParamBlock], grads: &[DMatrix<f64>]) -> Result<()> {
    if blocks.len() != grads.len() {
        return Err(invalid_input(format!("{} blocks but {} gradients", blocks.len(), grads.len())));
    }
    Ok(())
}

impl Optimizer for Simba {
    fn name(&self) -> &str {
        "simba"
    }

    fn step(&mut self, blocks: &mut [ParamBlock], grads: &[DMatrix<f64>]) -> Result<Vec<StepReport>> {
        check_lengths(blocks, grads)?;
        self.step_blocks(blocks, grads)
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    params: AdamParams,
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(params: AdamParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, states: Vec::new() })
    }
}

impl Optimizer for Adam {
    fn name(&self) -> &str {
        "adam"
    }

    fn step(&mut self, blocks: &mut [ParamBlock], grads: &[DMatrix<f64>]) -> Result<Vec<StepReport>> {
        check_lengths(blocks, grads)?;
        if self.states.is_empty() {
            self.states = blocks.iter().map(AdamState::for_block).collect();
        }
        for ((block, state), grad) in blocks.iter_mut().zip(&mut self.states).zip(grads) {
            adam_step(block, state, grad, &self.params)?;
        }
        Ok(Vec::new())
    }
}

#[derive(Debug, Clone)]
pub struct SgdMomentum {
    params: SgdParams,
    states: Vec<MomentumState>,
}

impl SgdMomentum {
    pub fn new(params: SgdParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, states: Vec::new() })
    }
}

impl Optimizer for SgdMomentum {
    fn name(&self) -> &str {
        "sgd-momentum"
    }

    fn step(&mut self, blocks: &mut [ParamBlock], grads: &[DMatrix<f64>]) -> Result<Vec<StepReport>> {
        check_lengths(blocks, grads)?;
        if self.states.is_empty() {
            self.states = blocks.iter().map(MomentumState::for_block).collect();
        }
        for ((block, state), grad) in blocks.iter_mut().zip(&mut self.states).zip(grads) {
            sgd_momentum_step(block, state, grad, &self.params)?;
        }
        Ok(Vec::new())
    }
}

/// Builds an optimizer from free-form parameters and a run seed.
pub type OptimizerFactory = fn(&Value, u64) -> Result<Box<dyn Optimizer>>;

fn parse<T: DeserializeOwned>(params: &Value) -> Result<T> {
    let params = if params.is_null() { Value::Object(Default::default()) } else { params.clone() };
    serde_json::from_value(params).map_err(|e| invalid_param(e.to_string()))
}

fn build_simba(params: &Value, seed: u64) -> Result<Box<dyn Optimizer>> {
    let mut hp: HyperParams = parse(params)?;
    // the run seed only applies when the config leaves `seed` unset
    if params.get("seed").is_none() {
        hp.seed = seed;
    }
    Ok(Box::new(Simba::new(hp)?))
}

fn build_adam(params: &Value, _seed: u64) -> Result<Box<dyn Optimizer>> {
    Ok(Box::new(Adam::new(parse(params)?)?))
}

fn build_sgd(params: &Value, _seed: u64) -> Result<Box<dyn Optimizer>> {
    Ok(Box::new(SgdMomentum::new(parse(params)?)?))
}

#[derive(Clone)]
pub struct OptimizerRegistry {
    factories: BTreeMap<String, OptimizerFactory>,
}

impl OptimizerRegistry {
    pub fn empty() -> Self {
        Self { factories: BTreeMap::new() }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register("simba", build_simba);
        reg.register("adam", build_adam);
        reg.register("sgd-momentum", build_sgd);
        reg.register("sgd", build_sgd);
        reg
    }

    pub fn register(&mut self, name: &str, factory: OptimizerFactory) {
        self.factories.insert(name.to_owned(), factory);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, params: &Value, seed: u64) -> Result<Box<dyn Optimizer>> {
        let factory = self.factories.get(name).ok_or_else(|| SimbaError::UnknownOptimizer(name.to_owned()))?;
        factory(params, seed)
    }
}

impl Default for OptimizerRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn builtins_are_registered() {
        let reg = OptimizerRegistry::with_builtins();
        let names: Vec<_> = reg.names().collect();
        assert_eq!(names, vec!["adam", "sgd", "sgd-momentum", "simba"]);
        for n in names {
            assert!(reg.build(n, &Value::Null, 0).is_ok());
        }
    }

    #[test]
    fn unknown_name_and_bad_params() {
        let reg = OptimizerRegistry::with_builtins();
        assert!(matches!(reg.build("lbfgs", &Value::Null, 0), Err(SimbaError::UnknownOptimizer(_))));
        assert!(reg.build("adam", &json!({ "step_size": -1.0 }), 0).is_err());
        assert!(reg.build("simba", &json!({ "not_a_field": 1 }), 0).is_err());
    }

    #[test]
    fn every_optimizer_is_a_no_op_on_zero_gradients() {
        let reg = OptimizerRegistry::with_builtins();
        for name in ["simba", "adam", "sgd-momentum"] {
            let mut opt = reg.build(name, &Value::Null, 3).unwrap();
            let x0 = DMatrix::from_fn(30, 2, |i, j| (i * 2 + j) as f64);
            let mut blocks = vec![ParamBlock::new("w", x0.clone())];
            for _ in 0..5 {
                opt.step(&mut blocks, &[DMatrix::zeros(30, 2)]).unwrap();
            }
            assert_eq!(blocks[0].values, x0, "{name}");
        }
    }

    #[test]
    fn kind_summary() {
        assert_eq!(summarize_kinds(&[]), "none");
    }
}
