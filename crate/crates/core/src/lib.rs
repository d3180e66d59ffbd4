//! Simba: a multilevel preconditioned gradient method with randomized
//! row-sampling restrictions, plus reference optimizers, benchmark problems,
//! and checks of its linear-rate guarantees.

pub mod baselines;
pub mod error;
pub mod linalg;
pub mod optim;
pub mod problems;
pub mod restriction;
pub mod simba;
pub mod verify;

#[cfg(test)]
mod testutil;

pub use error::{Result, SimbaError};
pub use linalg::{Preconditioner, SymMatrix, TruncatedSpectrum};
pub use optim::{Optimizer, OptimizerRegistry};
pub use problems::{Dataset, Problem};
pub use restriction::RestrictionOp;
pub use simba::{HyperParams, ParamBlock, Simba, StepKind, StepMode, StepReport};
