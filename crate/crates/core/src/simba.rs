//! The Simba optimizer: EMA gradients, a randomly restricted outer-product
//! preconditioner per parameter block, and the floored inverse-square-root update.
//!
//! One iteration on a block `X` (`q × d`) with accumulator `G`:
//!
//! ```text
//! G    <- β G + ∇f(X)
//! G_ℓ  <- R G                      (R samples n_ℓ of the q rows)
//! Q_ℓ  <- G_ℓ G_ℓᵀ                 (never formed when d < n_ℓ)
//! X    <- X - t · P Q_ℓ^{-1/2} G_ℓ (only the sampled rows move)
//! ```
//!
//! `Q_ℓ^{-1/2}` keeps the top `r` eigendirections, floors eigenvalues at `m`, and
//! assigns the `(r+1)`-th to everything else; see [`crate::linalg`].

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, invalid_param, Result};
use crate::linalg::{build_inverse_sqrt, randomized_truncated_eig, Preconditioner};
use crate::restriction::RestrictionOp;
use crate::verify::{theoretical_step_coarse, theoretical_step_fine};

/// One decoupled parameter tensor. Vectors are stored as `q × 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub id: String,
    pub values: DMatrix<f64>,
}

impl ParamBlock {
    pub fn new(id: impl Into<String>, values: DMatrix<f64>) -> Self {
        Self { id: id.into(), values }
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }
}

/// Accumulated gradient `G_k`; starts at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaState {
    pub accum: DMatrix<f64>,
    pub step_count: u64,
}

impl EmaState {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { accum: DMatrix::zeros(rows, cols), step_count: 0 }
    }

    pub fn for_block(block: &ParamBlock) -> Self {
        Self::zeros(block.rows(), block.cols())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StepMode {
    #[default]
    AlwaysCoarse,
    /// Fall back to a fine step whenever the coarse-step guard fails.
    Guarded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepSchedule {
    #[default]
    Constant,
    /// Cosine decay from `step_size` to `min_factor · step_size` over `total_iters`.
    Cosine { total_iters: u64, min_factor: f64 },
    /// Per-step size from the realized `(ξ, m, M, ω)` of the linear-rate analysis.
    /// Meant for `momentum = 0` runs on problems with a known Lipschitz constant.
    Theoretical { lipschitz: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub step_size: f64,
    pub momentum: f64,
    pub rank: usize,
    /// `n_ℓ = ceil(coarse_fraction · q)` per block.
    pub coarse_fraction: f64,
    /// Eigenvalue floor `m`.
    pub floor: f64,
    pub guard_xi: f64,
    pub guard_e: f64,
    pub oversample: usize,
    pub power_iters: usize,
    pub seed: u64,
    pub mode: StepMode,
    pub schedule: StepSchedule,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            step_size: 1e-2,
            momentum: 0.9,
            rank: 20,
            coarse_fraction: 0.5,
            floor: 1e-8,
            guard_xi: 0.1,
            guard_e: 1e-12,
            oversample: crate::linalg::DEFAULT_OVERSAMPLE,
            power_iters: crate::linalg::DEFAULT_POWER_ITERS,
            seed: 0,
            mode: StepMode::AlwaysCoarse,
            schedule: StepSchedule::Constant,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(invalid_param(format!("step_size must be positive, got {}", self.step_size)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid_param(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if self.rank == 0 {
            return Err(invalid_param("rank must be positive"));
        }
        if !(self.coarse_fraction > 0.0 && self.coarse_fraction <= 1.0) {
            return Err(invalid_param(format!("coarse_fraction must lie in (0, 1], got {}", self.coarse_fraction)));
        }
        if !(self.floor > 0.0 && self.floor.is_finite()) {
            return Err(invalid_param(format!("floor must be positive, got {}", self.floor)));
        }
        if !(self.guard_xi > 0.0 && self.guard_xi < 1.0) {
            return Err(invalid_param(format!("guard_xi must lie in (0, 1), got {}", self.guard_xi)));
        }
        if !(self.guard_e > 0.0) {
            return Err(invalid_param("guard_e must be positive"));
        }
        match self.schedule {
            StepSchedule::Cosine { total_iters, min_factor } => {
                if total_iters == 0 || !(0.0..=1.0).contains(&min_factor) {
                    return Err(invalid_param("cosine schedule needs total_iters > 0 and min_factor in [0, 1]"));
                }
            }
            StepSchedule::Theoretical { lipschitz } => {
                if !(lipschitz > 0.0) {
                    return Err(invalid_param("theoretical schedule needs a positive Lipschitz constant"));
                }
            }
            StepSchedule::Constant => {}
        }
        Ok(())
    }

    pub fn coarse_dim(&self, rows: usize) -> usize {
        ((self.coarse_fraction * rows as f64).ceil() as usize).clamp(1, rows.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Coarse,
    Fine,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Coarse => "coarse",
            StepKind::Fine => "fine",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub block_id: String,
    pub kind: StepKind,
    /// `‖G_k‖_F`
    pub ema_norm: f64,
    /// `‖R G_k‖_F`
    pub coarse_norm: f64,
    pub top_eigenvalue: f64,
    /// Largest floored eigenvalue of `Q_ℓ` (the step's `M`).
    pub max_floored_eigenvalue: f64,
    pub floored_count: usize,
    pub coarse_dim: usize,
    pub step_size: f64,
    pub seconds: f64,
}

pub fn ema_update(state: &mut EmaState, grad: &DMatrix<f64>, beta: f64) -> Result<()> {
    if grad.shape() != state.accum.shape() {
        return Err(invalid_input(format!(
            "gradient shape {:?} does not match accumulator {:?}",
            grad.shape(),
            state.accum.shape()
        )));
    }
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(invalid_input("gradient has non-finite entries"));
    }
    state.accum *= beta;
    state.accum += grad;
    state.step_count += 1;
    Ok(())
}

/// A computed but not yet applied step: `X <- X - t · P · direction`.
#[derive(Debug, Clone)]
pub struct PlannedStep {
    pub kind: StepKind,
    pub restriction: RestrictionOp,
    pub preconditioner: Preconditioner,
    /// `R G_k`
    pub coarse_ema: DMatrix<f64>,
    /// `Q_ℓ^{-1/2} R G_k`
    pub direction: DMatrix<f64>,
    pub ema_norm: f64,
    pub top_eigenvalue: f64,
}

impl PlannedStep {
    pub fn coarse_norm(&self) -> f64 {
        self.coarse_ema.norm()
    }

    /// `‖RG‖ / ‖G‖`, the realized guard ratio (1 for fine steps).
    pub fn realized_xi(&self) -> f64 {
        if self.ema_norm > 0.0 {
            self.coarse_norm() / self.ema_norm
        } else {
            0.0
        }
    }

    /// The full-space search direction `-P Q_ℓ^{-1/2} R G_k`.
    pub fn full_direction(&self) -> Result<DMatrix<f64>> {
        let mut d = self.restriction.prolong(&self.direction)?;
        d.neg_mut();
        Ok(d)
    }

    pub fn apply(&self, block: &mut ParamBlock, step_size: f64) -> Result<()> {
        self.restriction.prolong_add(&self.direction, -step_size, &mut block.values)
    }
}

/// Build the preconditioned direction for one block under a given restriction.
pub fn plan_step<R: Rng + ?Sized>(
    state: &EmaState,
    hp: &HyperParams,
    restriction: RestrictionOp,
    kind: StepKind,
    rng: &mut R,
) -> Result<PlannedStep> {
    let coarse_ema = restriction.restrict(&state.accum)?;
    let k = (hp.rank + 1).min(restriction.coarse_dim());
    let spectrum = randomized_truncated_eig(&coarse_ema, k, hp.oversample, hp.power_iters, rng)?;
    let preconditioner = build_inverse_sqrt(&spectrum, hp.floor)?;
    let direction = preconditioner.apply(&coarse_ema)?;
    Ok(PlannedStep {
        kind,
        restriction,
        preconditioner,
        coarse_ema,
        direction,
        ema_norm: state.accum.norm(),
        top_eigenvalue: spectrum.eigvals[0],
    })
}

/// Step size for this plan at (1-based) iteration `k`.
pub fn scheduled_step_size(hp: &HyperParams, k: u64, plan: &PlannedStep) -> Result<f64> {
    Ok(match hp.schedule {
        StepSchedule::Constant => hp.step_size,
        StepSchedule::Cosine { total_iters, min_factor } => {
            let progress = (k.saturating_sub(1)).min(total_iters) as f64 / total_iters as f64;
            let cos = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
            hp.step_size * (min_factor + (1.0 - min_factor) * cos)
        }
        StepSchedule::Theoretical { lipschitz } => {
            if plan.ema_norm == 0.0 || plan.coarse_norm() == 0.0 {
                return Ok(0.0);
            }
            let m = hp.floor;
            let big_m = plan.preconditioner.max_floored_eigenvalue();
            match plan.kind {
                StepKind::Fine => theoretical_step_fine(m, lipschitz, big_m)?,
                StepKind::Coarse => {
                    let omega = plan.restriction.omega();
                    let xi = plan.realized_xi().min(omega);
                    theoretical_step_coarse(xi, m, lipschitz, big_m, omega)?
                }
            }
        }
    })
}

fn finish<R: Rng + ?Sized>(
    block: &mut ParamBlock,
    state: &EmaState,
    hp: &HyperParams,
    restriction: RestrictionOp,
    kind: StepKind,
    rng: &mut R,
    started: Instant,
) -> Result<StepReport> {
    if state.accum.shape() != block.values.shape() {
        return Err(invalid_input(format!("EMA state does not match block `{}`", block.id)));
    }
    let plan = plan_step(state, hp, restriction, kind, rng)?;
    let step_size = scheduled_step_size(hp, state.step_count.max(1), &plan)?;
    plan.apply(block, step_size)?;
    Ok(StepReport {
        block_id: block.id.clone(),
        kind,
        ema_norm: plan.ema_norm,
        coarse_norm: plan.coarse_norm(),
        top_eigenvalue: plan.top_eigenvalue,
        max_floored_eigenvalue: plan.preconditioner.max_floored_eigenvalue(),
        floored_count: plan.preconditioner.floored_count(),
        coarse_dim: plan.restriction.coarse_dim(),
        step_size,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Blocks with `q <= r + 1` are never subsampled.
pub fn draw_restriction<R: Rng + ?Sized>(rows: usize, hp: &HyperParams, rng: &mut R) -> Result<RestrictionOp> {
    if rows <= hp.rank + 1 {
        Ok(RestrictionOp::identity(rows))
    } else {
        RestrictionOp::sample(rows, hp.coarse_dim(rows), rng)
    }
}

/// Draw `R_k` and test the guard on the current accumulator; a failed guard
/// yields the identity restriction and a fine step.
pub fn guarded_restriction<R: Rng + ?Sized>(
    state: &EmaState,
    hp: &HyperParams,
    rng: &mut R,
) -> Result<(RestrictionOp, StepKind)> {
    let rows = state.accum.nrows();
    let restriction = draw_restriction(rows, hp, rng)?;
    if restriction.guard(&state.accum, hp.guard_xi, hp.guard_e)? {
        Ok((restriction, StepKind::Coarse))
    } else {
        Ok((RestrictionOp::identity(rows), StepKind::Fine))
    }
}

/// Coarse step on a block whose EMA is already updated for this iteration.
pub fn coarse_step<R: Rng + ?Sized>(
    block: &mut ParamBlock,
    state: &EmaState,
    hp: &HyperParams,
    rng: &mut R,
) -> Result<StepReport> {
    let started = Instant::now();
    let restriction = draw_restriction(block.rows(), hp, rng)?;
    finish(block, state, hp, restriction, StepKind::Coarse, rng, started)
}

/// Fine step: the same pipeline with `R = I`.
pub fn fine_step<R: Rng + ?Sized>(
    block: &mut ParamBlock,
    state: &EmaState,
    hp: &HyperParams,
    rng: &mut R,
) -> Result<StepReport> {
    let started = Instant::now();
    let restriction = RestrictionOp::identity(block.rows());
    finish(block, state, hp, restriction, StepKind::Fine, rng, started)
}

/// One iteration over every block: EMA update, then a coarse step (or a fine
/// step when guarded and the guard fails).
pub fn step<R: Rng>(
    blocks: &mut [ParamBlock],
    states: &mut [EmaState],
    grads: &[DMatrix<f64>],
    hp: &HyperParams,
    rngs: &mut [R],
) -> Result<Vec<StepReport>> {
    if blocks.len() != states.len() || blocks.len() != grads.len() || blocks.len() != rngs.len() {
        return Err(invalid_input("blocks, states, gradients and rngs must have equal length"));
    }
    let mut reports = Vec::with_capacity(blocks.len());
    for (((block, state), grad), rng) in blocks.iter_mut().zip(states.iter_mut()).zip(grads).zip(rngs.iter_mut()) {
        ema_update(state, grad, hp.momentum)?;
        let report = match hp.mode {
            StepMode::AlwaysCoarse => coarse_step(block, state, hp, rng)?,
            StepMode::Guarded => {
                let started = Instant::now();
                let (restriction, kind) = guarded_restriction(state, hp, rng)?;
                finish(block, state, hp, restriction, kind, rng, started)?
            }
        };
        reports.push(report);
    }
    Ok(reports)
}

/// Independent RNG stream for a block, derived from the master seed and block id.
pub fn block_rng(seed: u64, block_id: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(block_id.as_bytes()));
    rng
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Stateful driver owning per-block EMA accumulators and RNG streams.
#[derive(Debug, Clone)]
pub struct Simba {
    hp: HyperParams,
    states: Vec<EmaState>,
    rngs: Vec<ChaCha8Rng>,
}

impl Simba {
    pub fn new(hp: HyperParams) -> Result<Self> {
        hp.validate()?;
        Ok(Self { hp, states: Vec::new(), rngs: Vec::new() })
    }

    pub fn hyper_params(&self) -> &HyperParams {
        &self.hp
    }

    pub fn states(&self) -> &[EmaState] {
        &self.states
    }

    pub fn step_blocks(&mut self, blocks: &mut [ParamBlock], grads: &[DMatrix<f64>]) -> Result<Vec<StepReport>> {
        if self.states.is_empty() {
            self.states = blocks.iter().map(EmaState::for_block).collect();
            self.rngs = blocks.iter().map(|b| block_rng(self.hp.seed, &b.id)).collect();
        }
        step(blocks, &mut self.states, grads, &self.hp, &mut self.rngs)
    }
}
