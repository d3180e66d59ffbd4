//! Theoretical constants of the linear-rate analysis and checks against
//! instrumented runs.
//!
//! On an `L`-smooth, `μ`-strongly convex objective, a coarse step of length
//! `ξ²m / (L √M ω⁴)` contracts the optimality gap by `ĉ = 1 − ξ⁴mμ / (ω⁴ML)`,
//! and a fine step of length `m / (L √M)` by `c = 1 − mμ / (ML)`. `M` and `ξ`
//! are not known ahead of time, so [`certify`] uses the realized maximum
//! floored eigenvalue and the realized minimum guard ratio of a run.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::RngCore;
use serde::Serialize;

use crate::error::{invalid_input, invalid_param, Result, SimbaError};
use crate::linalg::Preconditioner;
use crate::problems::{KnownConstants, Problem};
use crate::restriction::RestrictionOp;
use crate::simba::{
    block_rng, draw_restriction, ema_update, guarded_restriction, plan_step, scheduled_step_size, EmaState,
    HyperParams, ParamBlock, StepKind, StepMode, StepSchedule,
};

/// Gaps at or below this are treated as converged.
pub const GAP_FLOOR: f64 = 1e-14;
/// Slack on contraction ratios.
pub const RATIO_SLACK: f64 = 1e-12;
/// Coordinates probed per block by [`finite_diff_grad`] when a block is larger.
pub const FD_SAMPLE_COORDS: usize = 50;

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid_param(format!("{name} must be positive and finite, got {v}")))
    }
}

/// `ξ² m / (L √M ω⁴)`
pub fn theoretical_step_coarse(xi: f64, m: f64, lipschitz: f64, big_m: f64, omega: f64) -> Result<f64> {
    for (name, v) in [("xi", xi), ("m", m), ("L", lipschitz), ("M", big_m), ("omega", omega)] {
        positive(name, v)?;
    }
    if xi > omega {
        return Err(invalid_param(format!("xi = {xi} exceeds omega = {omega}")));
    }
    Ok(xi * xi * m / (lipschitz * big_m.sqrt() * omega.powi(4)))
}

/// `m / (L √M)`
pub fn theoretical_step_fine(m: f64, lipschitz: f64, big_m: f64) -> Result<f64> {
    theoretical_step_coarse(1.0, m, lipschitz, big_m, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateCertificate {
    pub mu: f64,
    pub lipschitz: f64,
    pub m: f64,
    pub big_m: f64,
    pub xi: f64,
    pub omega: f64,
    /// Coarse-step contraction `1 − ξ⁴mμ / (ω⁴ML)`.
    pub c_hat: f64,
    /// Fine-step contraction `1 − mμ / (ML)`.
    pub c: f64,
    /// Iterations to shrink `gap` below `eps` at rate `c_hat`.
    pub k_hat: f64,
    pub k: f64,
}

fn iterations_to(gap: f64, eps: f64, shrink: f64) -> f64 {
    if eps >= gap {
        return 0.0;
    }
    // log(1/c) = -ln(1 - shrink), accurate for tiny shrink
    (gap / eps).ln() / -(-shrink).ln_1p()
}

pub fn rate_constants(
    mu: f64,
    lipschitz: f64,
    m: f64,
    big_m: f64,
    xi: f64,
    omega: f64,
    gap: f64,
    eps: f64,
) -> Result<RateCertificate> {
    for (name, v) in [("mu", mu), ("L", lipschitz), ("m", m), ("M", big_m), ("xi", xi), ("omega", omega)] {
        positive(name, v)?;
    }
    positive("gap", gap)?;
    positive("eps", eps)?;
    if mu >= lipschitz {
        return Err(invalid_param(format!("need mu < L, got mu={mu}, L={lipschitz}")));
    }
    if m > big_m {
        return Err(invalid_param(format!("need m <= M, got m={m}, M={big_m}")));
    }
    if xi > omega {
        return Err(invalid_param(format!("need xi <= omega, got xi={xi}, omega={omega}")));
    }
    let fine_shrink = m * mu / (big_m * lipschitz);
    let coarse_shrink = (xi / omega).powi(4) * fine_shrink;
    Ok(RateCertificate {
        mu,
        lipschitz,
        m,
        big_m,
        xi,
        omega,
        c_hat: 1.0 - coarse_shrink,
        c: 1.0 - fine_shrink,
        k_hat: iterations_to(gap, eps, coarse_shrink),
        k: iterations_to(gap, eps, fine_shrink),
    })
}

/// `sqrt(⟨R g, Q_ℓ^{-1/2} R g⟩)`, after confirming it equals `−⟨g, d̂⟩` for the
/// full direction `d̂ = −P Q_ℓ^{-1/2} R g`.
pub fn lambda_hat(grad: &DMatrix<f64>, restriction: &RestrictionOp, precond: &Preconditioner) -> Result<f64> {
    let coarse = restriction.restrict(grad)?;
    let scaled = precond.apply(&coarse)?;
    let quad = coarse.dot(&scaled);
    let inner = restriction.prolong(&scaled)?.dot(grad);
    if (quad - inner).abs() > 1e-10 * quad.abs().max(1.0) {
        return Err(SimbaError::NumericalConsistency(format!(
            "quadratic form {quad} differs from -<grad, d> = {inner}"
        )));
    }
    if quad < -1e-12 {
        return Err(SimbaError::NumericalConsistency(format!("negative quadratic form {quad}")));
    }
    Ok(quad.max(0.0).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    /// `(k, (f_{k+1} − f*) / (f_k − f*))` for every `k` with a gap above [`GAP_FLOOR`].
    pub ratios: Vec<(usize, f64)>,
    pub worst_ratio: f64,
    /// Iterations whose ratio exceeds the allowed factor.
    pub violations: Vec<usize>,
    /// Least-squares slope of `ln(f_k − f*)` against `k`.
    pub log_slope: Option<f64>,
}

impl ContractionReport {
    pub fn violation_count(&self) -> usize {
        self.violations.len()
    }
}

pub fn check_contraction(trace: &[f64], f_star: f64, factor: f64) -> Result<ContractionReport> {
    let factors = vec![factor; trace.len().saturating_sub(1)];
    check_contraction_per_step(trace, f_star, &factors)
}

/// As [`check_contraction`] with a separate factor for each transition `k -> k+1`.
pub fn check_contraction_per_step(trace: &[f64], f_star: f64, factors: &[f64]) -> Result<ContractionReport> {
    if trace.len() < 2 {
        return Err(invalid_input("contraction check needs at least two values"));
    }
    if factors.len() != trace.len() - 1 {
        return Err(invalid_input(format!("{} factors for {} transitions", factors.len(), trace.len() - 1)));
    }
    let gaps: Vec<f64> = trace.iter().map(|f| f - f_star).collect();
    let mut ratios = Vec::new();
    let mut violations = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for k in 0..factors.len() {
        if gaps[k] <= GAP_FLOOR {
            continue;
        }
        let ratio = gaps[k + 1] / gaps[k];
        worst = worst.max(ratio);
        if ratio > factors[k] + RATIO_SLACK {
            violations.push(k);
        }
        ratios.push((k, ratio));
    }
    let points: Vec<(f64, f64)> =
        gaps.iter().enumerate().filter(|(_, g)| **g > GAP_FLOOR).map(|(k, g)| (k as f64, g.ln())).collect();
    Ok(ContractionReport { ratios, worst_ratio: worst, violations, log_slope: slope(&points) })
}

fn slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Central differences of `f` around `params`. Each block is probed at all of
/// its coordinates, or at `FD_SAMPLE_COORDS` random ones when larger. Returns
/// `(linear index, estimate)` pairs per block.
pub fn finite_diff_grad<F>(
    mut f: F,
    params: &[ParamBlock],
    h: f64,
    rng: &mut dyn RngCore,
) -> Result<Vec<Vec<(usize, f64)>>>
where
    F: FnMut(&[ParamBlock]) -> Result<f64>,
{
    positive("h", h)?;
    let mut work = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for b in 0..params.len() {
        let len = params[b].values.len();
        let mut coords: Vec<usize> =
            if len > FD_SAMPLE_COORDS { sample(rng, len, FD_SAMPLE_COORDS).into_vec() } else { (0..len).collect() };
        coords.sort_unstable();
        let mut est = Vec::with_capacity(coords.len());
        for i in coords {
            let x = params[b].values[i];
            work[b].values[i] = x + h;
            let plus = f(&work)?;
            work[b].values[i] = x - h;
            let minus = f(&work)?;
            work[b].values[i] = x;
            est.push((i, (plus - minus) / (2.0 * h)));
        }
        out.push(est);
    }
    Ok(out)
}

/// Worst per-block relative error `‖g − ĝ‖ / max(‖g‖, ‖ĝ‖)` between the
/// analytic gradient and central differences over the probed coordinates.
pub fn gradient_check(
    problem: &dyn Problem,
    params: &[ParamBlock],
    batch: Option<&[usize]>,
    h: f64,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let (_, grads) = problem.loss_and_grad(params, batch)?;
    let estimate = finite_diff_grad(|p| problem.loss(p, batch), params, h, rng)?;
    let mut worst: f64 = 0.0;
    for (g, est) in grads.iter().zip(&estimate) {
        let (mut diff, mut analytic, mut numeric) = (0.0, 0.0, 0.0);
        for &(i, e) in est {
            diff += (g[i] - e).powi(2);
            analytic += g[i] * g[i];
            numeric += e * e;
        }
        let scale = f64::max(analytic, numeric).sqrt();
        worst = worst.max(if scale > 0.0 { diff.sqrt() / scale } else { 0.0 });
    }
    Ok(worst)
}

/// One step of an instrumented run, with everything the rate analysis needs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstrumentedStep {
    pub kind: StepKind,
    pub grad_norm: f64,
    /// Realized `‖R∇f‖ / ‖∇f‖`.
    pub xi: f64,
    /// Largest floored eigenvalue of this step's `Q_ℓ`.
    pub big_m: f64,
    pub step_size: f64,
    pub lambda_hat: f64,
    pub direction_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstrumentedRun {
    /// `f(x_0), ..., f(x_N)`
    pub losses: Vec<f64>,
    pub steps: Vec<InstrumentedStep>,
    pub floor: f64,
    pub omega: f64,
}

/// Run Simba with `β = 0` and the theoretical step size on a single-block
/// problem with full gradients, recording per-step quantities.
pub fn instrumented_run(
    problem: &dyn Problem,
    x0: ParamBlock,
    hp: &HyperParams,
    lipschitz: f64,
    iters: usize,
) -> Result<InstrumentedRun> {
    if problem.block_shapes().len() != 1 {
        return Err(SimbaError::Unsupported("instrumented runs need a single-block problem".into()));
    }
    if hp.momentum != 0.0 {
        return Err(invalid_param("instrumented runs need momentum = 0"));
    }
    let hp = HyperParams { schedule: StepSchedule::Theoretical { lipschitz }, ..hp.clone() };
    hp.validate()?;
    let mut rng = block_rng(hp.seed, &x0.id);
    let mut state = EmaState::for_block(&x0);
    let mut blocks = [x0];
    let (mut loss, mut grads) = problem.loss_and_grad(&blocks, None)?;
    let mut losses = vec![loss];
    let mut steps = Vec::with_capacity(iters);
    let mut omega: f64 = 1.0;
    for _ in 0..iters {
        let grad = &grads[0];
        ema_update(&mut state, grad, 0.0)?;
        let (restriction, kind) = match hp.mode {
            StepMode::Guarded => guarded_restriction(&state, &hp, &mut rng)?,
            StepMode::AlwaysCoarse => (draw_restriction(grad.nrows(), &hp, &mut rng)?, StepKind::Coarse),
        };
        omega = omega.max(restriction.omega());
        let plan = plan_step(&state, &hp, restriction, kind, &mut rng)?;
        let step_size = scheduled_step_size(&hp, state.step_count, &plan)?;
        let lam = lambda_hat(grad, &plan.restriction, &plan.preconditioner)?;
        let direction_norm = plan.direction.norm();
        steps.push(InstrumentedStep {
            kind,
            grad_norm: grad.norm(),
            xi: plan.realized_xi(),
            big_m: plan.preconditioner.max_floored_eigenvalue(),
            step_size,
            lambda_hat: lam,
            direction_norm,
        });
        plan.apply(&mut blocks[0], step_size)?;
        (loss, grads) = problem.loss_and_grad(&blocks, None)?;
        losses.push(loss);
    }
    Ok(InstrumentedRun { losses, steps, floor: hp.floor, omega })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub rate: RateCertificate,
    /// Transitions checked against `ĉ` (coarse) or `c` (fine).
    pub contraction: ContractionReport,
    pub coarse_steps: usize,
    pub fine_steps: usize,
    /// First `k` with `f_k − f* ≤ eps`.
    pub reached_at: Option<usize>,
    pub eps: f64,
    /// Reached within `ceil(K̂)` iterations, or not reached and `K̂` beyond the budget.
    pub iteration_bound_holds: bool,
    /// Steps breaking `‖d̂‖ ≤ (ω²/√m)‖∇f‖`.
    pub direction_bound_violations: usize,
    /// Coarse steps breaking `λ̂² ≥ (ξ²/√M)‖∇f‖²`.
    pub lambda_bound_violations: usize,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.contraction.violations.is_empty()
            && self.iteration_bound_holds
            && self.direction_bound_violations == 0
            && self.lambda_bound_violations == 0
    }
}

/// A-posteriori certificate for an instrumented run: `M` is the largest floored
/// eigenvalue seen and `ξ` the smallest coarse-step guard ratio.
pub fn certify(run: &InstrumentedRun, known: KnownConstants, eps_fraction: f64) -> Result<Certificate> {
    if run.steps.is_empty() {
        return Err(invalid_input("run has no steps"));
    }
    positive("eps_fraction", eps_fraction)?;
    let coarse: Vec<&InstrumentedStep> = run.steps.iter().filter(|s| s.kind == StepKind::Coarse).collect();
    let xi = coarse.iter().map(|s| s.xi).fold(run.omega, f64::min);
    if !(xi > 0.0) {
        return Err(SimbaError::NumericalConsistency("a coarse step had a zero restricted gradient".into()));
    }
    let big_m = run.steps.iter().map(|s| s.big_m).fold(run.floor, f64::max);
    let gap0 = run.losses[0] - known.f_star;
    let eps = eps_fraction * gap0;
    let rate = rate_constants(known.mu, known.lipschitz, run.floor, big_m, xi, run.omega, gap0, eps)?;
    let factors: Vec<f64> = run
        .steps
        .iter()
        .map(|s| match s.kind {
            StepKind::Coarse => rate.c_hat,
            StepKind::Fine => rate.c,
        })
        .collect();
    let contraction = check_contraction_per_step(&run.losses, known.f_star, &factors)?;
    let reached_at = run.losses.iter().position(|f| f - known.f_star <= eps);
    let iteration_bound_holds = match reached_at {
        Some(k) => k as f64 <= rate.k_hat.ceil(),
        None => rate.k_hat >= run.steps.len() as f64,
    };
    let dir_factor = run.omega.powi(2) / run.floor.sqrt();
    let direction_bound_violations =
        run.steps.iter().filter(|s| s.direction_norm > dir_factor * s.grad_norm * (1.0 + 1e-10)).count();
    let lambda_bound_violations = coarse
        .iter()
        .filter(|s| s.lambda_hat.powi(2) < (s.xi.powi(2) / s.big_m.sqrt()) * s.grad_norm.powi(2) * (1.0 - 1e-10))
        .count();
    Ok(Certificate {
        rate,
        contraction,
        coarse_steps: coarse.len(),
        fine_steps: run.steps.len() - coarse.len(),
        reached_at,
        eps,
        iteration_bound_holds,
        direction_bound_violations,
        lambda_bound_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{build_inverse_sqrt, randomized_truncated_eig};
    use crate::problems::{Dataset, NllsProblem, QuadraticProblem};
    use crate::testutil::{gaussian, rng};
    use rand::Rng;

    #[test]
    fn step_sizes() {
        assert_eq!(theoretical_step_coarse(1.0, 1.0, 1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(theoretical_step_coarse(1.0, 1.0, 2.0, 4.0, 1.0).unwrap(), 0.25);
        let a = theoretical_step_coarse(0.5, 0.3, 2.0, 4.0, 1.0).unwrap();
        let b = theoretical_step_coarse(0.5, 0.15, 2.0, 4.0, 1.0).unwrap();
        assert!((a - 2.0 * b).abs() < 1e-15);
        assert_eq!(theoretical_step_fine(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(theoretical_step_fine(1.0, 2.0, 4.0).unwrap(), 0.25);
        assert_eq!(
            theoretical_step_fine(0.3, 7.0, 5.0).unwrap(),
            theoretical_step_coarse(1.0, 0.3, 7.0, 5.0, 1.0).unwrap()
        );
        assert!(theoretical_step_coarse(0.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(theoretical_step_coarse(1.0, 1.0, -1.0, 1.0, 1.0).is_err());
        assert!(theoretical_step_coarse(1.5, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(theoretical_step_fine(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn rate_constant_examples() {
        let r = rate_constants(1.0, 2.0, 1.0, 2.0, 0.7, 0.7, 10.0, 1.0).unwrap();
        assert!((r.c_hat - 0.75).abs() < 1e-15);
        assert!((r.c - 0.75).abs() < 1e-15);
        let r = rate_constants(1.0, 2.0, 1.0, 2.0, 1.0, 1.0, 3.0, 3.0).unwrap();
        assert_eq!(r.k_hat, 0.0);
        assert_eq!(r.k, 0.0);
        let r = rate_constants(1.0, 2.0, 1.0, 2.0, 1.0, 1.0, 1.0, 0.75f64.powi(5)).unwrap();
        assert!((r.k_hat - 5.0).abs() < 1e-9);
        assert!(rate_constants(2.0, 2.0, 1.0, 2.0, 1.0, 1.0, 1.0, 0.1).is_err());
        assert!(rate_constants(1.0, 2.0, 3.0, 2.0, 1.0, 1.0, 1.0, 0.1).is_err());
        assert!(rate_constants(1.0, 2.0, 1.0, 2.0, 1.1, 1.0, 1.0, 0.1).is_err());
        assert!(rate_constants(1.0, 2.0, 1.0, 2.0, 1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn coarse_rate_is_never_faster_than_fine() {
        let mut r = rng(17);
        for _ in 0..2000 {
            let lipschitz = r.random_range(1.0..100.0);
            let mu = lipschitz * r.random_range(0.001..0.999);
            let big_m = r.random_range(1e-3..1e3);
            let m = big_m * r.random_range(1e-4..=1.0);
            let omega = r.random_range(0.5..2.0);
            let xi = omega * r.random_range(0.01..=1.0);
            let rc = rate_constants(mu, lipschitz, m, big_m, xi, omega, 1.0, 1e-3).unwrap();
            assert!(0.0 < rc.c_hat && rc.c_hat < 1.0);
            assert!(0.0 < rc.c && rc.c < 1.0);
            assert!(rc.c <= rc.c_hat);
            assert!(rc.k <= rc.k_hat);
        }
    }

    #[test]
    fn rate_monotonicity() {
        let base = [1.0, 10.0, 0.5, 2.0, 0.6, 1.0];
        let c_hat = |a: [f64; 6]| rate_constants(a[0], a[1], a[2], a[3], a[4], a[5], 1.0, 0.1).unwrap().c_hat;
        let c0 = c_hat(base);
        // (index, direction): +1 means c_hat grows with the argument
        for (i, dir) in [(0, -1.0), (1, 1.0), (2, -1.0), (3, 1.0), (4, -1.0), (5, 1.0)] {
            let mut up = base;
            up[i] *= 1.01;
            assert!((c_hat(up) - c0) * dir > 0.0, "argument {i}");
        }
    }

    #[test]
    fn k_hat_grows_as_eps_shrinks() {
        let ks: Vec<f64> = [1e-1, 1e-3, 1e-6, 1e-9]
            .iter()
            .map(|&e| rate_constants(1.0, 10.0, 1.0, 4.0, 0.5, 1.0, 1.0, e).unwrap().k_hat)
            .collect();
        assert!(ks.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn contraction_examples() {
        let trace: Vec<f64> = (0..20).map(|k| 0.5f64.powi(k)).collect();
        let ok = check_contraction(&trace, 0.0, 0.5).unwrap();
        assert_eq!(ok.violation_count(), 0);
        assert!((ok.worst_ratio - 0.5).abs() < 1e-15);
        assert!((ok.log_slope.unwrap() - 0.5f64.ln()).abs() < 1e-12);
        let bad = check_contraction(&trace, 0.0, 0.4).unwrap();
        assert_eq!(bad.violation_count(), 19);
        assert!(check_contraction(&[1.0], 0.0, 0.5).is_err());
        // converged tail is ignored
        let flat = check_contraction(&[1.0, 1e-15, 1e-15, 1e-15], 0.0, 0.5).unwrap();
        assert_eq!(flat.ratios.len(), 1);
        assert_eq!(flat.violation_count(), 0);
    }

    #[test]
    fn lambda_hat_cases() {
        let mut r = rng(5);
        let restriction = RestrictionOp::identity(6);
        let precond = Preconditioner::scaled_identity(6, 1.0).unwrap();
        assert_eq!(lambda_hat(&DMatrix::zeros(6, 1), &restriction, &precond).unwrap(), 0.0);
        let g = gaussian(6, 1, &mut r);
        assert!((lambda_hat(&g, &restriction, &precond).unwrap() - g.norm()).abs() < 1e-12);
    }

    #[test]
    fn lambda_hat_lower_bound_under_guard() {
        let mut r = rng(8);
        let (xi, m) = (0.3, 1e-6);
        let mut checked = 0;
        for _ in 0..200 {
            let g = gaussian(40, 3, &mut r);
            let restriction = RestrictionOp::sample(40, 12, &mut r).unwrap();
            if !restriction.guard(&g, xi, 1e-12).unwrap() {
                continue;
            }
            let coarse = restriction.restrict(&g).unwrap();
            let spec = randomized_truncated_eig(&coarse, 4, 10, 2, &mut r).unwrap();
            let precond = build_inverse_sqrt(&spec, m).unwrap();
            let big_m = precond.max_floored_eigenvalue();
            let lam = lambda_hat(&g, &restriction, &precond).unwrap();
            assert!(lam * lam >= xi * xi / big_m.sqrt() * g.norm_squared() * (1.0 - 1e-12));
            checked += 1;
        }
        assert!(checked > 50);
    }

    #[test]
    fn finite_differences_on_simple_functions() {
        let half_sq = |p: &[ParamBlock]| Ok(0.5 * p[0].values.norm_squared());
        let mut e1 = DMatrix::zeros(4, 1);
        e1[(0, 0)] = 1.0;
        let est = finite_diff_grad(half_sq, &[ParamBlock::new("x", e1.clone())], 1e-5, &mut rng(0)).unwrap();
        for &(i, v) in &est[0] {
            assert!((v - e1[i]).abs() < 1e-8);
        }
        let linear = |p: &[ParamBlock]| Ok(3.0 * p[0].values[0] - 2.0 * p[0].values[1]);
        let est = finite_diff_grad(linear, &[ParamBlock::new("x", DMatrix::zeros(2, 1))], 0.5, &mut rng(0)).unwrap();
        assert_eq!(est[0], vec![(0, 3.0), (1, -2.0)]);
        let big = ParamBlock::new("x", DMatrix::zeros(200, 1));
        let est = finite_diff_grad(half_sq, &[big], 1e-5, &mut rng(1)).unwrap();
        assert_eq!(est[0].len(), FD_SAMPLE_COORDS);
        assert!(finite_diff_grad(half_sq, &[], 0.0, &mut rng(0)).is_err());
    }

    #[test]
    fn nlls_gradient_matches_differences() {
        let mut r = rng(12);
        for _ in 0..5 {
            let features = gaussian(30, 8, &mut r);
            let labels = (0..30).map(|_| (r.random::<bool>()) as u8 as f64).collect();
            let p = NllsProblem::new(&Dataset::new(features, labels).unwrap()).unwrap();
            let x = vec![ParamBlock::new("x", gaussian(8, 1, &mut r))];
            assert!(gradient_check(&p, &x, None, 1e-5, &mut r).unwrap() < 1e-5);
        }
    }

    #[test]
    fn instrumented_quadratic_certifies() {
        let q = QuadraticProblem::new(30, 1.0, 20.0, 4).unwrap();
        let hp = HyperParams {
            momentum: 0.0,
            rank: 3,
            coarse_fraction: 0.5,
            floor: 1.0,
            guard_xi: 0.3,
            mode: StepMode::Guarded,
            seed: 2,
            ..Default::default()
        };
        let x0 = ParamBlock::new("x", DMatrix::zeros(30, 1));
        let run = instrumented_run(&q, x0, &hp, 20.0, 200).unwrap();
        let cert = certify(&run, q.constants().unwrap(), 1e-6).unwrap();
        assert!(cert.holds(), "{cert:?}");
        assert!(run.losses.last().unwrap() < &run.losses[0]);
        assert_eq!(cert.coarse_steps + cert.fine_steps, 200);
    }

    #[test]
    fn instrumented_run_preconditions() {
        let q = QuadraticProblem::new(5, 1.0, 2.0, 0).unwrap();
        let x0 = ParamBlock::new("x", DMatrix::zeros(5, 1));
        assert!(instrumented_run(&q, x0, &HyperParams::default(), 2.0, 3).is_err());
    }
}
