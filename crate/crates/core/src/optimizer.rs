//! The co-generation loop: maximize the material of both solids subject to
//! zero collision and a volume-ratio constraint, over the initially
//! colliding subdomains only.
//!
//! The constrained problem
//!
//! ```text
//! maximize   v1 + v2
//! subject to g21 = 0,  g12 = 0,  h = gamma*v1 - (1-gamma)*v2 = 0
//! ```
//!
//! is driven by an augmented Lagrangian
//! `Phi = -(v1+v2) + l1*g21 + l2*g12 + l3*h + (c/2)(g21^2 + g12^2 + h^2)`
//! minimized by projected gradient steps with move limits and backtracking,
//! with first-order multiplier updates each iteration and periodic penalty
//! growth. The collision measures are bilinear, so all gradients are exact.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crate::collision::{local_field, partition, PartitionMasks};
use crate::correlation::CorrelationMatrix;
use crate::error::{CogenError, Result};
use crate::geometry::{mask_measure, DensityField};

/// Hyper-parameters of the co-generation loop. Optional fields default to
/// scale-aware values resolved against the scene at the start of a run (see
/// [`ResolvedParams`]).
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Volume-ratio knob in `[0, 1]`: enforces
    /// `gamma * v1 = (1 - gamma) * v2`. 0 and 1 reproduce the one-way
    /// unsweeps.
    pub gamma: f64,
    /// Iteration cap `l`.
    pub max_iters: usize,
    /// Convergence threshold on the per-iteration volume change
    /// (d-measure units). Default `1e-4 * measure(domain 1)`.
    pub delta_tol: Option<f64>,
    /// Per-iteration density move limit `m` in `(0, 1]`.
    pub move_limit: f64,
    /// Initial gradient step. Default `1 / max(eps^d * max column sum)` of
    /// the restricted matrices.
    pub step: Option<f64>,
    /// Initial penalty weight `c0`. Default `10 / eps1^d`.
    pub penalty_init: Option<f64>,
    /// Penalty growth factor `kappa > 1`.
    pub penalty_growth: f64,
    /// Penalty cap as a multiple of `c0`.
    pub penalty_max_factor: f64,
    /// Penalty grows every this many iterations.
    pub outer_interval: usize,
    /// Initial multipliers `(l1, l2, l3)`.
    pub multiplier_init: [f64; 3],
    /// Reporting tolerance on the final collision measures.
    /// Default `1e-6 * measure(domain 1)`.
    pub collision_tol: Option<f64>,
    /// Reporting tolerance on the ratio residual `h`.
    /// Default 2% of the initial combined hat measure.
    pub ratio_tol: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            max_iters: 200,
            delta_tol: None,
            move_limit: 0.2,
            step: None,
            penalty_init: None,
            penalty_growth: 2.0,
            penalty_max_factor: 1e6,
            outer_interval: 10,
            multiplier_init: [0.0; 3],
            collision_tol: None,
            ratio_tol: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(CogenError::Config(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        if self.max_iters == 0 {
            return Err(CogenError::Config("max_iters must be at least 1".into()));
        }
        if !(self.move_limit > 0.0 && self.move_limit <= 1.0) {
            return Err(CogenError::Config(format!(
                "move limit must lie in (0, 1], got {}",
                self.move_limit
            )));
        }
        if !(self.penalty_growth > 1.0) {
            return Err(CogenError::Config(format!(
                "penalty growth must exceed 1, got {}",
                self.penalty_growth
            )));
        }
        if self.outer_interval == 0 {
            return Err(CogenError::Config("outer interval must be at least 1".into()));
        }
        if let Some(c0) = self.penalty_init {
            if !(c0 > 0.0) {
                return Err(CogenError::Config(format!("penalty_init must be positive, got {c0}")));
            }
        }
        if let Some(eta) = self.step {
            if !(eta > 0.0) {
                return Err(CogenError::Config(format!("step must be positive, got {eta}")));
            }
        }
        Ok(())
    }
}

/// Defaults materialized for a specific run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedParams {
    pub step: f64,
    pub penalty_init: f64,
    pub delta_tol: f64,
    pub collision_tol: f64,
    pub ratio_tol: f64,
}

/// One row of the convergence history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// Hat-subdomain measure of body 1.
    pub v1: f64,
    /// Hat-subdomain measure of body 2.
    pub v2: f64,
    pub g21: f64,
    pub g12: f64,
    /// Ratio residual `gamma*v1 - (1-gamma)*v2`.
    pub h: f64,
    /// Volume change `eps^d * sum |rho_new - rho_old|` over both bodies.
    pub delta: f64,
    /// Backtracking exhausted its budget; densities kept unchanged.
    pub stalled: bool,
}

/// Cooperative cancellation signal, checked once per iteration.
#[derive(Clone, Debug, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::Relaxed)
    }
}

/// Outcome of a co-generation run.
#[derive(Debug, Clone)]
pub struct CoGenResult {
    /// Final continuous densities (tilde cells bit-identical to the input).
    pub rho1: DensityField,
    pub rho2: DensityField,
    /// Thresholded occupancy masks after feasibility repair.
    pub mask1: Vec<bool>,
    pub mask2: Vec<bool>,
    /// Hat/tilde partition the run optimized over.
    pub masks1: PartitionMasks,
    pub masks2: PartitionMasks,
    pub history: Vec<IterationRecord>,
    /// The volume change dropped below the tolerance before the iteration
    /// cap.
    pub converged: bool,
    /// The initial designs never collide; the run is a no-op.
    pub no_op: bool,
    pub cancelled: bool,
    /// Boundary cells cleared to restore feasibility after thresholding.
    pub repaired_cells: usize,
    /// Hat cells filled back in by the maximality growth pass.
    pub grown_cells: usize,
    pub resolved: ResolvedParams,
}

impl CoGenResult {
    /// Summed thresholded measures of the final pair.
    pub fn thresholded_measures(&self) -> (f64, f64) {
        (
            mask_measure(self.rho1.grid(), &self.mask1),
            mask_measure(self.rho2.grid(), &self.mask2),
        )
    }
}

/// Value and exact gradient of the augmented Lagrangian.
#[derive(Debug, Clone)]
pub struct LagrangianEval {
    pub phi: f64,
    pub v1: f64,
    pub v2: f64,
    pub g21: f64,
    pub g12: f64,
    pub h: f64,
    /// Gradient over body-1 cells; zero outside the hat mask.
    pub grad1: Vec<f64>,
    /// Gradient over body-2 cells; zero outside the hat mask.
    pub grad2: Vec<f64>,
}

struct AlParams {
    gamma: f64,
    lambda: [f64; 3],
    penalty: f64,
    eps1d: f64,
    eps2d: f64,
}

fn hat_sum(values: &[f64], hat: &[bool]) -> f64 {
    values.iter().zip(hat).filter(|(_, &m)| m).map(|(v, _)| *v).sum()
}

fn al_scalars(
    rho1: &[f64],
    rho2: &[f64],
    hat1: &[bool],
    hat2: &[bool],
    f1: &[f64],
    f2: &[f64],
    p: &AlParams,
) -> (f64, f64, f64, f64, f64, f64) {
    let g21 = p.eps1d * rho1.iter().zip(f1).map(|(a, b)| a * b).sum::<f64>();
    let g12 = p.eps2d * rho2.iter().zip(f2).map(|(a, b)| a * b).sum::<f64>();
    let v1 = p.eps1d * hat_sum(rho1, hat1);
    let v2 = p.eps2d * hat_sum(rho2, hat2);
    let h = p.gamma * v1 - (1.0 - p.gamma) * v2;
    let phi = -(v1 + v2)
        + p.lambda[0] * g21
        + p.lambda[1] * g12
        + p.lambda[2] * h
        + 0.5 * p.penalty * (g21 * g21 + g12 * g12 + h * h);
    (phi, v1, v2, g21, g12, h)
}

#[allow(clippy::too_many_arguments)]
fn al_evaluate(
    rho1: &[f64],
    rho2: &[f64],
    hat1: &[bool],
    hat2: &[bool],
    w12_hat: &CorrelationMatrix,
    w21_hat: &CorrelationMatrix,
    p: &AlParams,
    with_gradient: bool,
) -> Result<LagrangianEval> {
    let f1 = w12_hat.matvec(rho2)?; // time-weighted body-2 material per body-1 cell
    let f2 = w21_hat.matvec(rho1)?;
    let (phi, v1, v2, g21, g12, h) = al_scalars(rho1, rho2, hat1, hat2, &f1, &f2, p);
    let (grad1, grad2) = if with_gradient {
        let ft1 = w12_hat.matvec_transposed(rho1)?; // length n2
        let ft2 = w21_hat.matvec_transposed(rho2)?; // length n1
        let a21 = p.lambda[0] + p.penalty * g21;
        let a12 = p.lambda[1] + p.penalty * g12;
        let ah = p.lambda[2] + p.penalty * h;
        let grad1 = (0..rho1.len())
            .map(|i| {
                if hat1[i] {
                    -p.eps1d
                        + a21 * p.eps1d * f1[i]
                        + a12 * p.eps2d * ft2[i]
                        + ah * p.gamma * p.eps1d
                } else {
                    0.0
                }
            })
            .collect();
        let grad2 = (0..rho2.len())
            .map(|j| {
                if hat2[j] {
                    -p.eps2d
                        + a21 * p.eps1d * ft1[j]
                        + a12 * p.eps2d * f2[j]
                        - ah * (1.0 - p.gamma) * p.eps2d
                } else {
                    0.0
                }
            })
            .collect();
        (grad1, grad2)
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(LagrangianEval { phi, v1, v2, g21, g12, h, grad1, grad2 })
}

/// Evaluate the augmented Lagrangian and its exact gradient over the hat
/// cells. `w12_hat` and `w21_hat` must be restricted to the hat masks.
#[allow(clippy::too_many_arguments)]
pub fn lagrangian_and_gradient(
    rho1: &[f64],
    rho2: &[f64],
    hat1: &[bool],
    hat2: &[bool],
    w12_hat: &CorrelationMatrix,
    w21_hat: &CorrelationMatrix,
    eps1d: f64,
    eps2d: f64,
    gamma: f64,
    lambda: [f64; 3],
    penalty: f64,
) -> Result<LagrangianEval> {
    let p = AlParams { gamma, lambda, penalty, eps1d, eps2d };
    al_evaluate(rho1, rho2, hat1, hat2, w12_hat, w21_hat, &p, true)
}

/// One bounded projected-gradient step:
/// `rho_new = clamp(rho - eta * grad, max(0, rho - m), min(1, rho + m))`
/// on hat cells; other cells are returned untouched.
pub fn update_step(
    rho: &[f64],
    grad: &[f64],
    hat: &[bool],
    eta: f64,
    move_limit: f64,
) -> Vec<f64> {
    rho.iter()
        .zip(grad)
        .zip(hat)
        .map(|((&r, &g), &m)| {
            if m {
                let lo = (r - move_limit).max(0.0);
                let hi = (r + move_limit).min(1.0);
                (r - eta * g).clamp(lo, hi)
            } else {
                r
            }
        })
        .collect()
}

/// First-order multiplier update with periodic penalty growth:
/// `lambda += c * (g21, g12, h)`, and every `outer_interval` iterations
/// `c <- min(kappa * c, c_max)`.
#[allow(clippy::too_many_arguments)]
pub fn multiplier_update(
    lambda: [f64; 3],
    penalty: f64,
    g21: f64,
    g12: f64,
    h: f64,
    iter: usize,
    outer_interval: usize,
    growth: f64,
    penalty_max: f64,
) -> ([f64; 3], f64) {
    let lambda = [
        lambda[0] + penalty * g21,
        lambda[1] + penalty * g12,
        lambda[2] + penalty * h,
    ];
    let penalty = if iter % outer_interval == 0 {
        (penalty * growth).min(penalty_max)
    } else {
        penalty
    };
    (lambda, penalty)
}

const BACKTRACK_LIMIT: usize = 20;

/// Run the co-generation loop from the rasterized initial designs.
///
/// `w12` pairs stationary grid 1 with moving grid 2 under the relative
/// poses; `w21` the reverse. The loop owns only the hat-cell densities;
/// tilde cells stay bit-identical to the input.
pub fn cogenerate(
    rho1_init: &DensityField,
    rho2_init: &DensityField,
    w12: &CorrelationMatrix,
    w21: &CorrelationMatrix,
    config: &OptimizerConfig,
    cancel: Option<&CancelToken>,
) -> Result<CoGenResult> {
    config.validate()?;
    let eps1d = rho1_init.grid().cell_measure();
    let eps2d = rho2_init.grid().cell_measure();

    let fbar1 = local_field(rho1_init, rho2_init, w12, true)?;
    let fbar2 = local_field(rho2_init, rho1_init, w21, true)?;
    let masks1 = partition(rho1_init, &fbar1, 0.0);
    let masks2 = partition(rho2_init, &fbar2, 0.0);

    let omega1 = eps1d * rho1_init.len() as f64;
    let delta_tol = config.delta_tol.unwrap_or(1e-4 * omega1);
    let collision_tol = config.collision_tol.unwrap_or(1e-6 * omega1);
    let v1_init = eps1d * hat_sum(rho1_init.values(), &masks1.hat);
    let v2_init = eps2d * hat_sum(rho2_init.values(), &masks2.hat);
    let ratio_tol = config.ratio_tol.unwrap_or(0.02 * (v1_init + v2_init));

    if masks1.hat_count() == 0 && masks2.hat_count() == 0 {
        // the initial designs never collide; there is nothing to optimize
        let resolved = ResolvedParams {
            step: config.step.unwrap_or(1.0),
            penalty_init: config.penalty_init.unwrap_or(10.0 / eps1d),
            delta_tol,
            collision_tol,
            ratio_tol,
        };
        return Ok(CoGenResult {
            mask1: rho1_init.threshold(0.5),
            mask2: rho2_init.threshold(0.5),
            rho1: rho1_init.clone(),
            rho2: rho2_init.clone(),
            masks1,
            masks2,
            history: Vec::new(),
            converged: true,
            no_op: true,
            cancelled: false,
            repaired_cells: 0,
            grown_cells: 0,
            resolved,
        });
    }

    let w12_hat = w12.restrict(&masks1.hat, &masks2.hat)?;
    let w21_hat = w21.restrict(&masks2.hat, &masks1.hat)?;

    let c0 = config.penalty_init.unwrap_or(10.0 / eps1d);
    let c_max = config.penalty_max_factor * c0;
    let eta0 = config.step.unwrap_or_else(|| {
        let scale = (eps1d * w12_hat.max_column_sum()).max(eps2d * w21_hat.max_column_sum());
        if scale > 0.0 {
            1.0 / scale
        } else {
            1.0
        }
    });
    let resolved = ResolvedParams {
        step: eta0,
        penalty_init: c0,
        delta_tol,
        collision_tol,
        ratio_tol,
    };

    let mut rho1 = rho1_init.values().to_vec();
    let mut rho2 = rho2_init.values().to_vec();
    let mut lambda = config.multiplier_init;
    let mut penalty = c0;
    let mut prev_constraint_norm = f64::INFINITY;
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut converged = false;
    let mut cancelled = false;

    for iter in 1..=config.max_iters {
        if cancel.map(|c| c.is_cancelled()).unwrap_or(false) {
            cancelled = true;
            break;
        }
        let p = AlParams { gamma: config.gamma, lambda, penalty, eps1d, eps2d };
        let eval = al_evaluate(&rho1, &rho2, &masks1.hat, &masks2.hat, &w12_hat, &w21_hat, &p, true)?;
        if !eval.phi.is_finite()
            || eval.grad1.iter().chain(&eval.grad2).any(|g| !g.is_finite())
        {
            return Err(CogenError::Numerical(format!(
                "non-finite Lagrangian or gradient at iteration {iter} \
                 (phi = {}, lambda = {lambda:?}, c = {penalty})",
                eval.phi
            )));
        }

        // backtracking projected step: halve eta until Phi does not increase.
        // The opening step is capped so the steepest cell moves by exactly
        // the move limit; multiplier growth otherwise inflates the gradient
        // until even twenty halvings overshoot.
        let grad_max = eval
            .grad1
            .iter()
            .chain(&eval.grad2)
            .fold(0.0f64, |m, g| m.max(g.abs()));
        let mut eta = if grad_max > 0.0 {
            eta0.min(config.move_limit / grad_max)
        } else {
            eta0
        };
        let mut accepted: Option<(Vec<f64>, Vec<f64>, LagrangianEval)> = None;
        for _ in 0..=BACKTRACK_LIMIT {
            let cand1 = update_step(&rho1, &eval.grad1, &masks1.hat, eta, config.move_limit);
            let cand2 = update_step(&rho2, &eval.grad2, &masks2.hat, eta, config.move_limit);
            let trial =
                al_evaluate(&cand1, &cand2, &masks1.hat, &masks2.hat, &w12_hat, &w21_hat, &p, false)?;
            if trial.phi <= eval.phi {
                accepted = Some((cand1, cand2, trial));
                break;
            }
            eta *= 0.5;
        }

        let (delta, stalled, record_vals) = match accepted {
            Some((new1, new2, trial)) => {
                let mut delta = 0.0;
                for i in 0..rho1.len() {
                    delta += eps1d * (new1[i] - rho1[i]).abs();
                }
                for j in 0..rho2.len() {
                    delta += eps2d * (new2[j] - rho2[j]).abs();
                }
                rho1 = new1;
                rho2 = new2;
                (delta, false, trial)
            }
            // keep the current densities; the multipliers still move
            None => (0.0, true, eval),
        };

        // Dual update on the outer schedule, or as soon as the primal is
        // stationary at the current multipliers (a stalled line search).
        // The penalty grows only while the constraints are not decreasing;
        // growing it past a settled iterate destabilizes the balance
        // between the two bodies.
        if iter % config.outer_interval == 0 || stalled {
            lambda[0] += penalty * record_vals.g21;
            lambda[1] += penalty * record_vals.g12;
            lambda[2] += penalty * record_vals.h;
            let norm = record_vals.g21.abs().max(record_vals.g12.abs()).max(record_vals.h.abs());
            if norm > 0.25 * prev_constraint_norm {
                penalty = (penalty * config.penalty_growth).min(c_max);
            }
            prev_constraint_norm = norm;
        }

        history.push(IterationRecord {
            iter,
            v1: record_vals.v1,
            v2: record_vals.v2,
            g21: record_vals.g21,
            g12: record_vals.g12,
            h: record_vals.h,
            delta,
            stalled,
        });

        // a small volume change only counts as convergence once the
        // constraints sit inside their reported tolerances; otherwise the
        // duals are still moving and the primal will move again
        let feasible = record_vals.g21 <= collision_tol
            && record_vals.g12 <= collision_tol
            && record_vals.h.abs() <= ratio_tol;
        if delta < delta_tol && feasible {
            converged = true;
            break;
        }
    }

    let rho1_final = DensityField::new(rho1_init.grid().clone(), rho1)?;
    let rho2_final = DensityField::new(rho2_init.grid().clone(), rho2)?;
    let (mask1, mask2, repaired_cells, grown_cells) = threshold_repair_grow(
        &rho1_final,
        &rho2_final,
        &w12_hat,
        &w21_hat,
        &masks1,
        &masks2,
        config.gamma,
    )?;

    Ok(CoGenResult {
        rho1: rho1_final,
        rho2: rho2_final,
        mask1,
        mask2,
        masks1,
        masks2,
        history,
        converged,
        no_op: false,
        cancelled,
        repaired_cells,
        grown_cells,
        resolved,
    })
}

/// Finalize the reported masks. Densities are thresholded at 0.5; if the
/// binary pair still collides (in the hat-restricted measures the loop
/// enforces), hat cells are cleared greedily by descending masked local
/// measure until collision-free. The masks are then grown back to a maximal
/// pair: any hat cell whose center trajectory meets no retained material of
/// the other body is filled, whole bodies at a time (cells of one body never
/// collide with each other), until no side can grow.
fn threshold_repair_grow(
    rho1: &DensityField,
    rho2: &DensityField,
    w12_hat: &CorrelationMatrix,
    w21_hat: &CorrelationMatrix,
    masks1: &PartitionMasks,
    masks2: &PartitionMasks,
    gamma: f64,
) -> Result<(Vec<bool>, Vec<bool>, usize, usize)> {
    let mut mask1 = rho1.threshold(0.5);
    let mut mask2 = rho2.threshold(0.5);
    let as_values = |mask: &[bool]| -> Vec<f64> {
        mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    };

    let mut cleared = 0usize;
    loop {
        let v1 = as_values(&mask1);
        let v2 = as_values(&mask2);
        let f1 = w12_hat.matvec(&v2)?;
        let f2 = w21_hat.matvec(&v1)?;
        let g21: f64 = v1.iter().zip(&f1).map(|(a, b)| a * b).sum();
        let g12: f64 = v2.iter().zip(&f2).map(|(a, b)| a * b).sum();
        if g21 + g12 == 0.0 {
            break;
        }
        let mut best: Option<(usize, usize, f64)> = None; // (body, index, fbar)
        for i in 0..mask1.len() {
            if mask1[i] && masks1.hat[i] && f1[i] > 0.0 && best.map(|b| f1[i] > b.2).unwrap_or(true)
            {
                best = Some((1, i, f1[i]));
            }
        }
        for j in 0..mask2.len() {
            if mask2[j] && masks2.hat[j] && f2[j] > 0.0 && best.map(|b| f2[j] > b.2).unwrap_or(true)
            {
                best = Some((2, j, f2[j]));
            }
        }
        match best {
            Some((1, i, _)) => mask1[i] = false,
            Some((2, j, _)) => mask2[j] = false,
            // a residual term with no clearable hat cell would involve a
            // tilde cell, which the partition rules out
            _ => {
                return Err(CogenError::Numerical(format!(
                    "post-threshold collision {} cannot be repaired from hat cells",
                    g21 + g12
                )))
            }
        }
        cleared += 1;
    }

    // Maximality growth; the gamma preference picks which body claims
    // first. A cell is claimable only if it is clean in BOTH discrete
    // measures (the W12 and W21 samplings disagree on grazing pairs).
    let mut grown = 0usize;
    let order: [usize; 2] = if gamma >= 0.5 { [2, 1] } else { [1, 2] };
    loop {
        let mut changed = false;
        for body in order {
            if body == 1 {
                let other = as_values(&mask2);
                let via_rows = w12_hat.matvec(&other)?;
                let via_cols = w21_hat.matvec_transposed(&other)?;
                for i in 0..mask1.len() {
                    if masks1.hat[i] && !mask1[i] && via_rows[i] == 0.0 && via_cols[i] == 0.0 {
                        mask1[i] = true;
                        grown += 1;
                        changed = true;
                    }
                }
            } else {
                let other = as_values(&mask1);
                let via_rows = w21_hat.matvec(&other)?;
                let via_cols = w12_hat.matvec_transposed(&other)?;
                for j in 0..mask2.len() {
                    if masks2.hat[j] && !mask2[j] && via_rows[j] == 0.0 && via_cols[j] == 0.0 {
                        mask2[j] = true;
                        grown += 1;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok((mask1, mask2, cleared, grown))
}

/// A row of the volume-ratio sweep table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaRow {
    pub gamma: f64,
    /// Thresholded measure of the final body-1 solid.
    pub v1: f64,
    pub v2: f64,
    pub sum: f64,
}

/// Run [`cogenerate`] once per `gamma`, reusing the same initial fields and
/// precomputed matrices, and tabulate the thresholded measures.
pub fn gamma_sweep(
    rho1_init: &DensityField,
    rho2_init: &DensityField,
    w12: &CorrelationMatrix,
    w21: &CorrelationMatrix,
    base: &OptimizerConfig,
    gammas: &[f64],
    cancel: Option<&CancelToken>,
) -> Result<(Vec<GammaRow>, Vec<CoGenResult>)> {
    let mut rows = Vec::with_capacity(gammas.len());
    let mut results = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let config = OptimizerConfig { gamma, ..base.clone() };
        let result = cogenerate(rho1_init, rho2_init, w12, w21, &config, cancel)?;
        let (v1, v2) = result.thresholded_measures();
        rows.push(GammaRow { gamma, v1, v2, sum: v1 + v2 });
        results.push(result);
    }
    Ok((rows, results))
}
