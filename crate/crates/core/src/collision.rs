//! Collision measures, their exact sensitivities, domain partitioning, and
//! the sweep/unsweep operations.
//!
//! The global measure `g = eps^d * rho_stat^T W rho_mov` integrates, over
//! the stationary solid, the fraction of the motion during which the other
//! body's material overlaps each cell. It is bilinear in the two density
//! arrays, so its sensitivities are exact matrix-vector products.

use rayon::prelude::*;

use crate::correlation::CorrelationMatrix;
use crate::error::{CogenError, Result};
use crate::geometry::{DensityField, Grid};
use crate::motion::Pose;

/// Per-cell trajectory-duration fractions: the local collision measure `f`
/// or its masked form `f_bar = rho_self * f`.
#[derive(Debug, Clone)]
pub struct LocalMeasureField {
    grid: Grid,
    values: Vec<f64>,
}

impl LocalMeasureField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Initially-colliding (`hat`) and initially-collision-free (`tilde`)
/// subsets of a solid's support. The two masks are disjoint and cover
/// exactly the cells with positive density.
#[derive(Debug, Clone)]
pub struct PartitionMasks {
    pub hat: Vec<bool>,
    pub tilde: Vec<bool>,
}

impl PartitionMasks {
    pub fn hat_count(&self) -> usize {
        self.hat.iter().filter(|&&b| b).count()
    }
}

fn check_pairing(
    rho_stat: &DensityField,
    rho_mov: &DensityField,
    w: &CorrelationMatrix,
) -> Result<()> {
    if w.rows() != rho_stat.len() || w.cols() != rho_mov.len() {
        return Err(CogenError::Dimension(format!(
            "correlation matrix is {}x{} but fields have {} and {} cells",
            w.rows(),
            w.cols(),
            rho_stat.len(),
            rho_mov.len()
        )));
    }
    Ok(())
}

/// Global collision measure `eps^d * rho_stat^T W rho_mov`, where `eps` is
/// the stationary grid spacing. Units: d-measure times normalized time.
pub fn global_measure(
    rho_stat: &DensityField,
    rho_mov: &DensityField,
    w: &CorrelationMatrix,
) -> Result<f64> {
    check_pairing(rho_stat, rho_mov, w)?;
    let f = w.matvec(rho_mov.values())?;
    let dot: f64 = rho_stat.values().iter().zip(&f).map(|(a, b)| a * b).sum();
    Ok(rho_stat.grid().cell_measure() * dot)
}

/// Local collision measure on the self grid: `f_i = (W rho_other)_i`, the
/// time fraction the other body's material occupies cell `i` along the
/// relative motion. With `masked`, returns `f_bar_i = rho_self_i * f_i`.
pub fn local_field(
    rho_self: &DensityField,
    rho_other: &DensityField,
    w: &CorrelationMatrix,
    masked: bool,
) -> Result<LocalMeasureField> {
    check_pairing(rho_self, rho_other, w)?;
    let mut values = w.matvec(rho_other.values())?;
    if masked {
        for (v, r) in values.iter_mut().zip(rho_self.values()) {
            *v *= r;
        }
    }
    Ok(LocalMeasureField { grid: rho_self.grid().clone(), values })
}

/// The four sensitivity fields of the two global measures.
#[derive(Debug, Clone)]
pub struct SensitivityFields {
    /// d g21 / d rho1 = eps1^d * (W12 rho2)
    pub g21_rho1: Vec<f64>,
    /// d g21 / d rho2 = eps1^d * (W12^T rho1)
    pub g21_rho2: Vec<f64>,
    /// d g12 / d rho1 = eps2^d * (W21^T rho2)
    pub g12_rho1: Vec<f64>,
    /// d g12 / d rho2 = eps2^d * (W21 rho1)
    pub g12_rho2: Vec<f64>,
}

/// Exact derivatives of both global measures with respect to both density
/// arrays. `w12` pairs stationary grid 1 with moving grid 2; `w21` the
/// reverse.
pub fn sensitivities(
    rho1: &DensityField,
    rho2: &DensityField,
    w12: &CorrelationMatrix,
    w21: &CorrelationMatrix,
) -> Result<SensitivityFields> {
    check_pairing(rho1, rho2, w12)?;
    check_pairing(rho2, rho1, w21)?;
    let eps1 = rho1.grid().cell_measure();
    let eps2 = rho2.grid().cell_measure();
    let scale = |mut v: Vec<f64>, s: f64| {
        v.iter_mut().for_each(|x| *x *= s);
        v
    };
    Ok(SensitivityFields {
        g21_rho1: scale(w12.matvec(rho2.values())?, eps1),
        g21_rho2: scale(w12.matvec_transposed(rho1.values())?, eps1),
        g12_rho1: scale(w21.matvec_transposed(rho2.values())?, eps2),
        g12_rho2: scale(w21.matvec(rho1.values())?, eps2),
    })
}

/// Split a solid's support by its masked local measure: `hat` collects
/// cells with `rho > 0` and `f_bar > tol`, `tilde` the rest of the support.
pub fn partition(rho: &DensityField, f_masked: &LocalMeasureField, tol: f64) -> PartitionMasks {
    assert!(tol >= 0.0, "partition tolerance must be nonnegative");
    assert_eq!(rho.len(), f_masked.values.len(), "field and local measure must share a grid");
    let mut hat = vec![false; rho.len()];
    let mut tilde = vec![false; rho.len()];
    for i in 0..rho.len() {
        if rho.values()[i] > 0.0 {
            if f_masked.values[i] > tol {
                hat[i] = true;
            } else {
                tilde[i] = true;
            }
        }
    }
    PartitionMasks { hat, tilde }
}

/// Unsweep: the cells of `target` whose centers, displaced by every pose of
/// `leg` into the obstacle's frame, never land in an obstacle cell with
/// density above `theta`. Points leaving the obstacle grid count as free.
///
/// With `leg = poses_12` and the obstacle on grid 1, this is the maximal
/// body-2 solid that avoids the obstacle throughout the motion.
pub fn unsweep(
    obstacle: &DensityField,
    leg: &[Pose],
    target: &Grid,
    theta: f64,
) -> DensityField {
    let mask = obstacle.threshold(theta);
    let grid = obstacle.grid();
    let values: Vec<f64> = (0..target.len())
        .into_par_iter()
        .map(|i| {
            let x = target.cell_center(i);
            let clear = leg.iter().all(|pose| match grid.locate(&pose.apply(&x)) {
                Some(cell) => !mask[cell],
                None => true,
            });
            if clear {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    DensityField::new(target.clone(), values).expect("sized to target grid")
}

/// Sweep: the cells of `target` whose centers, displaced by some pose of
/// `leg`, land in a shape cell with density above `theta`. On the same
/// sampling, sweep and unsweep masks are exact cellwise complements.
pub fn sweep(shape: &DensityField, leg: &[Pose], target: &Grid, theta: f64) -> DensityField {
    let mask = shape.threshold(theta);
    let grid = shape.grid();
    let values: Vec<f64> = (0..target.len())
        .into_par_iter()
        .map(|i| {
            let x = target.cell_center(i);
            let hit = leg.iter().any(|pose| match grid.locate(&pose.apply(&x)) {
                Some(cell) => mask[cell],
                None => false,
            });
            if hit {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    DensityField::new(target.clone(), values).expect("sized to target grid")
}
