//! Validation oracles and evaluation metrics: independent collision
//! quadrature, trajectory distance series, and axial periodicity scoring.

use rayon::prelude::*;

use crate::error::{CogenError, Result};
use crate::geometry::{DensityField, Grid, ShapeSpec};
use crate::motion::Trajectory;

/// Per-timestep minimum center-to-center distance between the occupied
/// cells of two thresholded solids, in length units.
#[derive(Debug, Clone)]
pub struct DistanceSeries {
    pub values: Vec<f64>,
    pub mean: f64,
    pub min: f64,
}

/// Direct quadrature of the global collision measure, bypassing the
/// correlation matrix entirely: stratified points of grid 1 are tested
/// against `shape1` exactly and against `shape2` after displacement by the
/// sampled inverse relative poses, averaged over the timesteps.
pub fn oracle_global_measure(
    shape1: &ShapeSpec,
    shape2: &ShapeSpec,
    trajectory: &Trajectory,
    samples_per_cell: u32,
    grid1: &Grid,
) -> f64 {
    assert!(samples_per_cell >= 2, "quadrature needs at least 2 samples per cell axis");
    let s = samples_per_cell as usize;
    let dim = grid1.dim();
    let total = s.pow(dim as u32);
    let eps = grid1.spacing();
    let k = trajectory.timesteps() as f64;
    let cell_weight = grid1.cell_measure() / total as f64;

    let sum: f64 = (0..grid1.len())
        .into_par_iter()
        .map(|i| {
            let corner = grid1.cell_corner(i);
            let z_center = grid1.cell_center(i).z;
            let mut acc = 0.0;
            let mut offsets = [0usize; 3];
            for _ in 0..total {
                let p = nalgebra::Vector3::new(
                    corner.x + (offsets[0] as f64 + 0.5) / s as f64 * eps,
                    corner.y + (offsets[1] as f64 + 0.5) / s as f64 * eps,
                    if dim == 2 {
                        z_center
                    } else {
                        corner.z + (offsets[2] as f64 + 0.5) / s as f64 * eps
                    },
                );
                if shape1.contains(&p) {
                    let hits = trajectory
                        .poses_21()
                        .iter()
                        .filter(|pose| shape2.contains(&pose.apply(&p)))
                        .count();
                    acc += hits as f64 / k;
                }
                for axis in 0..dim {
                    offsets[axis] += 1;
                    if offsets[axis] < s {
                        break;
                    }
                    offsets[axis] = 0;
                }
            }
            acc
        })
        .sum();
    sum * cell_weight
}

/// Static kd-tree over points for nearest-neighbor queries.
struct KdTree {
    // nodes laid out depth-first: a node is followed by its whole left
    // subtree, then its right subtree
    points: Vec<[f64; 3]>,
    axes: Vec<u8>,
}

impl KdTree {
    fn build(mut points: Vec<[f64; 3]>) -> Self {
        let n = points.len();
        let mut tree = KdTree { points: Vec::with_capacity(n), axes: Vec::with_capacity(n) };
        tree.build_rec(&mut points, 0);
        tree
    }

    fn build_rec(&mut self, pts: &mut [[f64; 3]], depth: usize) {
        if pts.is_empty() {
            return;
        }
        let axis = depth % 3;
        let mid = pts.len() / 2;
        pts.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
        self.points.push(pts[mid]);
        self.axes.push(axis as u8);
        let (left, right) = pts.split_at_mut(mid);
        self.build_rec(left, depth + 1);
        self.build_rec(&mut right[1..], depth + 1);
    }

    fn nearest_sq(&self, q: [f64; 3]) -> f64 {
        let mut best = f64::INFINITY;
        self.search(0, self.points.len(), q, &mut best);
        best
    }

    fn search(&self, start: usize, end: usize, q: [f64; 3], best: &mut f64) {
        if start >= end {
            return;
        }
        let p = self.points[start];
        let d2 = (0..3).map(|a| (p[a] - q[a]) * (p[a] - q[a])).sum::<f64>();
        if d2 < *best {
            *best = d2;
        }
        // build_rec puts n/2 of n points into the left subtree
        let left_size = (end - start) / 2;
        let left = (start + 1, start + 1 + left_size);
        let right = (start + 1 + left_size, end);
        let axis = self.axes[start] as usize;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
        self.search(near.0, near.1, q, best);
        if diff * diff < *best {
            self.search(far.0, far.1, q, best);
        }
    }
}

/// For every timestep, transform body-2 occupied cell centers into frame 1
/// and take the minimum Euclidean distance to body-1 occupied cell centers.
/// Both fields are thresholded at `theta`; an empty solid is an error.
pub fn min_distance_series(
    rho1: &DensityField,
    rho2: &DensityField,
    trajectory: &Trajectory,
    theta: f64,
) -> Result<DistanceSeries> {
    let mask1 = rho1.threshold(theta);
    let mask2 = rho2.threshold(theta);
    let centers1: Vec<[f64; 3]> = mask1
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| {
            let c = rho1.grid().cell_center(i);
            [c.x, c.y, c.z]
        })
        .collect();
    let centers2: Vec<nalgebra::Vector3<f64>> = mask2
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| rho2.grid().cell_center(i))
        .collect();
    if centers1.is_empty() || centers2.is_empty() {
        return Err(CogenError::Config(
            "distance series needs both thresholded solids non-empty".into(),
        ));
    }
    let tree = KdTree::build(centers1);
    let values: Vec<f64> = trajectory
        .poses_12()
        .par_iter()
        .map(|pose| {
            centers2
                .iter()
                .map(|c| {
                    let p = pose.apply(c);
                    tree.nearest_sq([p.x, p.y, p.z])
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(DistanceSeries { values, mean, min })
}

/// Fraction of timesteps whose minimum distance is at most `tolerance`.
/// A sensible default tolerance is one cell diagonal, `sqrt(d) * eps`.
pub fn contact_fraction(series: &DistanceSeries, tolerance: f64) -> f64 {
    assert!(tolerance >= 0.0, "contact tolerance must be nonnegative");
    let hits = series.values.iter().filter(|&&v| v <= tolerance).count();
    hits as f64 / series.values.len() as f64
}

/// Pearson correlation between a 3D field and its copy shifted by `period`
/// cells along `axis`, over the overlapping slab. Scores near 1 indicate a
/// periodic structure (such as a thread of that pitch).
pub fn periodicity_score(field: &DensityField, axis: usize, period: usize) -> Result<f64> {
    let grid = field.grid();
    if grid.dim() != 3 {
        return Err(CogenError::Dimension("periodicity score requires a 3D field".into()));
    }
    if axis > 2 {
        return Err(CogenError::Config(format!("axis must be 0, 1, or 2, got {axis}")));
    }
    let extent = grid.dims()[axis];
    if period < 1 || period > extent / 2 {
        return Err(CogenError::Config(format!(
            "period {period} must be in [1, {}] for an axis of {extent} cells",
            extent / 2
        )));
    }
    let dims = grid.dims();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let mut shifted = [x, y, z];
                if shifted[axis] + period >= dims[axis] {
                    continue;
                }
                shifted[axis] += period;
                xs.push(field.values()[grid.linear_index([x, y, z])]);
                ys.push(field.values()[grid.linear_index(shifted)]);
            }
        }
    }
    pearson(&xs, &ys)
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    // guard against rounding residue on constant inputs
    let degenerate = 1e-20 * n;
    if sxx <= degenerate || syy <= degenerate {
        return Err(CogenError::Numerical(
            "periodicity score is undefined for a zero-variance field".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}
