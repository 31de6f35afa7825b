//! Uniform Cartesian grids, density fields, and analytic shape primitives.
//!
//! A solid is represented on a [`Grid`] by a [`DensityField`] of per-cell
//! material fractions in `[0, 1]`. Analytic initial designs are described by
//! [`ShapeSpec`] trees with exact point-membership predicates and turned
//! into fields by [`rasterize`].

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{CogenError, Result};

/// A uniform axis-aligned Cartesian lattice over a rectangular design domain.
///
/// Cells are squares (2D) or cubes (3D) of edge `spacing`. The cell with
/// multi-index `(x, y, z)` has linear index `x + nx*(y + ny*z)` (x fastest)
/// and its center at `origin + (multi + 1/2) * spacing` per axis.
///
/// Two-dimensional grids are stored with `dims[2] == 1` and a z-origin of
/// `-spacing/2`, so every cell center lies exactly in the z = 0 plane and
/// z-preserving poses keep points locatable.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    origin: Vector3<f64>,
    spacing: f64,
    dims: [usize; 3],
    dim: usize,
}

impl Grid {
    /// Build a 2D grid from its lower-left corner, cell edge length, and
    /// per-axis cell counts.
    pub fn new_2d(origin: [f64; 2], spacing: f64, dims: [usize; 2]) -> Result<Self> {
        Self::build(
            Vector3::new(origin[0], origin[1], -0.5 * spacing),
            spacing,
            [dims[0], dims[1], 1],
            2,
        )
    }

    /// Build a 3D grid from its lower corner, cell edge length, and per-axis
    /// cell counts.
    pub fn new_3d(origin: [f64; 3], spacing: f64, dims: [usize; 3]) -> Result<Self> {
        Self::build(Vector3::new(origin[0], origin[1], origin[2]), spacing, dims, 3)
    }

    fn build(origin: Vector3<f64>, spacing: f64, dims: [usize; 3], dim: usize) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(CogenError::Config(format!(
                "grid spacing must be positive and finite, got {spacing}"
            )));
        }
        if dims.iter().any(|&n| n == 0) {
            return Err(CogenError::Config(format!(
                "grid dims must all be at least 1, got {dims:?}"
            )));
        }
        let n = dims[0]
            .checked_mul(dims[1])
            .and_then(|p| p.checked_mul(dims[2]))
            .ok_or_else(|| CogenError::Config("grid cell count overflows usize".into()))?;
        // Correlation matrices index cells with u32.
        if n > u32::MAX as usize {
            return Err(CogenError::Config(format!(
                "grid cell count {n} exceeds the u32 index range"
            )));
        }
        Ok(Self { origin, spacing, dims, dim })
    }

    /// Spatial dimension, 2 or 3.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> Vector3<f64> {
        self.origin
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        false // dims are all >= 1 by construction
    }

    /// Measure of one cell: `spacing^dim`.
    pub fn cell_measure(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Multi-index of a linear index.
    pub fn multi_index(&self, index: usize) -> [usize; 3] {
        let x = index % self.dims[0];
        let y = (index / self.dims[0]) % self.dims[1];
        let z = index / (self.dims[0] * self.dims[1]);
        [x, y, z]
    }

    /// Linear index of a multi-index (x fastest).
    pub fn linear_index(&self, multi: [usize; 3]) -> usize {
        multi[0] + self.dims[0] * (multi[1] + self.dims[1] * multi[2])
    }

    /// Center of cell `index`. For 2D grids the z component is exactly 0.
    pub fn cell_center(&self, index: usize) -> Vector3<f64> {
        let m = self.multi_index(index);
        Vector3::new(
            self.origin.x + (m[0] as f64 + 0.5) * self.spacing,
            self.origin.y + (m[1] as f64 + 0.5) * self.spacing,
            self.origin.z + (m[2] as f64 + 0.5) * self.spacing,
        )
    }

    /// Lower corner of cell `index`.
    pub fn cell_corner(&self, index: usize) -> Vector3<f64> {
        let m = self.multi_index(index);
        Vector3::new(
            self.origin.x + m[0] as f64 * self.spacing,
            self.origin.y + m[1] as f64 * self.spacing,
            self.origin.z + m[2] as f64 * self.spacing,
        )
    }

    /// Index of the half-open cell `[x_i - eps/2, x_i + eps/2)` containing
    /// `p`, or `None` if `p` lies outside the grid extent.
    pub fn locate(&self, p: &Vector3<f64>) -> Option<usize> {
        let mut multi = [0usize; 3];
        for axis in 0..3 {
            let q = (p[axis] - self.origin[axis]) / self.spacing;
            if q < 0.0 {
                return None;
            }
            let idx = q.floor() as usize;
            if idx >= self.dims[axis] {
                return None;
            }
            multi[axis] = idx;
        }
        Some(self.linear_index(multi))
    }

    /// True when both grids share dimension, spacing, origin, and dims.
    pub fn same_lattice(&self, other: &Grid) -> bool {
        self == other
    }
}

/// Per-cell material fractions `rho` in `[0, 1]` over a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: Grid,
    values: Vec<f64>,
}

impl DensityField {
    /// Wrap raw values, clamping each into `[0, 1]`. Non-finite values are
    /// rejected.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CogenError::Dimension(format!(
                "field has {} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CogenError::Numerical("density field contains non-finite values".into()));
        }
        let values = values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok(Self { grid, values })
    }

    /// All-zero field.
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n] }
    }

    /// Constant field, clamped into `[0, 1]`.
    pub fn filled(grid: Grid, value: f64) -> Self {
        let n = grid.len();
        Self { grid, values: vec![value.clamp(0.0, 1.0); n] }
    }

    /// Binary field from an occupancy mask.
    pub fn from_mask(grid: Grid, mask: &[bool]) -> Result<Self> {
        Self::new(grid, mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Replace the values, clamping into `[0, 1]`.
    pub fn set_values(&mut self, values: Vec<f64>) -> Result<()> {
        let replacement = Self::new(self.grid.clone(), values)?;
        self.values = replacement.values;
        Ok(())
    }

    /// d-measure of the solid: `spacing^d * sum(rho)`.
    pub fn measure(&self) -> f64 {
        self.grid.cell_measure() * self.values.iter().sum::<f64>()
    }

    /// d-measure restricted to cells selected by `mask`.
    pub fn measure_masked(&self, mask: &[bool]) -> f64 {
        debug_assert_eq!(mask.len(), self.values.len());
        let sum: f64 = self
            .values
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(v, _)| *v)
            .sum();
        self.grid.cell_measure() * sum
    }

    /// Binary occupancy mask: `rho > theta` (strict). `theta` must lie in
    /// the open interval (0, 1).
    pub fn threshold(&self, theta: f64) -> Vec<bool> {
        assert!(theta > 0.0 && theta < 1.0, "threshold must be in (0, 1), got {theta}");
        self.values.iter().map(|&v| v > theta).collect()
    }
}

/// d-measure of a binary mask on a grid: `spacing^d * popcount`.
pub fn mask_measure(grid: &Grid, mask: &[bool]) -> f64 {
    grid.cell_measure() * mask.iter().filter(|&&b| b).count() as f64
}

/// A tree of analytic primitives combined by booleans.
///
/// Membership predicates are closed-set: boundary points classify as
/// inside. Primitives are 3D; 2D scenes embed shapes in the z = 0 plane
/// (see [`ShapeSpec::box_2d`] and [`ShapeSpec::ball_2d`]).
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeSpec {
    Box {
        min: Vector3<f64>,
        max: Vector3<f64>,
    },
    Ball {
        center: Vector3<f64>,
        radius: f64,
    },
    /// Finite cylinder: points within `radius` of the axis line through
    /// `point` along `axis`, within `half_length` of `point` axially.
    Cylinder {
        point: Vector3<f64>,
        axis: Vector3<f64>,
        radius: f64,
        half_length: f64,
    },
    Union(Vec<ShapeSpec>),
    Intersection(Vec<ShapeSpec>),
    /// First operand minus the second.
    Difference(Box<ShapeSpec>, Box<ShapeSpec>),
}

impl ShapeSpec {
    /// Axis-aligned 2D box embedded at z = 0.
    pub fn box_2d(min: [f64; 2], max: [f64; 2]) -> Self {
        ShapeSpec::Box {
            min: Vector3::new(min[0], min[1], -0.5),
            max: Vector3::new(max[0], max[1], 0.5),
        }
    }

    /// Disk embedded at z = 0.
    pub fn ball_2d(center: [f64; 2], radius: f64) -> Self {
        ShapeSpec::Ball { center: Vector3::new(center[0], center[1], 0.0), radius }
    }

    pub fn box_3d(min: [f64; 3], max: [f64; 3]) -> Self {
        ShapeSpec::Box { min: Vector3::from(min), max: Vector3::from(max) }
    }

    pub fn ball_3d(center: [f64; 3], radius: f64) -> Self {
        ShapeSpec::Ball { center: Vector3::from(center), radius }
    }

    /// Exact point membership (closed sets).
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        match self {
            ShapeSpec::Box { min, max } => {
                (0..3).all(|a| p[a] >= min[a] && p[a] <= max[a])
            }
            ShapeSpec::Ball { center, radius } => (p - center).norm_squared() <= radius * radius,
            ShapeSpec::Cylinder { point, axis, radius, half_length } => {
                let dir = axis.normalize();
                let rel = p - point;
                let along = rel.dot(&dir);
                if along.abs() > *half_length {
                    return false;
                }
                let radial = rel - along * dir;
                radial.norm_squared() <= radius * radius
            }
            ShapeSpec::Union(parts) => parts.iter().any(|s| s.contains(p)),
            ShapeSpec::Intersection(parts) => parts.iter().all(|s| s.contains(p)),
            ShapeSpec::Difference(a, b) => a.contains(p) && !b.contains(p),
        }
    }

    /// Check that every leaf primitive is bounded and non-degenerate and
    /// that the tree is usable in `dim` dimensions.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            ShapeSpec::Box { min, max } => {
                for a in 0..3 {
                    if !(min[a] < max[a]) {
                        return Err(CogenError::Config(format!(
                            "degenerate box: min {:?} not strictly below max {:?}",
                            min.as_slice(),
                            max.as_slice()
                        )));
                    }
                }
                Ok(())
            }
            ShapeSpec::Ball { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(CogenError::Config(format!("ball radius must be positive, got {radius}")));
                }
                Ok(())
            }
            ShapeSpec::Cylinder { axis, radius, half_length, .. } => {
                if dim == 2 {
                    return Err(CogenError::Config("cylinder primitive is only available in 3D".into()));
                }
                if !(axis.norm_squared() > 0.0) {
                    return Err(CogenError::Config("cylinder axis must be nonzero".into()));
                }
                if !(*radius > 0.0) || !(*half_length > 0.0) {
                    return Err(CogenError::Config(format!(
                        "cylinder radius and half-length must be positive, got {radius} and {half_length}"
                    )));
                }
                Ok(())
            }
            ShapeSpec::Union(parts) | ShapeSpec::Intersection(parts) => {
                if parts.is_empty() {
                    return Err(CogenError::Config("boolean node needs at least one operand".into()));
                }
                parts.iter().try_for_each(|s| s.validate(dim))
            }
            ShapeSpec::Difference(a, b) => {
                a.validate(dim)?;
                b.validate(dim)
            }
        }
    }
}

/// Rasterize `shape` onto `grid` by testing `supersample^d` stratified
/// sample points per cell (sub-cell centers). Cells fully inside or outside
/// come out exactly 1 or 0.
pub fn rasterize(shape: &ShapeSpec, grid: &Grid, supersample: u32) -> DensityField {
    assert!(supersample >= 1, "supersample must be at least 1");
    let s = supersample as usize;
    let dim = grid.dim();
    let total = s.pow(dim as u32);
    let eps = grid.spacing();
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let corner = grid.cell_corner(i);
            let z_center = grid.cell_center(i).z;
            let mut hits = 0usize;
            let mut offsets = [0usize; 3];
            for _ in 0..total {
                let p = Vector3::new(
                    corner.x + (offsets[0] as f64 + 0.5) / s as f64 * eps,
                    corner.y + (offsets[1] as f64 + 0.5) / s as f64 * eps,
                    if dim == 2 {
                        z_center
                    } else {
                        corner.z + (offsets[2] as f64 + 0.5) / s as f64 * eps
                    },
                );
                if shape.contains(&p) {
                    hits += 1;
                }
                // odometer over the d sampled axes, x fastest
                for axis in 0..dim {
                    offsets[axis] += 1;
                    if offsets[axis] < s {
                        break;
                    }
                    offsets[axis] = 0;
                }
            }
            hits as f64 / total as f64
        })
        .collect();
    DensityField { grid: grid.clone(), values }
}
