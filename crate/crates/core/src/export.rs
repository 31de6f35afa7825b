//! Field exporters and on-disk container formats.
//!
//! Density fields travel as `COGF1` raw containers (a fixed 32-byte header,
//! the 24-byte origin block, then the little-endian f64 density payload in
//! linear index order). 2D fields export to binary PGM images, 3D fields to
//! legacy-ASCII VTK structured points with one cell-data scalar array.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{CogenError, Result};
use crate::geometry::{DensityField, Grid};
use crate::motion::Trajectory;
use crate::optimizer::{GammaRow, IterationRecord};

const FIELD_MAGIC: &[u8; 5] = b"COGF1";

/// Write a density field as a raw `COGF1` container.
pub fn write_field_raw(field: &DensityField, path: &Path) -> Result<()> {
    let grid = field.grid();
    let mut w = BufWriter::new(File::create(path)?);
    // 32-byte header: magic (8, zero-padded), d (4, low byte), dims (12),
    // spacing (8)
    let mut magic = [0u8; 8];
    magic[..5].copy_from_slice(FIELD_MAGIC);
    w.write_all(&magic)?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    for d in grid.dims() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    w.write_all(&grid.spacing().to_le_bytes())?;
    // origin block
    for v in grid.origin().iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read a `COGF1` container back into a density field.
pub fn read_field_raw(path: &Path) -> Result<DensityField> {
    let bad = |reason: &str| CogenError::Format {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic[..5] != FIELD_MAGIC {
        return Err(bad("bad magic, not a density field container"));
    }
    let dim = read_u32(&mut r)? as usize;
    let dims = [
        read_u32(&mut r)? as usize,
        read_u32(&mut r)? as usize,
        read_u32(&mut r)? as usize,
    ];
    let spacing = read_f64(&mut r)?;
    let origin = [read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?];
    let grid = match dim {
        2 => {
            if dims[2] != 1 {
                return Err(bad("2D container must have a single z layer"));
            }
            Grid::new_2d([origin[0], origin[1]], spacing, [dims[0], dims[1]])
        }
        3 => Grid::new_3d(origin, spacing, dims),
        _ => return Err(bad("dimension must be 2 or 3")),
    }
    .map_err(|e| bad(&e.to_string()))?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        values.push(read_f64(&mut r)?);
    }
    let mut trailing = Vec::new();
    r.read_to_end(&mut trailing)?;
    if !trailing.is_empty() {
        return Err(bad("trailing bytes after the density payload"));
    }
    DensityField::new(grid, values)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Write a 2D field as a binary PGM (P5) image, maxval 255, pixel value
/// `round(255 * rho)`. Image row 0 holds the highest-y grid row; a header
/// comment records the grid origin and spacing.
pub fn write_pgm(field: &DensityField, path: &Path) -> Result<()> {
    let grid = field.grid();
    if grid.dim() != 2 {
        return Err(CogenError::Dimension("PGM export requires a 2D field".into()));
    }
    let [nx, ny, _] = grid.dims();
    let mut w = BufWriter::new(File::create(path)?);
    write!(
        w,
        "P5\n# origin=({}, {}) spacing={}\n{nx} {ny}\n255\n",
        grid.origin().x,
        grid.origin().y,
        grid.spacing()
    )?;
    for y in (0..ny).rev() {
        for x in 0..nx {
            let v = field.values()[grid.linear_index([x, y, 0])];
            w.write_all(&[(255.0 * v).round() as u8])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write a 3D field as a legacy-ASCII VTK structured-points dataset with a
/// single cell-data scalar array in linear index order.
pub fn write_vtk(field: &DensityField, path: &Path) -> Result<()> {
    let grid = field.grid();
    if grid.dim() != 3 {
        return Err(CogenError::Dimension("VTK export requires a 3D field".into()));
    }
    let [nx, ny, nz] = grid.dims();
    let o = grid.origin();
    let e = grid.spacing();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "density field")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {} {} {}", nx + 1, ny + 1, nz + 1)?;
    writeln!(w, "SPACING {e} {e} {e}")?;
    writeln!(w, "ORIGIN {} {} {}", o.x, o.y, o.z)?;
    writeln!(w, "CELL_DATA {}", grid.len())?;
    writeln!(w, "SCALARS density double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in field.values() {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Write the per-iteration convergence log:
/// `iter,v1,v2,g21,g12,h,delta`, one row per iteration.
pub fn write_convergence_csv(history: &[IterationRecord], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "iter,v1,v2,g21,g12,h,delta")?;
    for r in history {
        writeln!(w, "{},{},{},{},{},{},{}", r.iter, r.v1, r.v2, r.g21, r.g12, r.h, r.delta)?;
    }
    w.flush()?;
    Ok(())
}

/// Write the volume-ratio sweep table: `gamma,v1,v2,sum`.
pub fn write_gamma_csv(rows: &[GammaRow], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "gamma,v1,v2,sum")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.gamma, r.v1, r.v2, r.sum)?;
    }
    w.flush()?;
    Ok(())
}

/// Write a distance series as `k,t_k,distance` rows.
pub fn write_distance_csv(
    values: &[f64],
    trajectory: &Trajectory,
    path: &Path,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "k,t_k,distance")?;
    for (k, v) in values.iter().enumerate() {
        writeln!(w, "{},{},{}", k, trajectory.time(k), v)?;
    }
    w.flush()?;
    Ok(())
}
