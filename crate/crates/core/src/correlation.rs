//! Sparse motion-correlation matrices.
//!
//! Entry `(i_stat, i_mov)` holds the fraction of the motion during which the
//! moving grid's vertex (cell center) `i_mov`, displaced by the sampled
//! relative poses, lies inside the stationary grid's cell `i_stat`. Weights
//! are dimensionless time fractions (integer multiples of `delta = 1/K`);
//! measure factors `eps^d` are applied by the collision module. The matrix
//! depends only on the grids and the motion, never on the designs, so it is
//! assembled once and reused across the whole optimization.
//!
//! Assembly walks each moving vertex through all `K` poses and locates it
//! directly on the uniform stationary grid, which costs `O(n_mov * K)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{CogenError, Result};
use crate::geometry::Grid;
use crate::motion::Pose;

const CACHE_MAGIC: &[u8; 5] = b"COGW1";

/// Sparse stationary-cell x moving-vertex time-fraction weights in
/// compressed-row form. Entries are deduplicated and sorted by (row, col).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    dim: usize,
    rows: usize,
    cols: usize,
    timesteps: usize,
    delta: f64,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    weights: Vec<f64>,
}

impl CorrelationMatrix {
    /// Assemble the correlation matrix for `leg`, a list of `K` poses
    /// mapping moving-frame points into the stationary frame. Vertices that
    /// leave the stationary domain contribute nothing.
    pub fn assemble(stationary: &Grid, moving: &Grid, leg: &[Pose]) -> Result<Self> {
        if leg.is_empty() {
            return Err(CogenError::Config("correlation assembly needs at least one pose".into()));
        }
        if stationary.dim() != moving.dim() {
            return Err(CogenError::Dimension(format!(
                "stationary grid is {}D but moving grid is {}D",
                stationary.dim(),
                moving.dim()
            )));
        }
        let timesteps = leg.len();
        let delta = 1.0 / timesteps as f64;
        let rows = stationary.len();
        let cols = moving.len();

        // Per-vertex dwell counts, merged deterministically in vertex order.
        let per_vertex: Vec<Vec<(u32, u32)>> = (0..cols)
            .into_par_iter()
            .map(|j| {
                let x = moving.cell_center(j);
                let mut visits: Vec<(u32, u32)> = Vec::new();
                let mut prev: Option<u32> = None;
                for pose in leg {
                    match stationary.locate(&pose.apply(&x)) {
                        Some(cell) => {
                            let cell = cell as u32;
                            if prev == Some(cell) {
                                visits.last_mut().unwrap().1 += 1;
                            } else {
                                visits.push((cell, 1));
                                prev = Some(cell);
                            }
                        }
                        None => prev = None,
                    }
                }
                visits.sort_unstable_by_key(|e| e.0);
                // merge revisits of the same cell
                let mut merged: Vec<(u32, u32)> = Vec::with_capacity(visits.len());
                for (cell, count) in visits {
                    match merged.last_mut() {
                        Some(top) if top.0 == cell => top.1 += count,
                        _ => merged.push((cell, count)),
                    }
                }
                merged
            })
            .collect();

        // Counting sort into CSR; per row, columns arrive in ascending order.
        let mut row_counts = vec![0usize; rows];
        for entries in &per_vertex {
            for &(cell, _) in entries {
                row_counts[cell as usize] += 1;
            }
        }
        let mut row_ptr = vec![0usize; rows + 1];
        for i in 0..rows {
            row_ptr[i + 1] = row_ptr[i] + row_counts[i];
        }
        let nnz = row_ptr[rows];
        let mut col_idx = vec![0u32; nnz];
        let mut weights = vec![0.0f64; nnz];
        let mut cursor = row_ptr.clone();
        for (j, entries) in per_vertex.iter().enumerate() {
            for &(cell, count) in entries {
                let slot = cursor[cell as usize];
                col_idx[slot] = j as u32;
                weights[slot] = count as f64 * delta;
                cursor[cell as usize] += 1;
            }
        }

        Ok(Self {
            dim: stationary.dim(),
            rows,
            cols,
            timesteps,
            delta,
            row_ptr,
            col_idx,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn nnz(&self) -> usize {
        self.weights.len()
    }

    /// Iterate entries in (row, col) order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(move |e| (i, self.col_idx[e] as usize, self.weights[e]))
        })
    }

    /// Keep only entries whose row and column are both selected.
    /// Dimensions are preserved; unselected entries vanish.
    pub fn restrict(&self, row_mask: &[bool], col_mask: &[bool]) -> Result<Self> {
        if row_mask.len() != self.rows || col_mask.len() != self.cols {
            return Err(CogenError::Dimension(format!(
                "restriction masks sized {}x{} against a {}x{} matrix",
                row_mask.len(),
                col_mask.len(),
                self.rows,
                self.cols
            )));
        }
        let mut row_ptr = Vec::with_capacity(self.rows + 1);
        let mut col_idx = Vec::new();
        let mut weights = Vec::new();
        row_ptr.push(0);
        for i in 0..self.rows {
            if row_mask[i] {
                for e in self.row_ptr[i]..self.row_ptr[i + 1] {
                    if col_mask[self.col_idx[e] as usize] {
                        col_idx.push(self.col_idx[e]);
                        weights.push(self.weights[e]);
                    }
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            dim: self.dim,
            rows: self.rows,
            cols: self.cols,
            timesteps: self.timesteps,
            delta: self.delta,
            row_ptr,
            col_idx,
            weights,
        })
    }

    /// `y = W v`. Rows are summed in sorted entry order, so results are
    /// bit-reproducible regardless of the worker count.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(CogenError::Dimension(format!(
                "matvec operand has {} entries, expected {}",
                v.len(),
                self.cols
            )));
        }
        let mut y = vec![0.0; self.rows];
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut acc = 0.0;
            for e in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.weights[e] * v[self.col_idx[e] as usize];
            }
            *yi = acc;
        });
        Ok(y)
    }

    /// `y = W^T v`, accumulated in a fixed traversal order.
    pub fn matvec_transposed(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(CogenError::Dimension(format!(
                "transposed matvec operand has {} entries, expected {}",
                v.len(),
                self.rows
            )));
        }
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            for e in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[e] as usize] += self.weights[e] * vi;
            }
        }
        Ok(y)
    }

    /// Per-column weight sums. Each is at most 1: a vertex occupies at most
    /// one cell per timestep.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for e in 0..self.weights.len() {
            sums[self.col_idx[e] as usize] += self.weights[e];
        }
        sums
    }

    pub fn max_column_sum(&self) -> f64 {
        self.column_sums().into_iter().fold(0.0, f64::max)
    }

    /// Write the binary cache: the `COGW1` header (dimension, shape, K,
    /// delta, entry count, content hash) followed by little-endian
    /// `(u32 row, u32 col, f64 weight)` triplets sorted by (row, col).
    pub fn write_cache(&self, path: &Path, content_hash: &[u8; 32]) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&[self.dim as u8])?;
        w.write_all(&(self.rows as u32).to_le_bytes())?;
        w.write_all(&(self.cols as u32).to_le_bytes())?;
        w.write_all(&(self.timesteps as u32).to_le_bytes())?;
        w.write_all(&self.delta.to_le_bytes())?;
        w.write_all(&(self.nnz() as u64).to_le_bytes())?;
        w.write_all(content_hash)?;
        for (row, col, weight) in self.entries() {
            w.write_all(&(row as u32).to_le_bytes())?;
            w.write_all(&(col as u32).to_le_bytes())?;
            w.write_all(&weight.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a cache file back, returning the matrix and its stored content
    /// hash.
    pub fn read_cache(path: &Path) -> Result<(Self, [u8; 32])> {
        let bad = |reason: &str| CogenError::Format {
            path: path.display().to_string(),
            reason: reason.to_string(),
        };
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(bad("bad magic, not a correlation cache"));
        }
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte)?;
        let dim = byte[0] as usize;
        if dim != 2 && dim != 3 {
            return Err(bad("dimension must be 2 or 3"));
        }
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        let timesteps = read_u32(&mut r)? as usize;
        let delta = read_f64(&mut r)?;
        let nnz = read_u64(&mut r)? as usize;
        let mut hash = [0u8; 32];
        r.read_exact(&mut hash)?;
        if timesteps == 0 || !(delta > 0.0) {
            return Err(bad("timestep metadata is invalid"));
        }

        let mut row_counts = vec![0usize; rows];
        let mut col_idx = Vec::with_capacity(nnz);
        let mut weights = Vec::with_capacity(nnz);
        let mut prev: Option<(u32, u32)> = None;
        for _ in 0..nnz {
            let row = read_u32(&mut r)?;
            let col = read_u32(&mut r)?;
            let weight = read_f64(&mut r)?;
            if row as usize >= rows || col as usize >= cols {
                return Err(bad("entry index out of range"));
            }
            if let Some(p) = prev {
                if (row, col) <= p {
                    return Err(bad("entries are not strictly sorted by (row, col)"));
                }
            }
            if !weight.is_finite() || weight <= 0.0 || weight > 1.0 + 1e-12 {
                return Err(bad("entry weight outside (0, 1]"));
            }
            prev = Some((row, col));
            row_counts[row as usize] += 1;
            col_idx.push(col);
            weights.push(weight);
        }
        let mut trailing = Vec::new();
        r.read_to_end(&mut trailing)?;
        if !trailing.is_empty() {
            return Err(bad("trailing bytes after the declared entry count"));
        }
        let mut row_ptr = vec![0usize; rows + 1];
        for i in 0..rows {
            row_ptr[i + 1] = row_ptr[i] + row_counts[i];
        }
        Ok((
            Self { dim, rows, cols, timesteps, delta, row_ptr, col_idx, weights },
            hash,
        ))
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Content hash of everything the matrix depends on: both grids and the
/// sampled leg. Stale caches are detected by comparing this against the
/// hash stored in the file.
pub fn content_hash(stationary: &Grid, moving: &Grid, leg: &[Pose]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for grid in [stationary, moving] {
        hasher.update([grid.dim() as u8]);
        for v in grid.origin().iter() {
            hasher.update(v.to_le_bytes());
        }
        hasher.update(grid.spacing().to_le_bytes());
        for d in grid.dims() {
            hasher.update((d as u64).to_le_bytes());
        }
    }
    hasher.update((leg.len() as u64).to_le_bytes());
    for pose in leg {
        for v in pose.rotation.iter() {
            hasher.update(v.to_le_bytes());
        }
        for v in pose.translation.iter() {
            hasher.update(v.to_le_bytes());
        }
    }
    hasher.finalize().into()
}
