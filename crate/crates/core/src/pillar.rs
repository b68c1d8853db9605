//! Pillar encoding: XY-grid bucketing into full-height columns, nine-channel
//! point augmentation and the dense `D x P x N` pseudo image.

use std::io::{self, Write};

use ndarray::{Array2, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kitti::PointCloud;

/// Channels per point: `x, y, z, r, x-xc, y-yc, z-zc, xg, yg`.
pub const PILLAR_FEATURES: usize = 9;

/// Number of cells a `(min, max)` span holds at `size`, if that count is integral.
pub(crate) fn integral_cells(name: &str, range: (f64, f64), size: f64) -> Result<usize> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::BadConfig(format!("{name} range ({lo}, {hi}) is empty")));
    }
    if !(size.is_finite() && size > 0.0) {
        return Err(Error::BadConfig(format!("{name} cell size {size} must be positive")));
    }
    let cells = (hi - lo) / size;
    let rounded = cells.round();
    if rounded < 1.0 || (cells - rounded).abs() > 1e-6 * rounded.max(1.0) {
        return Err(Error::BadConfig(format!(
            "{name} range ({lo}, {hi}) is not an integral number of {size} m cells"
        )));
    }
    Ok(rounded as usize)
}

/// Half-open cell lookup; `None` outside `[lo, lo + cells * size)`.
#[inline]
pub(crate) fn cell_index(v: f64, lo: f64, hi: f64, size: f64, cells: usize) -> Option<usize> {
    if !(v >= lo && v < hi) {
        return None;
    }
    Some((((v - lo) / size).floor() as usize).min(cells - 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PillarConfig {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub z_range: (f64, f64),
    /// `(dx, dy)` in meters.
    pub pillar_size: (f64, f64),
    pub max_pillars: usize,
    pub max_points_per_pillar: usize,
}

impl Default for PillarConfig {
    fn default() -> Self {
        PillarConfig {
            x_range: (0.0, 69.12),
            y_range: (-39.68, 39.68),
            z_range: (-3.0, 1.0),
            pillar_size: (0.16, 0.16),
            max_pillars: 12000,
            max_points_per_pillar: 100,
        }
    }
}

impl PillarConfig {
    /// Grid shape as `(width along x, height along y)`.
    pub fn grid_shape(&self) -> Result<(usize, usize)> {
        let nx = integral_cells("x", self.x_range, self.pillar_size.0)?;
        let ny = integral_cells("y", self.y_range, self.pillar_size.1)?;
        let (zlo, zhi) = self.z_range;
        if !(zlo.is_finite() && zhi.is_finite() && zlo < zhi) {
            return Err(Error::BadConfig(format!("z range ({zlo}, {zhi}) is empty")));
        }
        if self.max_pillars == 0 || self.max_points_per_pillar == 0 {
            return Err(Error::BadConfig("pillar and point caps must be at least 1".into()));
        }
        Ok((nx, ny))
    }
}

/// The pseudo image plus the grid location and fill of every pillar slot.
#[derive(Debug, Clone, PartialEq)]
pub struct PillarTensor {
    /// Shape `(9, P, N)`; unused slots are zero.
    pub features: Array3<f32>,
    /// `(ix, iy)` per slot; `(0, 0)` for unused slots.
    pub pillar_coords: Vec<[u32; 2]>,
    pub counts: Vec<u32>,
    pub num_nonempty: usize,
    /// `(width, height)` of the pillar grid.
    pub grid_shape: (usize, usize),
}

impl PillarTensor {
    pub fn max_pillars(&self) -> usize {
        self.features.len_of(Axis(1))
    }

    pub fn max_points(&self) -> usize {
        self.features.len_of(Axis(2))
    }

    pub fn total_points(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }
}

/// Buckets a cloud into pillars and builds the augmented feature tensor.
///
/// Pillars are numbered in order of their first in-range point. Once
/// `max_pillars` slots are taken, points of new pillars are dropped, and each
/// pillar keeps its first `max_points_per_pillar` points. Centroids are taken
/// over the kept points.
pub fn encode_pillars(pc: &PointCloud, cfg: &PillarConfig) -> Result<PillarTensor> {
    let (nx, ny) = cfg.grid_shape()?;
    let (p_cap, n_cap) = (cfg.max_pillars, cfg.max_points_per_pillar);
    let (dx, dy) = cfg.pillar_size;
    let (x0, x1) = cfg.x_range;
    let (y0, y1) = cfg.y_range;
    let (z0, z1) = cfg.z_range;

    const EMPTY: u32 = u32::MAX;
    let mut slot_of_cell = vec![EMPTY; nx * ny];
    let mut coords = vec![[0u32; 2]; p_cap];
    let mut counts = vec![0u32; p_cap];
    let mut members = vec![0u32; p_cap * n_cap];
    let mut used = 0usize;

    for (i, p) in pc.iter().enumerate() {
        let z = p.z as f64;
        if !(z >= z0 && z < z1) {
            continue;
        }
        let Some(ix) = cell_index(p.x as f64, x0, x1, dx, nx) else { continue };
        let Some(iy) = cell_index(p.y as f64, y0, y1, dy, ny) else { continue };
        let cell = iy * nx + ix;
        let slot = match slot_of_cell[cell] {
            EMPTY if used < p_cap => {
                slot_of_cell[cell] = used as u32;
                coords[used] = [ix as u32, iy as u32];
                used += 1;
                used - 1
            }
            EMPTY => continue,
            s => s as usize,
        };
        let c = counts[slot] as usize;
        if c < n_cap {
            members[slot * n_cap + c] = i as u32;
            counts[slot] = c as u32 + 1;
        }
    }

    let mut features = Array3::<f32>::zeros((PILLAR_FEATURES, p_cap, n_cap));
    let points = pc.points();
    for slot in 0..used {
        let idx = &members[slot * n_cap..slot * n_cap + counts[slot] as usize];
        let inv = 1.0 / idx.len() as f64;
        let mut centroid = [0.0f64; 3];
        for &i in idx {
            let p = points[i as usize];
            centroid[0] += p.x as f64;
            centroid[1] += p.y as f64;
            centroid[2] += p.z as f64;
        }
        centroid.iter_mut().for_each(|c| *c *= inv);
        let [ix, iy] = coords[slot];
        let xg = x0 + (ix as f64 + 0.5) * dx;
        let yg = y0 + (iy as f64 + 0.5) * dy;
        for (n, &i) in idx.iter().enumerate() {
            let p = points[i as usize];
            let row = [
                p.x,
                p.y,
                p.z,
                p.r,
                (p.x as f64 - centroid[0]) as f32,
                (p.y as f64 - centroid[1]) as f32,
                (p.z as f64 - centroid[2]) as f32,
                xg as f32,
                yg as f32,
            ];
            for (d, v) in row.into_iter().enumerate() {
                features[[d, slot, n]] = v;
            }
        }
    }

    Ok(PillarTensor { features, pillar_coords: coords, counts, num_nonempty: used, grid_shape: (nx, ny) })
}

/// How a pillar's points collapse to one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reducer {
    Mean,
    Max,
}

/// Per-pillar reduction of the raw nine channels over the valid points.
/// Returns `num_nonempty x 9`.
pub fn reduce_pillars(pt: &PillarTensor, reducer: Reducer) -> Array2<f32> {
    let mut out = Array2::<f32>::zeros((pt.num_nonempty, PILLAR_FEATURES));
    for slot in 0..pt.num_nonempty {
        let n = pt.counts[slot] as usize;
        for d in 0..PILLAR_FEATURES {
            let vals = pt.features.slice(ndarray::s![d, slot, ..n]);
            out[[slot, d]] = match reducer {
                Reducer::Mean => (vals.iter().map(|&v| v as f64).sum::<f64>() / n as f64) as f32,
                Reducer::Max => vals.iter().cloned().fold(f32::NEG_INFINITY, f32::max),
            };
        }
    }
    out
}

/// Writes one vector per non-empty pillar onto a `C x H x W` canvas at
/// `(iy, ix)`. `features` holds `num_nonempty` rows of `C` values.
pub fn scatter_features(pt: &PillarTensor, features: ArrayView2<'_, f32>) -> Result<Array3<f32>> {
    if features.nrows() != pt.num_nonempty {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows for {} pillars",
            features.nrows(),
            pt.num_nonempty
        )));
    }
    let (w, h) = pt.grid_shape;
    let mut canvas = Array3::<f32>::zeros((features.ncols(), h, w));
    for (slot, row) in features.outer_iter().enumerate() {
        let [ix, iy] = pt.pillar_coords[slot].map(|c| c as usize);
        if ix >= w || iy >= h {
            return Err(Error::CoordOutOfGrid { coord: vec![iy, ix], shape: vec![h, w] });
        }
        canvas.slice_mut(ndarray::s![.., iy, ix]).assign(&row);
    }
    Ok(canvas)
}

/// Reduces each pillar's raw features and scatters them to a `9 x H x W` canvas.
pub fn scatter_to_canvas(pt: &PillarTensor, reducer: Reducer) -> Result<Array3<f32>> {
    scatter_features(pt, reduce_pillars(pt, reducer).view())
}

/// Dump layout: `D, P, N` as little-endian `u32`, then the tensor in `D`-major
/// order as little-endian `f32`.
pub fn write_pillar_dump<W: Write>(pt: &PillarTensor, mut out: W) -> io::Result<()> {
    let (d, p, n) = pt.features.dim();
    for v in [d, p, n] {
        out.write_all(&(v as u32).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(pt.features.len() * 4);
    for v in pt.features.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)
}

pub fn read_pillar_dump(bytes: &[u8]) -> Result<Array3<f32>> {
    if bytes.len() < 12 {
        return Err(Error::MalformedDump("truncated header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap()) as usize;
    let (d, p, n) = (word(0), word(1), word(2));
    let body = &bytes[12..];
    if body.len() != d * p * n * 4 {
        return Err(Error::MalformedDump(format!("expected {} payload bytes, found {}", d * p * n * 4, body.len())));
    }
    let data = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Array3::from_shape_vec((d, p, n), data).map_err(|e| Error::MalformedDump(e.to_string()))
}
