//! Voxel encoding: 3D bucketing, seven-channel point augmentation, VFE layers
//! with supplied weights, image-feature fusion and the sparse voxel tensor.

mod fusion;
pub mod grad;
mod sparse;
mod vfe;

use std::collections::HashMap;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kitti::PointCloud;
use crate::pillar::{cell_index, integral_cells};

pub use fusion::append_image_features;
pub use sparse::{read_sparse_dump, to_sparse_tensor, write_sparse_dump, SparseTensor};
pub use vfe::{vfe_layer, voxel_wise_max, VfeWeights};

/// Channels per point before fusion: `x, y, z, r, x-vx, y-vy, z-vz`.
pub const VOXEL_FEATURES: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoxelConfig {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub z_range: (f64, f64),
    /// Voxel edge lengths ordered `(z, y, x)`.
    pub voxel_size: [f64; 3],
    pub max_points_per_voxel: usize,
}

impl Default for VoxelConfig {
    fn default() -> Self {
        VoxelConfig {
            x_range: (0.0, 70.4),
            y_range: (-40.0, 40.0),
            z_range: (-3.0, 1.0),
            voxel_size: [0.4, 0.2, 0.2],
            max_points_per_voxel: 35,
        }
    }
}

impl VoxelConfig {
    /// Grid shape `(D', H', W')` along z, y, x.
    pub fn grid_shape(&self) -> Result<[usize; 3]> {
        let d = integral_cells("z", self.z_range, self.voxel_size[0])?;
        let h = integral_cells("y", self.y_range, self.voxel_size[1])?;
        let w = integral_cells("x", self.x_range, self.voxel_size[2])?;
        if self.max_points_per_voxel == 0 {
            return Err(crate::Error::BadConfig("max points per voxel must be at least 1".into()));
        }
        Ok([d, h, w])
    }
}

/// Occupied voxels in first-seen order with their per-point features.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    /// `(iz, iy, ix)` per voxel, unique.
    pub voxel_coords: Vec<[u32; 3]>,
    /// Shape `(K, T, F)`; slots past `counts[k]` are zero.
    pub point_features: Array3<f64>,
    pub counts: Vec<u32>,
    /// Mean `(x, y, z)` of each voxel's kept points.
    pub centroids: Vec<[f64; 3]>,
    pub grid_shape: [usize; 3],
}

impl VoxelGrid {
    pub fn len(&self) -> usize {
        self.voxel_coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxel_coords.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.point_features.dim().2
    }

    pub fn total_points(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }
}

/// Buckets the cloud into voxels, keeping the first `T` points of each.
pub fn voxelize(pc: &PointCloud, cfg: &VoxelConfig) -> Result<VoxelGrid> {
    let [d, h, w] = cfg.grid_shape()?;
    let t_cap = cfg.max_points_per_voxel;
    let [vz, vy, vx] = cfg.voxel_size;

    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut coords: Vec<[u32; 3]> = Vec::new();
    let mut members: Vec<Vec<u32>> = Vec::new();
    for (i, p) in pc.iter().enumerate() {
        let Some(iz) = cell_index(p.z as f64, cfg.z_range.0, cfg.z_range.1, vz, d) else { continue };
        let Some(iy) = cell_index(p.y as f64, cfg.y_range.0, cfg.y_range.1, vy, h) else { continue };
        let Some(ix) = cell_index(p.x as f64, cfg.x_range.0, cfg.x_range.1, vx, w) else { continue };
        let k = *index.entry((iz * h + iy) * w + ix).or_insert_with(|| {
            coords.push([iz as u32, iy as u32, ix as u32]);
            members.push(Vec::new());
            coords.len() - 1
        });
        if members[k].len() < t_cap {
            members[k].push(i as u32);
        }
    }

    let points = pc.points();
    let mut features = Array3::<f64>::zeros((coords.len(), t_cap, VOXEL_FEATURES));
    let mut centroids = Vec::with_capacity(coords.len());
    for (k, idx) in members.iter().enumerate() {
        let mut c = [0.0f64; 3];
        for &i in idx {
            let p = points[i as usize];
            c[0] += p.x as f64;
            c[1] += p.y as f64;
            c[2] += p.z as f64;
        }
        c.iter_mut().for_each(|v| *v /= idx.len() as f64);
        for (t, &i) in idx.iter().enumerate() {
            let p = points[i as usize];
            let (x, y, z) = (p.x as f64, p.y as f64, p.z as f64);
            let row = [x, y, z, p.r as f64, x - c[0], y - c[1], z - c[2]];
            for (f, v) in row.into_iter().enumerate() {
                features[[k, t, f]] = v;
            }
        }
        centroids.push(c);
    }

    Ok(VoxelGrid {
        voxel_coords: coords,
        point_features: features,
        counts: members.iter().map(|m| m.len() as u32).collect(),
        centroids,
        grid_shape: [d, h, w],
    })
}
