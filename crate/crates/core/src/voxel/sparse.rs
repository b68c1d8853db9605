use std::io::{self, Write};

use ndarray::{Array2, Array4, ArrayView2};

use super::VoxelGrid;
use crate::error::{Error, Result};

/// Coordinate-list form of a `C x D' x H' x W'` voxel feature volume.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTensor {
    /// `(iz, iy, ix)` per entry.
    pub coords: Vec<[u32; 3]>,
    /// One `C`-vector per entry.
    pub values: Array2<f64>,
    /// `(C, D', H', W')`.
    pub shape: [usize; 4],
}

impl SparseTensor {
    pub fn nnz(&self) -> usize {
        self.coords.len()
    }

    /// Dense zero-filled array of the logical shape.
    pub fn densify(&self) -> Array4<f64> {
        let mut dense = Array4::<f64>::zeros(self.shape);
        for (e, [z, y, x]) in self.coords.iter().enumerate() {
            for c in 0..self.shape[0] {
                dense[[c, *z as usize, *y as usize, *x as usize]] = self.values[[e, c]];
            }
        }
        dense
    }
}

/// Pairs each voxel's coordinate with its row of `voxel_features` (`K x C`).
pub fn to_sparse_tensor(vg: &VoxelGrid, voxel_features: ArrayView2<'_, f64>) -> Result<SparseTensor> {
    if voxel_features.nrows() != vg.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows for {} voxels",
            voxel_features.nrows(),
            vg.len()
        )));
    }
    let [d, h, w] = vg.grid_shape;
    for coord in &vg.voxel_coords {
        let [z, y, x] = coord.map(|c| c as usize);
        if z >= d || y >= h || x >= w {
            return Err(Error::CoordOutOfGrid { coord: vec![z, y, x], shape: vec![d, h, w] });
        }
    }
    Ok(SparseTensor {
        coords: vg.voxel_coords.clone(),
        values: voxel_features.to_owned(),
        shape: [voxel_features.ncols(), d, h, w],
    })
}

/// Dump layout, all little-endian: header `K, C, D', H', W'` as `u32`; the
/// `K` coordinates as three `u32` each; then `K x C` values as `f32`.
pub fn write_sparse_dump<W: Write>(st: &SparseTensor, mut out: W) -> io::Result<()> {
    let [c, d, h, w] = st.shape;
    let mut buf = Vec::with_capacity(20 + st.nnz() * (12 + 4 * c));
    for v in [st.nnz(), c, d, h, w] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for coord in &st.coords {
        for v in coord {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    for v in st.values.iter() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out.write_all(&buf)
}

/// Reads a dump back; values come back at single precision.
pub fn read_sparse_dump(bytes: &[u8]) -> Result<SparseTensor> {
    let word = |i: usize| -> Result<u32> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| Error::MalformedDump("truncated".into()))
    };
    let [k, c, d, h, w] = [0, 1, 2, 3, 4].map(|i| word(i).map(|v| v as usize));
    let (k, c, d, h, w) = (k?, c?, d?, h?, w?);
    let expected = 4 * (5 + 3 * k + k * c);
    if bytes.len() != expected {
        return Err(Error::MalformedDump(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let coords = (0..k)
        .map(|e| Ok([word(5 + 3 * e)?, word(6 + 3 * e)?, word(7 + 3 * e)?]))
        .collect::<Result<Vec<_>>>()?;
    let base = 5 + 3 * k;
    let values = (0..k * c)
        .map(|i| word(base + i).map(|b| f32::from_bits(b) as f64))
        .collect::<Result<Vec<_>>>()?;
    let values = Array2::from_shape_vec((k, c), values).map_err(|e| Error::MalformedDump(e.to_string()))?;
    Ok(SparseTensor { coords, values, shape: [c, d, h, w] })
}
